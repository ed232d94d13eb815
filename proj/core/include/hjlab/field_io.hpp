#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hjlab/metric_dp.hpp"

namespace hjlab {

inline constexpr std::uint32_t kFieldFormatVersion = 1;

// Binary layout (little-endian host order):
//   char[4] "HJLF", u32 format_version, i32 d, i32 kind, f64 dx, dt,
//   half_width, v_cap, t0, origin[2], tau_quad, i32 steps, i32 nodes_per_axis,
//   u32 stored layer count, then per stored layer: i32 k followed by
//   node_count doubles in row-major order (+inf outside the active box).
void write_field_binary(std::ostream& os, const SpaceTimeField& field);

struct FieldDump {
  GridSpec grid;
  FieldKind kind = FieldKind::metric;
  double t0 = 0.0;
  Point origin{0.0, 0.0};
  double tau_quad = 0.0;
  int steps = 0;
  std::vector<int> layer_index;
  std::vector<std::vector<double>> layers;  // full row-major grids
};

FieldDump read_field_binary(std::istream& is);

// CSV with columns t, x[, y], value; one row per active node of every
// stride-th stored layer (the final layer is always included).
void write_field_csv(std::ostream& os, const SpaceTimeField& field, int layer_stride = 1);

}  // namespace hjlab
