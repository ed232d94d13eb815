#include "hjlab/field_io.hpp"

#include <array>
#include <cstring>
#include <istream>
#include <ostream>

#include "hjlab/errors.hpp"

namespace hjlab {

namespace {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ValidationError("truncated field file");
  return v;
}

bool stored(const SpaceTimeField& f, int k) {
  const Layer& l = f.layers[k];
  return !l.values.empty();
}

std::vector<double> full_grid(const SpaceTimeField& f, int k) {
  const GridSpec& g = f.grid;
  const int n = g.nodes_per_axis();
  std::vector<double> out(g.node_count(), kInf);
  const Layer& l = f.layers[k];
  if (g.d == 1) {
    for (int i = l.lo[0]; i <= l.hi[0]; ++i) out[i] = l.values[i - l.lo[0]];
  } else {
    std::size_t s = 0;
    for (int i = l.lo[0]; i <= l.hi[0]; ++i)
      for (int j = l.lo[1]; j <= l.hi[1]; ++j)
        out[static_cast<std::size_t>(i) * n + j] = l.values[s++];
  }
  return out;
}

}  // namespace

void write_field_binary(std::ostream& os, const SpaceTimeField& field) {
  os.write("HJLF", 4);
  put<std::uint32_t>(os, kFieldFormatVersion);
  put<std::int32_t>(os, field.grid.d);
  put<std::int32_t>(os, field.kind == FieldKind::metric ? 0 : 1);
  for (double v : {field.grid.dx, field.grid.dt, field.grid.half_width, field.grid.v_cap, field.t0,
                   field.origin[0], field.origin[1], field.tau_quad}) {
    put<double>(os, v);
  }
  put<std::int32_t>(os, field.steps);
  put<std::int32_t>(os, field.grid.nodes_per_axis());
  std::uint32_t count = 0;
  for (int k = 0; k <= field.steps; ++k) count += stored(field, k) ? 1 : 0;
  put<std::uint32_t>(os, count);
  for (int k = 0; k <= field.steps; ++k) {
    if (!stored(field, k)) continue;
    put<std::int32_t>(os, k);
    const auto grid = full_grid(field, k);
    os.write(reinterpret_cast<const char*>(grid.data()),
             static_cast<std::streamsize>(grid.size() * sizeof(double)));
  }
  if (!os) throw Error("failed writing field file");
}

FieldDump read_field_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HJLF", 4) != 0) throw ValidationError("not a field file");
  const auto version = get<std::uint32_t>(is);
  if (version != kFieldFormatVersion) throw ValidationError("unsupported field format_version");
  FieldDump d;
  d.grid.d = get<std::int32_t>(is);
  d.kind = get<std::int32_t>(is) == 0 ? FieldKind::metric : FieldKind::solution;
  d.grid.dx = get<double>(is);
  d.grid.dt = get<double>(is);
  d.grid.half_width = get<double>(is);
  d.grid.v_cap = get<double>(is);
  d.t0 = get<double>(is);
  d.origin[0] = get<double>(is);
  d.origin[1] = get<double>(is);
  d.tau_quad = get<double>(is);
  d.steps = get<std::int32_t>(is);
  const int n = get<std::int32_t>(is);
  require(n == d.grid.nodes_per_axis(), "field header is inconsistent");
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t c = 0; c < count; ++c) {
    d.layer_index.push_back(get<std::int32_t>(is));
    std::vector<double> vals(d.grid.node_count());
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!is) throw ValidationError("truncated field file");
    d.layers.push_back(std::move(vals));
  }
  return d;
}

void write_field_csv(std::ostream& os, const SpaceTimeField& field, int layer_stride) {
  require(layer_stride >= 1, "layer stride must be positive");
  const GridSpec& g = field.grid;
  os << (g.d == 1 ? "t,x,value\n" : "t,x,y,value\n");
  os.precision(17);
  for (int k = 0; k <= field.steps; ++k) {
    if (k % layer_stride != 0 && k != field.steps) continue;
    if (!stored(field, k)) continue;
    const Layer& l = field.layers[k];
    const double t = field.time(k);
    if (g.d == 1) {
      for (int i = l.lo[0]; i <= l.hi[0]; ++i)
        os << t << ',' << g.coordinate(i) << ',' << l.values[i - l.lo[0]] << '\n';
    } else {
      std::size_t s = 0;
      for (int i = l.lo[0]; i <= l.hi[0]; ++i)
        for (int j = l.lo[1]; j <= l.hi[1]; ++j)
          os << t << ',' << g.coordinate(i) << ',' << g.coordinate(j) << ',' << l.values[s++]
             << '\n';
    }
  }
}

}  // namespace hjlab
