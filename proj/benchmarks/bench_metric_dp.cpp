#include <benchmark/benchmark.h>

#include "hjlab/env_field.hpp"
#include "hjlab/lagrangian.hpp"
#include "hjlab/metric_dp.hpp"

namespace {

hjlab::EnvironmentSpec bounded(int slabs) {
  hjlab::EnvironmentSpec s;
  s.law_param = 1.0;
  s.slab_count = slabs;
  s.seed = 3;
  return s;
}

// Metric front to time T on dx = dt = 1/4, v_cap 4.
void BM_front_1d(benchmark::State& st) {
  const double T = static_cast<double>(st.range(0));
  const int workers = static_cast<int>(st.range(1));
  const hjlab::Environment env(bounded(static_cast<int>(T) + 2));
  const hjlab::LagrangianModel m;
  hjlab::GridSpec g;
  g.dx = 0.25;
  g.dt = 0.25;
  g.v_cap = 4.0;
  g.half_width = 4.0 * T + 1.0;
  hjlab::SolveOptions o;
  o.keep_backpointers = false;
  o.keep_layers = false;
  o.workers = workers;
  std::size_t cells = 0;
  for (auto _ : st) {
    o.observer = [&](int, const hjlab::Layer& l) { cells += l.values.size(); };
    auto f = hjlab::solve_metric_front(env, m, g, {0.0, 0.0}, 0.0, T, o);
    benchmark::DoNotOptimize(f.steps);
  }
  st.counters["nodes/s"] = benchmark::Counter(static_cast<double>(cells), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_front_1d)->Args({64, 1})->Args({256, 1})->Args({256, 4})->Unit(benchmark::kMillisecond);

void BM_front_2d(benchmark::State& st) {
  hjlab::EnvironmentSpec s = bounded(12);
  s.d = 2;
  const hjlab::Environment env(s);
  const hjlab::LagrangianModel m;
  hjlab::GridSpec g;
  g.d = 2;
  g.dx = 0.25;
  g.dt = 0.25;
  g.v_cap = 2.0;
  g.half_width = 2.0 * 8 + 1.0;
  hjlab::SolveOptions o;
  o.keep_backpointers = false;
  o.workers = static_cast<int>(st.range(0));
  for (auto _ : st) {
    auto f = hjlab::solve_metric_front(env, m, g, {0.0, 0.0}, 0.0, 8.0, o);
    benchmark::DoNotOptimize(f.steps);
  }
}
BENCHMARK(BM_front_2d)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
