#include <benchmark/benchmark.h>

#include <vector>

#include "d3as/assignment.hpp"
#include "d3as/dda.hpp"
#include "d3as/encoder.hpp"
#include "d3as/graph.hpp"
#include "d3as/metrics.hpp"
#include "d3as/random.hpp"
#include "d3as/simkit.hpp"

namespace {

using namespace d3as;

Eigen::MatrixXd random_matrix(int rows, int cols, RandomStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.normal();
  }
  return m;
}

void bench_encoder_forward(benchmark::State& state) {
  nn::EncoderConfig cfg;
  cfg.max_positions = 16;
  nn::ParamStore store;
  RandomStream init(7);
  const nn::EncoderParams params = nn::make_encoder(store, cfg, "enc", init);
  RandomStream data(11);
  const Eigen::MatrixXd x = random_matrix(cfg.width, 12, data);
  const std::vector<int> positions(12, 3);
  for (auto _ : state) {
    nn::Graph g;
    const nn::Graph::Id out = nn::encoder_forward(
        g, g.input(x), positions, params, cfg, false, nullptr);
    benchmark::DoNotOptimize(g.value(out).sum());
  }
}
BENCHMARK(bench_encoder_forward);

void bench_encoder_backward(benchmark::State& state) {
  nn::EncoderConfig cfg;
  cfg.max_positions = 16;
  nn::ParamStore store;
  RandomStream init(7);
  const nn::EncoderParams params = nn::make_encoder(store, cfg, "enc", init);
  RandomStream data(11);
  const Eigen::MatrixXd x = random_matrix(cfg.width, 12, data);
  const std::vector<int> positions(12, 3);
  for (auto _ : state) {
    store.zero_grad();
    nn::Graph g;
    const nn::Graph::Id out = nn::encoder_forward(
        g, g.input(x), positions, params, cfg, false, nullptr);
    const nn::Graph::Id loss = g.sum(out);
    g.backward(loss);
    benchmark::DoNotOptimize(g.value(loss)(0, 0));
  }
}
BENCHMARK(bench_encoder_backward);

void bench_tgospa_lp(benchmark::State& state) {
  RandomStream rng(3);
  const int window = 4;
  const auto make_set = [&](int count) {
    std::vector<metrics::Trajectory> set;
    for (int i = 0; i < count; ++i) {
      metrics::Trajectory traj;
      traj.t_s = 1;
      for (int t = 0; t < window; ++t) {
        traj.states.push_back(Eigen::Vector4d(rng.normal() * 5,
                                              rng.normal() * 5, rng.normal(),
                                              rng.normal()));
      }
      set.push_back(traj);
    }
    return set;
  };
  const auto x = make_set(3);
  const auto y = make_set(3);
  const metrics::TgospaParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::tgospa(x, y, window, params).total);
  }
}
BENCHMARK(bench_tgospa_lp);

void bench_assignment(benchmark::State& state) {
  RandomStream rng(5);
  const Eigen::MatrixXd cost = random_matrix(8, 4, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assign::solve_min_cost(cost).cost);
  }
}
BENCHMARK(bench_assignment);

void bench_simulate_scene(benchmark::State& state) {
  const sim::TaskConfig cfg = sim::make_task(1);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    RandomStream rng(++seed);
    benchmark::DoNotOptimize(sim::simulate_scene(cfg, rng).measurements.size());
  }
}
BENCHMARK(bench_simulate_scene);

}  // namespace

BENCHMARK_MAIN();
