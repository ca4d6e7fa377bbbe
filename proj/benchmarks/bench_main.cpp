#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eotrack/detector.hpp"
#include "eotrack/ground_plane.hpp"
#include "eotrack/sim.hpp"
#include "eotrack/tracker.hpp"

using namespace eotrack;

static void BM_RansacPlane(benchmark::State& state) {
  const auto scene = make_plane_scene(static_cast<std::size_t>(state.range(0)), 10.0, 0.01, 0.05, 7);
  for (auto _ : state) benchmark::DoNotOptimize(ransac_plane(scene.frame, RansacConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RansacPlane)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_Dbscan(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  PointCloudFrame frame;
  for (int c = 0; c < 8; ++c) {
    const double cx = c * 0.8;
    for (int i = 0; i < state.range(0) / 8; ++i) frame.points.emplace_back(cx + g(rng), g(rng), g(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(dbscan(frame, DbscanConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frame.points.size()));
}
BENCHMARK(BM_Dbscan)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

static void BM_IekfUpdate(benchmark::State& state) {
  TrackerConfig cfg;
  const GpExtentModel gp{cfg.gp};
  auto [x, p] = initialize_state(cfg.prior_length, cfg.prior_width, Point2(1.0, 0.5), cfg.gp);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.005);
  MeasurementSet meas;
  const auto n = state.range(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    meas.emplace_back(1.02 + 0.2 * std::cos(a) + noise(rng), 0.48 + 0.16 * std::sin(a) + noise(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(iekf_update(x, p, meas, cfg.motion, gp, cfg.iekf));
}
BENCHMARK(BM_IekfUpdate)->Arg(36)->Arg(144)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
