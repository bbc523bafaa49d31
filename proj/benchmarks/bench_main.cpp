#include <benchmark/benchmark.h>

#include <random>

#include "pfpose/maskops.hpp"
#include "pfpose/metrics.hpp"
#include "pfpose/network.hpp"

using namespace pfpose;

namespace {

struct AddsCase {
  Pose gt, est;
  ObjectModel model;
};

AddsCase adds_case(int m) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  Points pts(m, 3);
  for (int i = 0; i < m; ++i) pts.row(i) << u(rng), u(rng), u(rng);
  AddsCase c{Pose::identity(), Pose::from_quaternion(axis_angle({0, 0, 1}, 0.3), {0.01, 0.0, 0.0}),
             ObjectModel::from_points(1, pts, true)};
  return c;
}

void BM_AddsExact(benchmark::State& state) {
  const auto c = adds_case(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(adds(c.gt, c.est, c.model));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AddsExact)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

void BM_AddsGrid(benchmark::State& state) {
  const auto c = adds_case(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(adds_grid(c.gt, c.est, c.model));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AddsGrid)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

BinaryMask random_mask(int side) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution b(0.3);
  BinaryMask m(side, side);
  for (auto& v : m.data()) v = b(rng);
  return m;
}

void BM_Median(benchmark::State& state) {
  const auto m = random_mask(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(median_filter_3x3(m));
}
BENCHMARK(BM_Median)->Arg(120)->Arg(480);

void BM_Dilate(benchmark::State& state) {
  const auto m = random_mask(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dilate_5x5(m));
}
BENCHMARK(BM_Dilate)->Arg(120)->Arg(480);

void BM_Forward(benchmark::State& state) {
  torch::manual_seed(0);
  torch::set_num_threads(1);
  NetworkConfig cfg;
  cfg.crop_size = static_cast<int>(state.range(0));
  PoseNetwork net(cfg);
  net->eval();
  torch::NoGradGuard guard;
  const int side = cfg.crop_size;
  ObjectBatch b;
  b.side = side;
  b.rgb = torch::rand({1, 3, side, side}) - 0.5;
  b.mask = torch::ones({1, 1, side, side});
  b.class_index = torch::ones({1}, torch::kInt64);
  b.centroid = torch::tensor({{0.0f, 0.0f, 0.5f}});
  b.pixel_index.push_back(torch::arange(side * side, torch::kInt64));
  b.points.push_back(torch::randn({side * side, 3}) * 0.03 + torch::tensor({0.0f, 0.0f, 0.5f}));
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(b, 2).refined.back().quaternion);
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
