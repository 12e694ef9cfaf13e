// Serial vs OpenMP kernels. Argument: batch rows (affine) or sample count (AP).

#include <benchmark/benchmark.h>

#include <vector>

#include "adagc/kernels.hpp"
#include "adagc/ndcore.hpp"

namespace k = adagc::kernels;

namespace {

constexpr std::size_t kFanIn = 64, kFanOut = 64, kClasses = 19;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  adagc::SeededRng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <auto Forward>
void affine_forward(benchmark::State& state) {
  const k::AffineShape s{static_cast<std::size_t>(state.range(0)), kFanIn, kFanOut};
  const auto in = random_vector(s.rows * s.fan_in, 1);
  const auto w = random_vector(s.fan_out * s.fan_in, 2);
  const auto b = random_vector(s.fan_out, 3);
  std::vector<double> out(s.rows * s.fan_out);
  for (auto _ : state) {
    Forward(s, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.rows));
}

template <auto Backward>
void affine_backward_params(benchmark::State& state) {
  const k::AffineShape s{static_cast<std::size_t>(state.range(0)), kFanIn, kFanOut};
  const auto in = random_vector(s.rows * s.fan_in, 1);
  const auto d_out = random_vector(s.rows * s.fan_out, 4);
  std::vector<double> gw(s.fan_out * s.fan_in), gb(s.fan_out);
  for (auto _ : state) {
    Backward(s, d_out, in, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.rows));
}

template <auto Ap>
void ap_columns(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto scores = random_vector(rows * kClasses, 5);
  std::vector<double> labels = random_vector(rows * kClasses, 6);
  for (double& v : labels) v = v > 0.6 ? 1.0 : 0.0;
  std::vector<double> ap(kClasses);
  for (auto _ : state) {
    Ap(rows, kClasses, scores, labels, ap);
    benchmark::DoNotOptimize(ap.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

}  // namespace

BENCHMARK(affine_forward<k::serial::affine_forward>)->Name("affine_forward/serial")->Range(32, 4096);
BENCHMARK(affine_forward<k::omp::affine_forward>)->Name("affine_forward/omp")->Range(32, 4096);
BENCHMARK(affine_backward_params<k::serial::affine_backward_params>)
    ->Name("affine_backward_params/serial")
    ->Range(32, 4096);
BENCHMARK(affine_backward_params<k::omp::affine_backward_params>)
    ->Name("affine_backward_params/omp")
    ->Range(32, 4096);
BENCHMARK(ap_columns<k::serial::average_precision_columns>)->Name("ap_columns/serial")->Range(256, 16384);
BENCHMARK(ap_columns<k::omp::average_precision_columns>)->Name("ap_columns/omp")->Range(256, 16384);

BENCHMARK_MAIN();
