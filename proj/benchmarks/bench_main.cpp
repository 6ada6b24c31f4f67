#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "krrlab/krr.hpp"
#include "krrlab/rates.hpp"
#include "krrlab/specfun.hpp"
#include "krrlab/spectrum.hpp"
#include "krrlab/target.hpp"

using namespace krrlab;

static void BM_Gram(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto pk = ProductKernel::gaussian(50);
  Rng rng(1);
  const auto X = pk.sample(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(pk.gram(X));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Gram)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

static void BM_Fit(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto pk = ProductKernel::gaussian(50);
  Rng rng(2);
  TrainingSet data{pk.sample(rng, n), Vector(n)};
  std::normal_distribution<double> z;
  for (int i = 0; i < n; ++i) data.y(i) = z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit(pk, data, 1e-3));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Fit)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

static void BM_BesselReduced(benchmark::State& state) {
  double z = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(specfun::log_bessel_i_reduced(0.5, z));
    z = z < 500.0 ? z * 1.1 : 0.1;
  }
}
BENCHMARK(BM_BesselReduced);

static void BM_Functionals(benchmark::State& state) {
  const auto sp = build_spectrum(ProductKernel::gaussian(static_cast<int>(state.range(0))), 8);
  for (auto _ : state) {
    for (double lam = 1e-8; lam < 1.0; lam *= 10.0) {
      benchmark::DoNotOptimize(n1(sp, lam));
      benchmark::DoNotOptimize(n2(sp, lam));
    }
  }
}
BENCHMARK(BM_Functionals)->Arg(10)->Arg(100)->Arg(1000);

static void BM_RateCurve(benchmark::State& state) {
  const auto grid = gamma_grid(0.01, 10.0, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(rate_curve(1.5, grid, CurveSelection::Both, CurveAxis::D));
}
BENCHMARK(BM_RateCurve);
BENCHMARK_MAIN();
