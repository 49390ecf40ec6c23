#include <benchmark/benchmark.h>

#include <random>

#include "iuq/bayes_iuq.hpp"
#include "iuq/bnn.hpp"
#include "iuq/fda_align.hpp"
#include "iuq/pca.hpp"
#include "iuq/reflood_sim.hpp"

namespace {

using namespace iuq;

std::vector<TransientCurve> ensemble(std::size_t n, std::uint64_t seed) {
  std::vector<TransientCurve> out;
  for (const auto& th : lhs_sample(n, default_prior_bounds(), seed)) {
    out.push_back(simulate_pct(th, TimeGrid::default_grid()));
  }
  return out;
}

void BM_SimulatePct(benchmark::State& state) {
  const auto grid = TimeGrid::default_grid();
  const CalibrationVector theta{{1.2, 1.1, 0.8, 1.0}};
  for (auto _ : state) benchmark::DoNotOptimize(simulate_pct(theta, grid));
}
BENCHMARK(BM_SimulatePct);

void BM_Srsf(benchmark::State& state) {
  const auto curve = ensemble(1, 3).front();
  for (auto _ : state) benchmark::DoNotOptimize(srsf(curve));
}
BENCHMARK(BM_Srsf);

void BM_OptimalWarp(benchmark::State& state) {
  const auto curves = ensemble(2, 5);
  const auto q1 = srsf(curves[0]);
  const auto q2 = srsf(curves[1]);
  for (auto _ : state) benchmark::DoNotOptimize(optimal_warp(q1, q2));
}
BENCHMARK(BM_OptimalWarp)->Unit(benchmark::kMillisecond);

void BM_FitPca(benchmark::State& state) {
  const auto data = curves_to_matrix(ensemble(static_cast<std::size_t>(state.range(0)), 7));
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(data, ComponentCount{6}));
}
BENCHMARK(BM_FitPca)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_TransformCovariance(benchmark::State& state) {
  const auto model = fit_pca(curves_to_matrix(ensemble(100, 9)), ComponentCount{6});
  const auto n = model.mean.size();
  const Eigen::MatrixXd sigma = 25.0 * Eigen::MatrixXd::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(transform_covariance(model, sigma));
}
BENCHMARK(BM_TransformCovariance)->Unit(benchmark::kMillisecond);

void BM_AdaptiveMcmc(benchmark::State& state) {
  const LogDensity target = [](const CalibrationVector& x) {
    double s = 0.0;
    for (double v : x.values) s += (v - 1.0) * (v - 1.0);
    return -0.5 * s / 0.04;
  };
  McmcOptions options;
  options.n_samples = static_cast<std::size_t>(state.range(0));
  options.burn_in = options.n_samples / 5;
  options.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(adaptive_mcmc(target, CalibrationVector{{1, 1, 1, 1}}, options));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdaptiveMcmc)->Arg(25000)->Unit(benchmark::kMillisecond);

void BM_BnnPredict(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd x(200, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const Eigen::VectorXd y = x.rowwise().sum();
  BnnTrainOptions options;
  options.base.max_epochs = 5;
  const auto model = train_bnn(x, y, x.topRows(40), y.head(40), options);
  const Eigen::VectorXd probe = x.row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(probe, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_BnnPredict)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
