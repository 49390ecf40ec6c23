#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "iuq/errors.hpp"
#include "iuq/reflood_sim.hpp"

using namespace iuq;

TEST_CASE("nominal parameters reach the nominal peak exactly") {
  const auto c = simulate_pct({}, TimeGrid::default_grid());
  CHECK(c.size() == 1000);
  CHECK(*std::max_element(c.values.begin(), c.values.end()) == SimulatorConstants::nominal_peak_temperature);
}

TEST_CASE("a larger P1010 delays the quench") {
  const auto grid = TimeGrid::default_grid();
  const auto a = simulate_pct({{1, 1, 1, 1}}, grid);
  const auto b = simulate_pct({{1, 1.5, 1, 1}}, grid);
  CHECK(steepest_descent_time(b) > steepest_descent_time(a));
}

TEST_CASE("parameters outside the prior box are rejected") {
  const auto grid = TimeGrid::default_grid();
  CHECK_THROWS_AS(simulate_pct({{6, 1, 1, 1}}, grid), DomainError);
  CHECK_THROWS_AS(simulate_pct({{1, -0.1, 1, 1}}, grid), DomainError);
  CHECK_THROWS_AS(simulate_pct({{1, 1, 1, NAN}}, grid), DomainError);
}

TEST_CASE("degenerate grids are rejected") {
  CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 10), ArgumentError);
  CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 1), ArgumentError);
  CHECK_THROWS_AS(TimeGrid(1.0, 0.0, 10), ArgumentError);
}

TEST_CASE("simulate_pct is pure") {
  const auto grid = TimeGrid::default_grid();
  const CalibrationVector th{{2.2, 0.7, 3.1, 1.4}};
  CHECK(simulate_pct(th, grid).values == simulate_pct(th, grid).values);
}

TEST_CASE("feature monotonicity in P1010 and P1011") {
  for (double base : {0.5, 1.0, 2.0, 3.5}) {
    CalibrationVector lo{{1.0, base, base, 1.0}};
    CalibrationVector hi = lo;
    hi[1] += 0.05;
    CHECK(pct_features(hi).quench_time > pct_features(lo).quench_time);
    hi = lo;
    hi[2] += 0.05;
    CHECK(pct_features(hi).peak_temperature > pct_features(lo).peak_temperature);
  }
}

TEST_CASE("every curve has a unique maximum and settles on the plateau") {
  const auto grid = TimeGrid::default_grid();
  for (const auto& th : lhs_sample(60, default_prior_bounds(), 11)) {
    const auto c = simulate_pct(th, grid);
    const auto it = std::max_element(c.values.begin(), c.values.end());
    CHECK(std::count(c.values.begin(), c.values.end(), *it) == 1);
    CHECK(std::abs(c.values.back() - SimulatorConstants::saturation_temperature) <= 1.0);
    CHECK(pct_features(th).quench_time > pct_features(th).peak_time);
    for (double v : c.values) CHECK(v > 0.0);
  }
}

TEST_CASE("LHS puts exactly one point in each stratum") {
  const auto d = lhs_sample(4, default_prior_bounds(), 3);
  REQUIRE(d.size() == 4);
  for (std::size_t k = 0; k < kNumParameters; ++k) {
    std::array<int, 4> hits{};
    for (const auto& th : d) {
      const int s = static_cast<int>(th[k] / 1.25);
      REQUIRE(s >= 0);
      REQUIRE(s < 4);
      ++hits[s];
    }
    CHECK(hits == std::array<int, 4>{1, 1, 1, 1});
  }
}

TEST_CASE("LHS is reproducible and rejects n = 0") {
  CHECK(lhs_sample(50, default_prior_bounds(), 9) == lhs_sample(50, default_prior_bounds(), 9));
  CHECK(lhs_sample(50, default_prior_bounds(), 9) != lhs_sample(50, default_prior_bounds(), 10));
  CHECK_THROWS_AS(lhs_sample(0, default_prior_bounds(), 1), ArgumentError);
}

TEST_CASE("LHS with n = 500 has per-dimension means near the centre") {
  const auto d = lhs_sample(500, default_prior_bounds(), 2024);
  for (std::size_t k = 0; k < kNumParameters; ++k) {
    double m = 0.0;
    for (const auto& th : d) m += th[k];
    CHECK(std::abs(m / 500.0 - 2.5) < 0.1);
  }
}

TEST_CASE("synthetic experiments") {
  const auto grid = TimeGrid::default_grid();
  const CalibrationVector th{{1.2, 1.1, 0.8, 1.0}};
  const auto truth = simulate_pct(th, grid);

  SUBCASE("zero noise reproduces the simulator") {
    CHECK(synth_experiment(th, grid, 0.0, 5).curve.values == truth.values);
  }
  SUBCASE("noise std is recovered within the chi-square band") {
    const auto e = synth_experiment(th, grid, 10.0, 5);
    std::vector<double> r(grid.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = e.curve.values[i] - truth.values[i];
    double m = 0.0, s = 0.0;
    for (double x : r) m += x;
    m /= static_cast<double>(r.size());
    for (double x : r) s += (x - m) * (x - m);
    const double sd = std::sqrt(s / static_cast<double>(r.size() - 1));
    CHECK(sd >= 8.5);
    CHECK(sd <= 11.5);
    CHECK(e.noise_std == 10.0);
  }
  SUBCASE("different seeds give different noise") {
    CHECK(synth_experiment(th, grid, 10.0, 1).curve.values != synth_experiment(th, grid, 10.0, 2).curve.values);
    CHECK(synth_experiment(th, grid, 10.0, 1).curve.values == synth_experiment(th, grid, 10.0, 1).curve.values);
  }
  SUBCASE("negative noise is rejected") { CHECK_THROWS_AS(synth_experiment(th, grid, -1.0, 1), ArgumentError); }
}
