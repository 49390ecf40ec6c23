#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "iuq/errors.hpp"
#include "iuq/fda_align.hpp"

using namespace iuq;
using iuq::test::make_curve;
using iuq::test::max_abs_diff;

namespace {

const TimeGrid kUnit(0.0, 1.0, 201);

// Smooth boundary-fixing warp t + a sin(pi t) + b sin(2 pi t).
WarpingFunction smooth_warp(const TimeGrid& grid, double a, double b) {
  std::vector<double> g(grid.size());
  const double L = grid.t_end() - grid.t_start();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u = (grid.time(i) - grid.t_start()) / L;
    g[i] = grid.t_start() + L * (u + a * std::sin(std::numbers::pi * u) + b * std::sin(2 * std::numbers::pi * u));
  }
  g.front() = grid.t_start();
  g.back() = grid.t_end();
  return {grid, g};
}

double bumpy(double t) { return 2.0 * std::exp(-std::pow((t - 0.3) / 0.07, 2)) + std::exp(-std::pow((t - 0.7) / 0.1, 2)) + t; }

}  // namespace

TEST_CASE("srsf of simple functions") {
  SUBCASE("linear gives one") {
    const auto q = srsf(make_curve(kUnit, [](double t) { return t; }));
    for (double v : q.q) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant gives zero") {
    const auto q = srsf(make_curve(kUnit, [](double) { return 7.5; }));
    for (double v : q.q) CHECK(v == 0.0);
  }
  SUBCASE("t squared is close to sqrt(2t)") {
    const auto q = srsf(make_curve(kUnit, [](double t) { return t * t; }));
    const double h = kUnit.spacing();
    double worst = 0.0;
    for (std::size_t i = 0; i < q.q.size(); ++i) {
      worst = std::max(worst, std::abs(q.q[i] - std::sqrt(2.0 * kUnit.time(i))));
    }
    // sqrt(2t) changes by at most sqrt(2 * 2h) over two grid spacings near zero.
    CHECK(worst <= std::sqrt(4.0 * h));
  }
  SUBCASE("sign follows the slope") {
    const auto f = make_curve(kUnit, [](double t) { return std::sin(6.0 * t); });
    const auto q = srsf(f);
    for (std::size_t i = 1; i + 1 < q.q.size(); ++i) {
      const double d = f.values[i + 1] - f.values[i - 1];
      if (std::abs(d) > 1e-9) CHECK((q.q[i] > 0) == (d > 0));
    }
  }
  SUBCASE("too few points") {
    CHECK_THROWS_AS(srsf(TransientCurve(TimeGrid(0, 1, 2), {1.0, 2.0})), ArgumentError);
  }
}

TEST_CASE("srsf_to_curve") {
  SUBCASE("round trip on t squared") {
    const auto f = make_curve(kUnit, [](double t) { return 1.0 + t * t; });
    const auto g = srsf_to_curve(srsf(f), f.values.front());
    double rel = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) rel = std::max(rel, std::abs(g.values[i] - f.values[i]) / std::abs(f.values[i]));
    CHECK(rel <= 1e-6);
  }
  SUBCASE("zero q gives a constant") {
    const auto g = srsf_to_curve({kUnit, std::vector<double>(kUnit.size(), 0.0)}, 500.0);
    for (double v : g.values) CHECK(v == 500.0);
  }
  SUBCASE("unit q gives the identity") {
    const auto g = srsf_to_curve({kUnit, std::vector<double>(kUnit.size(), 1.0)}, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.values[i] == doctest::Approx(kUnit.time(i)).epsilon(1e-12));
  }
}

TEST_CASE("warp_curve") {
  const auto f = make_curve(kUnit, bumpy);
  const auto gamma = smooth_warp(kUnit, 0.15, 0.05);
  CHECK(max_abs_diff(warp_curve(f, WarpingFunction::identity(kUnit)).values, f.values) < 1e-12);
  const auto back = warp_curve(warp_curve(f, gamma), invert_warping(gamma));
  CHECK(max_abs_diff(back.values, f.values) < 0.02);
  const auto c = warp_curve(make_curve(kUnit, [](double) { return 3.0; }), gamma);
  for (double v : c.values) CHECK(v == 3.0);
  const auto w = warp_curve(f, gamma);
  CHECK(w.values.front() == f.values.front());
  CHECK(w.values.back() == f.values.back());
  CHECK_THROWS_AS(warp_curve(f, WarpingFunction::identity(TimeGrid(0, 1, 101))), ArgumentError);
}

TEST_CASE("optimal_warp") {
  const auto f1 = make_curve(kUnit, bumpy);
  const auto q1 = srsf(f1);
  const double cell = kUnit.spacing();

  SUBCASE("identical inputs give the identity") {
    const auto g = optimal_warp(q1, q1);
    CHECK(max_abs_diff(g.gamma, kUnit.times()) <= cell + 1e-12);
  }
  SUBCASE("a known warp is inverted") {
    const auto g0 = smooth_warp(kUnit, 0.12, -0.04);
    const auto q2 = srsf(warp_curve(f1, g0));
    const auto g = optimal_warp(q1, q2);
    CHECK(g.satisfies_invariants());
    CHECK(max_abs_diff(g.gamma, invert_warping(g0).gamma) <= 2.0 * cell);
  }
  SUBCASE("cost never exceeds the identity cost and the norm is preserved") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (int r = 0; r < 5; ++r) {
      const double a = u(rng), b = u(rng);
      const auto f2 = make_curve(kUnit, [&](double t) { return 1.5 * std::exp(-std::pow((t - 0.4 - a) / 0.08, 2)) + (1 + b) * t; });
      const auto q2 = srsf(f2);
      const auto g = optimal_warp(q1, q2);
      CHECK(warp_cost(q1, q2, g) <= warp_cost(q1, q2, WarpingFunction::identity(kUnit)) + 1e-12);
      CHECK(srsf_norm(warp_srsf(q2, g)) == doctest::Approx(srsf_norm(q2)).epsilon(0.01));
    }
  }
  SUBCASE("shifted peaks line up") {
    const auto a = make_curve(kUnit, [](double t) { return std::exp(-std::pow((t - 0.4) / 0.08, 2)); });
    const auto b = make_curve(kUnit, [](double t) { return std::exp(-std::pow((t - 0.55) / 0.08, 2)); });
    const auto g = optimal_warp(srsf(a), srsf(b));
    CHECK(std::abs(argmax_time(warp_curve(b, g)) - argmax_time(a)) <= cell + 1e-12);
  }
}

TEST_CASE("align_ensemble") {
  SUBCASE("identical curves stay put") {
    const auto c = simulate_pct({}, TimeGrid::default_grid());
    const auto al = align_ensemble({c, c, c});
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(max_abs_diff(al.warpings[i].gamma, c.grid.times()) < 1e-9);
      CHECK(max_abs_diff(al.warped_curves[i].values, c.values) < 1e-9);
    }
  }
  SUBCASE("shifted bumps meet at the template peak") {
    const TimeGrid grid(0.0, 1.0, 301);
    const auto a = make_curve(grid, [](double t) { return 1 + std::exp(-std::pow((t - 0.4) / 0.06, 2)); });
    const auto b = make_curve(grid, [](double t) { return 1 + std::exp(-std::pow((t - 0.6) / 0.06, 2)); });
    const auto al = align_ensemble({a, b});
    const double tp = argmax_time(srsf_to_curve(al.template_srsf, 1.0));
    CHECK(std::abs(argmax_time(al.warped_curves[0]) - argmax_time(al.warped_curves[1])) <= 2 * grid.spacing());
    CHECK(std::abs(argmax_time(al.warped_curves[0]) - tp) <= 2 * grid.spacing());
  }
  SUBCASE("synthetic ensemble: landmarks collapse and the round trip holds") {
    const auto grid = TimeGrid::default_grid();
    const auto curves = iuq::test::simulate_all(lhs_sample(30, default_prior_bounds(), 5), grid);
    const auto al = align_ensemble(curves);
    const auto pre = landmark_spread(curves);
    const auto post = landmark_spread(al.warped_curves);
    CHECK(post.peak_time_std <= 0.05 * pre.peak_time_std);
    CHECK(post.quench_time_std <= 0.05 * pre.quench_time_std);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      CHECK(al.warpings[i].satisfies_invariants());
      const auto rec = reconstruct_curve(al.warped_curves[i], al.warpings[i]);
      const double tq = steepest_descent_time(curves[i]);
      double far = 0.0, near = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double e = std::abs(rec.values[k] - curves[i].values[k]);
        double& slot = std::abs(grid.time(k) - tq) <= 2 * grid.spacing() + 1e-9 ? near : far;
        slot = std::max(slot, e);
      }
      CHECK(far <= 1.0);
      CHECK(near <= 15.0);
    }
  }
  SUBCASE("a single curve is rejected") {
    CHECK_THROWS_AS(align_ensemble({simulate_pct({}, TimeGrid::default_grid())}), ArgumentError);
  }
}

TEST_CASE("reconstruct_curve and warp repair") {
  const auto f = make_curve(kUnit, bumpy);
  CHECK(max_abs_diff(reconstruct_curve(f, WarpingFunction::identity(kUnit)).values, f.values) < 1e-12);

  SUBCASE("a flat segment is repaired") {
    auto g = smooth_warp(kUnit, 0.1, 0.0);
    for (std::size_t i = 60; i < 90; ++i) g.gamma[i] = g.gamma[60];
    g.gamma[95] = g.gamma[94] - 0.01;
    const auto r = repair_warping(g);
    CHECK(r.strictly_increasing());
    CHECK(r.satisfies_invariants());
    const auto c = reconstruct_curve(f, g);
    for (double v : c.values) CHECK(std::isfinite(v));
  }
  SUBCASE("a constant warp cannot be repaired") {
    const WarpingFunction g{kUnit, std::vector<double>(kUnit.size(), 0.5)};
    CHECK_THROWS_AS(reconstruct_curve(f, g), NumericError);
  }
}
