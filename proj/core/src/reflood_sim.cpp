#include "iuq/reflood_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "iuq/errors.hpp"

namespace iuq {

Eigen::VectorXd CalibrationVector::to_eigen() const {
  Eigen::VectorXd v(kNumParameters);
  for (std::size_t i = 0; i < kNumParameters; ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

CalibrationVector CalibrationVector::from_eigen(const Eigen::VectorXd& v) {
  if (v.size() != static_cast<Eigen::Index>(kNumParameters)) {
    throw ArgumentError("CalibrationVector needs exactly 4 components");
  }
  CalibrationVector theta;
  for (std::size_t i = 0; i < kNumParameters; ++i) theta.values[i] = v(static_cast<Eigen::Index>(i));
  return theta;
}

PriorBounds default_prior_bounds() {
  PriorBounds b;
  b.fill(Interval{0.0, 5.0});
  return b;
}

bool within_bounds(const CalibrationVector& theta, const PriorBounds& bounds) {
  for (std::size_t i = 0; i < kNumParameters; ++i) {
    if (!std::isfinite(theta[i]) || !bounds[i].contains(theta[i])) return false;
  }
  return true;
}

TimeGrid::TimeGrid(double t_start, double t_end, std::size_t n_points)
    : t_start_(t_start), t_end_(t_end), n_points_(n_points) {
  if (!(std::isfinite(t_start) && std::isfinite(t_end)) || !(t_start < t_end)) {
    throw ArgumentError("TimeGrid requires finite t_start < t_end");
  }
  if (n_points < 2) throw ArgumentError("TimeGrid requires at least 2 points");
}

TimeGrid TimeGrid::default_grid() { return {0.0, 500.0, 1000}; }

double TimeGrid::time(std::size_t i) const {
  if (i + 1 == n_points_) return t_end_;
  return t_start_ + spacing() * static_cast<double>(i);
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(n_points_);
  for (std::size_t i = 0; i < n_points_; ++i) t[i] = time(i);
  return t;
}

TransientCurve::TransientCurve(TimeGrid g, std::vector<double> v)
    : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) {
    throw ArgumentError("TransientCurve: value count does not match the grid");
  }
  for (double x : values) {
    if (!std::isfinite(x)) throw ArgumentError("TransientCurve: non-finite value");
  }
}

double TransientCurve::at(double t) const {
  return numeric::interp_uniform(grid.t_start(), grid.spacing(), values, t);
}

namespace {

using C = SimulatorConstants;

double squeeze_quench_time(double raw) {
  if (raw <= C::quench_knee) return raw;
  const double room = C::quench_cap - C::quench_knee;
  return C::quench_knee + room * (1.0 - std::exp(-(raw - C::quench_knee) / room));
}

double logistic_drop(double t, double centre) {
  return 1.0 / (1.0 + std::exp((t - centre) / C::quench_width));
}

}  // namespace

PctFeatures pct_features(const CalibrationVector& theta) {
  PctFeatures f{};
  f.peak_temperature = C::nominal_peak_temperature + 150.0 * (theta.p1011() - 1.0) -
                       50.0 * (theta.p1009() - 1.0);
  f.peak_time = C::nominal_peak_time * (1.0 + 0.3 * (theta.p1031() - 1.0));
  const double raw_quench =
      C::nominal_quench_time * (1.0 + 0.4 * (theta.p1010() - 1.0) + 0.2 * (theta.p1031() - 1.0));
  // The lower clamp cannot bind inside [0, 5]^4 (the gap is at least 58 s).
  f.quench_time = std::max(squeeze_quench_time(raw_quench), f.peak_time + C::min_peak_to_quench);
  f.cooling_rate = C::nominal_cooling_rate * (1.0 + 0.5 * (theta.p1009() - 1.0));
  return f;
}

TransientCurve simulate_pct(const CalibrationVector& theta, const TimeGrid& grid) {
  if (!within_bounds(theta, default_prior_bounds())) {
    std::ostringstream os;
    os << "simulate_pct: theta outside prior support [0,5]^4: (" << theta[0] << ", " << theta[1]
       << ", " << theta[2] << ", " << theta[3] << ")";
    throw DomainError(os.str());
  }
  const PctFeatures f = pct_features(theta);
  const double ramp_norm = 1.0 - std::exp(-C::ramp_rate);
  const double drop_at_peak = logistic_drop(f.peak_time, f.quench_time);

  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid.time(i);
    double v;
    if (t <= f.peak_time) {
      const double shape = (1.0 - std::exp(-C::ramp_rate * t / f.peak_time)) / ramp_norm;
      v = C::initial_temperature + (f.peak_temperature - C::initial_temperature) * shape;
    } else {
      const double cooled = f.peak_temperature - f.cooling_rate * (t - f.peak_time);
      v = C::saturation_temperature + (cooled - C::saturation_temperature) *
                                          logistic_drop(t, f.quench_time) / drop_at_peak;
    }
    values[i] = v;
  }
  // The sample nearest the peak time carries the peak value.
  if (f.peak_time >= grid.t_start() && f.peak_time <= grid.t_end()) {
    const auto k = static_cast<std::size_t>(std::lround((f.peak_time - grid.t_start()) / grid.spacing()));
    values[std::min(k, grid.size() - 1)] = f.peak_temperature;
  }
  return {grid, std::move(values)};
}

std::vector<CalibrationVector> lhs_sample(std::size_t n, const PriorBounds& bounds,
                                          std::uint64_t seed) {
  if (n == 0) throw ArgumentError("lhs_sample: n must be >= 1");
  for (const auto& b : bounds) {
    if (!(b.lower < b.upper)) throw ArgumentError("lhs_sample: degenerate bounds");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<CalibrationVector> design(n);
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < kNumParameters; ++d) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const double width = bounds[d].width() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = unit(rng);
      double x = bounds[d].lower + (static_cast<double>(perm[i]) + u) * width;
      // Keep the point inside its stratum despite rounding at the top edge.
      const double stratum_top = bounds[d].lower + static_cast<double>(perm[i] + 1) * width;
      x = std::min(x, std::nextafter(stratum_top, bounds[d].lower));
      design[i].values[d] = x;
    }
  }
  return design;
}

ExperimentalCurve synth_experiment(const CalibrationVector& theta_true, const TimeGrid& grid,
                                   double noise_std, std::uint64_t seed,
                                   std::string position_label) {
  if (!(noise_std >= 0.0)) throw ArgumentError("synth_experiment: noise_std must be >= 0");
  TransientCurve truth = simulate_pct(theta_true, grid);
  if (noise_std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_std);
    for (double& v : truth.values) v += noise(rng);
  }
  return {std::move(truth), noise_std, std::move(position_label)};
}

double argmax_time(const TransientCurve& curve) {
  const auto it = std::max_element(curve.values.begin(), curve.values.end());
  return curve.grid.time(static_cast<std::size_t>(it - curve.values.begin()));
}

double steepest_descent_time(const TransientCurve& curve) {
  const std::size_t n = curve.size();
  if (n < 3) throw ArgumentError("steepest_descent_time needs at least 3 points");
  std::size_t best = 1;
  double best_slope = curve.values[2] - curve.values[0];
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double slope = curve.values[i + 1] - curve.values[i - 1];
    if (slope < best_slope) {
      best_slope = slope;
      best = i;
    }
  }
  return curve.grid.time(best);
}

}  // namespace iuq
