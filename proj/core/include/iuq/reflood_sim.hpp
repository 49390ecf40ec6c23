#pragma once

// Synthetic transient simulator: maps four multiplicative model factors to a
// peak-cladding-temperature style curve (heat-up ramp, peak, slow cooling,
// steep quench, saturation plateau).

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "iuq/numeric.hpp"

namespace iuq {

inline constexpr std::size_t kNumParameters = 4;
inline constexpr std::array<std::string_view, kNumParameters> kParameterNames = {
    "p1009", "p1010", "p1011", "p1031"};

/// The four calibration multipliers, in the fixed order of kParameterNames.
struct CalibrationVector {
  std::array<double, kNumParameters> values{1.0, 1.0, 1.0, 1.0};

  double p1009() const { return values[0]; }
  double p1010() const { return values[1]; }
  double p1011() const { return values[2]; }
  double p1031() const { return values[3]; }

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  Eigen::VectorXd to_eigen() const;
  static CalibrationVector from_eigen(const Eigen::VectorXd& v);

  friend bool operator==(const CalibrationVector&, const CalibrationVector&) = default;
};

using PriorBounds = std::array<Interval, kNumParameters>;

/// Uniform prior support used throughout: [0, 5] for every factor.
PriorBounds default_prior_bounds();

bool within_bounds(const CalibrationVector& theta, const PriorBounds& bounds);

/// Uniform time grid. Construction validates t_start < t_end and n_points >= 2.
class TimeGrid {
 public:
  TimeGrid(double t_start, double t_end, std::size_t n_points);

  /// [0, 500] s with 1000 points.
  static TimeGrid default_grid();

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  std::size_t size() const { return n_points_; }
  double spacing() const { return (t_end_ - t_start_) / static_cast<double>(n_points_ - 1); }
  double time(std::size_t i) const;
  std::vector<double> times() const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double t_start_;
  double t_end_;
  std::size_t n_points_;
};

/// A sampled curve f(t) on a uniform grid. Values must be finite.
struct TransientCurve {
  TimeGrid grid;
  std::vector<double> values;

  TransientCurve(TimeGrid g, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double at(double t) const;
};

struct ExperimentalCurve {
  TransientCurve curve;
  double noise_std = 0.0;
  std::string position_label;
};

/// Parametric features of the simulated curve for a given theta.
struct PctFeatures {
  double peak_temperature;  // K
  double peak_time;         // s
  double quench_time;       // s, logistic centre
  double cooling_rate;      // K/s, post-peak linear cooling slope
};

/// Constants of the parametric form.
struct SimulatorConstants {
  static constexpr double initial_temperature = 450.0;
  static constexpr double saturation_temperature = 400.0;
  static constexpr double nominal_peak_temperature = 1100.0;
  static constexpr double nominal_peak_time = 60.0;
  static constexpr double nominal_quench_time = 250.0;
  static constexpr double quench_width = 3.0;
  static constexpr double nominal_cooling_rate = 0.25;
  static constexpr double ramp_rate = 3.0;
  /// Quench centres above the knee are squeezed smoothly below the cap so the
  /// quench and plateau stay inside the default 500 s window.
  static constexpr double quench_knee = 300.0;
  static constexpr double quench_cap = 460.0;
  static constexpr double min_peak_to_quench = 10.0;
};

PctFeatures pct_features(const CalibrationVector& theta);

/// Deterministic simulator. The grid sample nearest the peak time holds the
/// peak temperature. Throws DomainError outside [0, 5]^4.
TransientCurve simulate_pct(const CalibrationVector& theta, const TimeGrid& grid);

/// Latin hypercube design: each dimension has exactly one point per stratum.
std::vector<CalibrationVector> lhs_sample(std::size_t n, const PriorBounds& bounds,
                                          std::uint64_t seed);

/// simulate_pct plus i.i.d. Gaussian noise of the given std at every grid point.
ExperimentalCurve synth_experiment(const CalibrationVector& theta_true, const TimeGrid& grid,
                                   double noise_std, std::uint64_t seed,
                                   std::string position_label = "synthetic");

/// Time of the largest sample.
double argmax_time(const TransientCurve& curve);
/// Time of the most negative central-difference slope.
double steepest_descent_time(const TransientCurve& curve);

}  // namespace iuq
