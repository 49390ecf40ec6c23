#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace iuq {

struct Interval {
  double lower = 0.0;
  double upper = 1.0;

  double width() const { return upper - lower; }
  bool contains(double x) const { return x >= lower && x <= upper; }
};

namespace numeric {

/// Piecewise-linear interpolation of samples (xs, ys) at x. xs must be
/// non-decreasing; x outside [xs.front(), xs.back()] is clamped.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

/// Same, for samples on the uniform grid x0 + i * dx.
double interp_uniform(double x0, double dx, std::span<const double> ys, double x);

double mean(std::span<const double> xs);
/// Sample variance with the n - 1 denominator.
double variance(std::span<const double> xs);
double stddev(std::span<const double> xs);

/// Empirical quantile, type 7 (linear interpolation between order statistics).
double quantile(std::vector<double> xs, double p);
double quantile_sorted(std::span<const double> sorted, double p);

/// Isotonic (non-decreasing) least-squares projection by pool-adjacent-violators.
std::vector<double> isotonic_projection(std::span<const double> ys);

/// Centred moving average of the given odd width; the window shrinks
/// symmetrically at the ends so the endpoints are left untouched.
std::vector<double> moving_average(std::span<const double> ys, int width);

/// Gaussian kernel smoothing with kernel std expressed in samples; the kernel
/// is renormalised near the boundaries.
std::vector<double> gaussian_smooth(std::span<const double> ys, double sigma_samples);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
};

/// Derivative-free minimisation. Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double initial_step, int max_evaluations,
                             double tolerance = 1e-8);

/// 64-bit FNV-1a; used for provenance hashes in manifests.
std::uint64_t fnv1a64(std::span<const char> bytes);

}  // namespace numeric
}  // namespace iuq
