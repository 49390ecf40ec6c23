#include "iuq/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "iuq/errors.hpp"

namespace iuq::numeric {

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw ArgumentError("interp_linear: size mismatch or empty input");
  }
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double span = xs[hi] - xs[lo];
  if (span <= 0.0) return ys[hi];
  const double w = (x - xs[lo]) / span;
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

double interp_uniform(double x0, double dx, std::span<const double> ys, double x) {
  const auto n = ys.size();
  const double pos = (x - x0) / dx;
  if (pos <= 0.0) return ys.front();
  if (pos >= static_cast<double>(n - 1)) return ys.back();
  const auto lo = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(lo);
  return ys[lo] + w * (ys[lo + 1] - ys[lo]);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw ArgumentError("mean of empty range");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw ArgumentError("variance needs at least two values");
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of empty range");
  if (p < 0.0 || p > 1.0) throw ArgumentError("quantile level outside [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, p);
}

std::vector<double> isotonic_projection(std::span<const double> ys) {
  // Blocks of pooled values: (sum, count).
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  sums.reserve(ys.size());
  counts.reserve(ys.size());
  for (double y : ys) {
    sums.push_back(y);
    counts.push_back(1);
    while (sums.size() > 1) {
      const std::size_t k = sums.size() - 1;
      if (sums[k - 1] / static_cast<double>(counts[k - 1]) <=
          sums[k] / static_cast<double>(counts[k])) {
        break;
      }
      sums[k - 1] += sums[k];
      counts[k - 1] += counts[k];
      sums.pop_back();
      counts.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(ys.size());
  for (std::size_t b = 0; b < sums.size(); ++b) {
    const double v = sums[b] / static_cast<double>(counts[b]);
    out.insert(out.end(), counts[b], v);
  }
  return out;
}

std::vector<double> moving_average(std::span<const double> ys, int width) {
  if (width < 1 || width % 2 == 0) throw ArgumentError("moving_average width must be odd");
  const int n = static_cast<int>(ys.size());
  const int half = width / 2;
  std::vector<double> out(ys.begin(), ys.end());
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    double acc = 0.0;
    for (int j = i - h; j <= i + h; ++j) acc += ys[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = acc / static_cast<double>(2 * h + 1);
  }
  return out;
}

std::vector<double> gaussian_smooth(std::span<const double> ys, double sigma_samples) {
  if (sigma_samples <= 0.0) return {ys.begin(), ys.end()};
  const int n = static_cast<int>(ys.size());
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_samples));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] =
        std::exp(-0.5 * (k * k) / (sigma_samples * sigma_samples));
  }
  std::vector<double> out(ys.size());
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    double wsum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      const int j = i + k;
      if (j < 0 || j >= n) continue;
      const double w = kernel[static_cast<std::size_t>(k + radius)];
      acc += w * ys[static_cast<std::size_t>(j)];
      wsum += w;
    }
    out[static_cast<std::size_t>(i)] = acc / wsum;
  }
  return out;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double initial_step, int max_evaluations,
                             double tolerance) {
  const auto n = x0.size();
  if (n == 0) throw ArgumentError("nelder_mead: empty starting point");
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> values(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += initial_step;
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  while (evals < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::abs(values[worst] - values[best]) <=
        tolerance * (std::abs(values[best]) + tolerance)) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  return {simplex[best], values[best], evals};
}

std::uint64_t fnv1a64(std::span<const char> bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace iuq::numeric
