#pragma once

// Cheap stand-in for Monte Carlo predictive stds: std as a function of the
// predicted mean, either a least-squares line or a two-cluster lookup.

#include <array>
#include <span>

namespace iuq {

struct ShortcutOptions {
  /// Two-cluster mode is chosen when the 2-means silhouette exceeds this.
  double silhouette_threshold = 0.6;
  double floor = 1e-4;
};

struct StdShortcut {
  enum class Mode { Linear, TwoCluster };
  struct Centroid {
    double prediction = 0.0;
    double std = 0.0;
  };

  Mode mode = Mode::Linear;
  double slope = 0.0;
  double intercept = 0.0;
  std::array<Centroid, 2> centroids{};
  double silhouette = 0.0;
  double floor = 1e-4;

  /// Predicted std for a predicted mean; never below the floor.
  double operator()(double prediction) const;
};

/// Needs at least 10 pairs and non-constant predictions.
StdShortcut fit_std_shortcut(std::span<const double> predictions, std::span<const double> stds,
                             const ShortcutOptions& options = {});

}  // namespace iuq
