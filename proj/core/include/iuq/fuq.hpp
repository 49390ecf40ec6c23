#pragma once

// Forward propagation of parameter samples into pointwise predictive bands,
// and validation metrics against experimental curves.

#include <functional>
#include <string>
#include <vector>

#include "iuq/pca.hpp"
#include "iuq/surrogate.hpp"

namespace iuq {

struct PredictiveBand {
  TimeGrid grid;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
  std::string source;  // e.g. "posterior/full-model"
  std::size_t n_samples = 0;  // curves behind the band, failures excluded
  std::size_t failures = 0;

  /// Mean over the grid of upper - lower.
  double mean_width() const;
};

using CurveModel = std::function<TransientCurve(const CalibrationVector&)>;

struct PropagateOptions {
  double level = 0.95;
  /// Std of i.i.d. Gaussian noise added to every propagated curve, so the
  /// band is a predictive band for measurements. 0 gives the model band.
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::string source = "posterior/full-model";
  double max_failure_fraction = 0.05;
};

/// Needs at least 50 samples. Samples whose model evaluation throws are
/// skipped and counted; more than max_failure_fraction of them is an error.
PredictiveBand propagate(const std::vector<CalibrationVector>& samples, const CurveModel& model,
                         const PropagateOptions& options = {});

/// Pointwise mean and central `level` quantile band (type 7) of the curves.
PredictiveBand band_from_curves(const std::vector<TransientCurve>& curves, double level,
                                std::string source);

CurveModel full_model_path(const TimeGrid& grid);
/// Surrogate mean scores decoded through the score space.
CurveModel surrogate_path(std::shared_ptr<const ScoreSurrogate> surrogate, ScoreSpace space);

/// Fraction of grid points with lower <= value <= upper.
double coverage(const PredictiveBand& band, const TransientCurve& experiment);
double coverage(const PredictiveBand& band, const ExperimentalCurve& experiment);

struct ReconstructionErrors {
  double max_abs = 0.0;
  double rms = 0.0;
  double window_max_abs = 0.0;
  double window_rms = 0.0;
};

struct ReconstructionRow {
  std::size_t index = 0;
  double quench_time = 0.0;
  ReconstructionErrors conventional;
  ReconstructionErrors functional;
};

/// Per-sample reconstruction errors of both representations at an equal total
/// PC budget; window errors cover +-window_seconds around each sample's
/// steepest-descent time.
std::vector<ReconstructionRow> reconstruction_comparison(const std::vector<TransientCurve>& ensemble,
                                                         const PcaModel& conventional,
                                                         const FpcaModel& functional,
                                                         std::size_t pc_budget,
                                                         double window_seconds = 10.0);

}  // namespace iuq
