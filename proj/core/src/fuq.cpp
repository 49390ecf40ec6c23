#include "iuq/fuq.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "iuq/errors.hpp"
#include "iuq/numeric.hpp"

namespace iuq {

double PredictiveBand::mean_width() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) acc += upper[i] - lower[i];
  return lower.empty() ? 0.0 : acc / static_cast<double>(lower.size());
}

PredictiveBand band_from_curves(const std::vector<TransientCurve>& curves, double level,
                                std::string source) {
  if (curves.empty()) throw ArgumentError("band_from_curves: no curves");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("band_from_curves: level must lie in (0, 1)");
  const TimeGrid grid = curves.front().grid;
  const std::size_t p = grid.size();
  PredictiveBand band{grid, std::vector<double>(p), std::vector<double>(p), std::vector<double>(p),
                      level, std::move(source), curves.size(), 0};
  const double lo = 0.5 * (1.0 - level);
  std::vector<double> column(curves.size());
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (!(curves[i].grid == grid)) throw ArgumentError("band_from_curves: grid mismatch");
      column[i] = curves[i].values[k];
    }
    band.mean[k] = numeric::mean(column);
    std::sort(column.begin(), column.end());
    band.lower[k] = numeric::quantile_sorted(column, lo);
    band.upper[k] = numeric::quantile_sorted(column, 1.0 - lo);
  }
  return band;
}

PredictiveBand propagate(const std::vector<CalibrationVector>& samples, const CurveModel& model,
                         const PropagateOptions& options) {
  if (samples.size() < 50) throw ArgumentError("propagate: need at least 50 samples");
  if (!(options.noise_std >= 0.0)) throw ArgumentError("propagate: noise_std must be >= 0");
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<TransientCurve> curves;
  curves.reserve(samples.size());
  std::size_t failures = 0;
  for (const auto& theta : samples) {
    try {
      TransientCurve c = model(theta);
      if (options.noise_std > 0.0) {
        for (double& v : c.values) v += options.noise_std * noise(rng);
      }
      curves.push_back(std::move(c));
    } catch (const Error&) {
      ++failures;
    }
  }
  if (static_cast<double>(failures) > options.max_failure_fraction * static_cast<double>(samples.size())) {
    throw NumericError("propagate: " + std::to_string(failures) + " of " +
                       std::to_string(samples.size()) + " samples failed");
  }
  PredictiveBand band = band_from_curves(curves, options.level, options.source);
  band.failures = failures;
  band.n_samples = curves.size();
  return band;
}

CurveModel full_model_path(const TimeGrid& grid) {
  return [grid](const CalibrationVector& theta) { return simulate_pct(theta, grid); };
}

CurveModel surrogate_path(std::shared_ptr<const ScoreSurrogate> surrogate, ScoreSpace space) {
  if (!surrogate) throw ArgumentError("surrogate_path: no surrogate");
  if (surrogate->output_dim() != space.dim()) {
    throw ArgumentError("surrogate_path: surrogate outputs do not match the score space");
  }
  return [surrogate = std::move(surrogate), space = std::move(space)](const CalibrationVector& theta) {
    return space.decode(surrogate->predict(theta).mean);
  };
}

double coverage(const PredictiveBand& band, const TransientCurve& experiment) {
  if (!(band.grid == experiment.grid)) throw ArgumentError("coverage: grid mismatch");
  std::size_t inside = 0;
  for (std::size_t k = 0; k < experiment.size(); ++k) {
    const double v = experiment.values[k];
    if (band.lower[k] <= v && v <= band.upper[k]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(experiment.size());
}

double coverage(const PredictiveBand& band, const ExperimentalCurve& experiment) {
  return coverage(band, experiment.curve);
}

namespace {

ReconstructionErrors errors_of(const TransientCurve& truth, const std::vector<double>& rec,
                               double t_centre, double window) {
  ReconstructionErrors e;
  double sq = 0.0;
  double wsq = 0.0;
  std::size_t wn = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double d = std::abs(rec[k] - truth.values[k]);
    e.max_abs = std::max(e.max_abs, d);
    sq += d * d;
    if (std::abs(truth.grid.time(k) - t_centre) <= window) {
      e.window_max_abs = std::max(e.window_max_abs, d);
      wsq += d * d;
      ++wn;
    }
  }
  e.rms = std::sqrt(sq / static_cast<double>(truth.size()));
  e.window_rms = wn > 0 ? std::sqrt(wsq / static_cast<double>(wn)) : 0.0;
  return e;
}

}  // namespace

std::vector<ReconstructionRow> reconstruction_comparison(const std::vector<TransientCurve>& ensemble,
                                                         const PcaModel& conventional,
                                                         const FpcaModel& functional,
                                                         std::size_t pc_budget,
                                                         double window_seconds) {
  if (conventional.retained() != pc_budget ||
      functional.amplitude.retained() + functional.phase.retained() != pc_budget) {
    throw ArgumentError("reconstruction_comparison: both models must use the PC budget");
  }
  const ScoreSpace conv(conventional, functional.grid);
  const ScoreSpace fun(functional);
  std::vector<ReconstructionRow> rows;
  rows.reserve(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const TransientCurve& c = ensemble[i];
    ReconstructionRow row;
    row.index = i;
    row.quench_time = steepest_descent_time(c);
    row.conventional = errors_of(c, conv.decode(conv.encode(c)).values, row.quench_time, window_seconds);
    row.functional = errors_of(c, fun.decode(fun.encode(c)).values, row.quench_time, window_seconds);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace iuq
