#pragma once

// Common interface over the surrogate families: theta -> PC-score means and
// per-score standard deviations.

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "iuq/bnn.hpp"
#include "iuq/gp.hpp"
#include "iuq/nn.hpp"
#include "iuq/reflood_sim.hpp"
#include "iuq/split.hpp"
#include "iuq/std_shortcut.hpp"

namespace iuq {

enum class SurrogateKind { Gp, Dnn, Bnn };

std::string_view to_string(SurrogateKind kind);
SurrogateKind parse_surrogate_kind(std::string_view name);

struct ScorePrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // zero for deterministic surrogates
};

class ScoreSurrogate {
 public:
  virtual ~ScoreSurrogate() = default;
  virtual ScorePrediction predict(const CalibrationVector& theta) const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual SurrogateKind kind() const = 0;
};

/// One multi-output GP over all scores.
class GpSurrogate final : public ScoreSurrogate {
 public:
  explicit GpSurrogate(GpModel model) : model_(std::move(model)) {}
  ScorePrediction predict(const CalibrationVector& theta) const override;
  std::size_t output_dim() const override { return model_.output_dim(); }
  SurrogateKind kind() const override { return SurrogateKind::Gp; }
  const GpModel& model() const { return model_; }

 private:
  GpModel model_;
};

/// One network per score; no predictive uncertainty.
class DnnSurrogate final : public ScoreSurrogate {
 public:
  explicit DnnSurrogate(std::vector<DnnModel> models);
  ScorePrediction predict(const CalibrationVector& theta) const override;
  std::size_t output_dim() const override { return models_.size(); }
  SurrogateKind kind() const override { return SurrogateKind::Dnn; }
  const std::vector<DnnModel>& models() const { return models_; }

 private:
  std::vector<DnnModel> models_;
};

/// One BNN per score. predict() uses the mean network and the fitted std
/// shortcut; predict_sampled() runs the full Monte Carlo predictive.
class BnnSurrogate final : public ScoreSurrogate {
 public:
  /// Shortcuts work in the standardised units of the matching model.
  BnnSurrogate(std::vector<BnnModel> models, std::vector<StdShortcut> shortcuts);
  ScorePrediction predict(const CalibrationVector& theta) const override;
  ScorePrediction predict_sampled(const CalibrationVector& theta, int n_draws = 200,
                                  std::uint64_t seed = 0) const;
  std::size_t output_dim() const override { return models_.size(); }
  SurrogateKind kind() const override { return SurrogateKind::Bnn; }
  const std::vector<BnnModel>& models() const { return models_; }
  const std::vector<StdShortcut>& shortcuts() const { return shortcuts_; }

 private:
  std::vector<BnnModel> models_;
  std::vector<DnnModel> mean_nets_;
  std::vector<StdShortcut> shortcuts_;
};

/// 1 - SS_res / SS_tot. Throws for constant y_true or fewer than 2 values.
double r_squared(std::span<const double> y_true, std::span<const double> y_pred);

struct SurrogateTrainOptions {
  GpOptions gp;
  NnTrainOptions nn;
  BnnTrainOptions bnn;
  ShortcutOptions shortcut;
  /// Monte Carlo draws per design point when fitting the std shortcut.
  int shortcut_draws = 200;
  std::uint64_t seed = 0;
};

struct TrainedSurrogate {
  std::shared_ptr<const ScoreSurrogate> model;
  std::vector<double> test_r2;    // per score
  std::vector<double> test_rmse;  // per score, score units
};

/// Rows of `inputs` and `scores` are design samples. Networks early-stop on
/// the validation indices; metrics are computed on the test indices.
TrainedSurrogate train_surrogate(SurrogateKind kind, const Eigen::MatrixXd& inputs,
                                 const Eigen::MatrixXd& scores, const TrainTestSplit& split,
                                 const SurrogateTrainOptions& options = {});

Eigen::MatrixXd design_matrix(const std::vector<CalibrationVector>& design);
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows);

}  // namespace iuq
