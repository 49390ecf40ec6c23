#include "iuq/surrogate.hpp"

#include <cmath>

#include "iuq/errors.hpp"
#include "iuq/numeric.hpp"

namespace iuq {

std::string_view to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::Gp:
      return "gp";
    case SurrogateKind::Dnn:
      return "dnn";
    case SurrogateKind::Bnn:
      return "bnn";
  }
  return "unknown";
}

SurrogateKind parse_surrogate_kind(std::string_view name) {
  if (name == "gp") return SurrogateKind::Gp;
  if (name == "dnn") return SurrogateKind::Dnn;
  if (name == "bnn") return SurrogateKind::Bnn;
  throw ArgumentError("unknown surrogate kind: " + std::string(name));
}

ScorePrediction GpSurrogate::predict(const CalibrationVector& theta) const {
  GpPrediction p = model_.predict(theta.to_eigen());
  return {std::move(p.mean), std::move(p.std)};
}

DnnSurrogate::DnnSurrogate(std::vector<DnnModel> models) : models_(std::move(models)) {
  if (models_.empty()) throw ArgumentError("DnnSurrogate: no models");
}

ScorePrediction DnnSurrogate::predict(const CalibrationVector& theta) const {
  const Eigen::VectorXd x = theta.to_eigen();
  const auto m = static_cast<Eigen::Index>(models_.size());
  ScorePrediction out{Eigen::VectorXd(m), Eigen::VectorXd::Zero(m)};
  for (Eigen::Index k = 0; k < m; ++k) out.mean(k) = models_[static_cast<std::size_t>(k)].predict(x);
  return out;
}

BnnSurrogate::BnnSurrogate(std::vector<BnnModel> models, std::vector<StdShortcut> shortcuts)
    : models_(std::move(models)), shortcuts_(std::move(shortcuts)) {
  if (models_.empty() || models_.size() != shortcuts_.size()) {
    throw ArgumentError("BnnSurrogate: need one shortcut per model");
  }
  for (const auto& m : models_) mean_nets_.push_back(m.as_dnn());
}

ScorePrediction BnnSurrogate::predict(const CalibrationVector& theta) const {
  const Eigen::VectorXd x = theta.to_eigen();
  const auto m = static_cast<Eigen::Index>(models_.size());
  ScorePrediction out{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& net = mean_nets_[static_cast<std::size_t>(k)];
    const Standardizer& st = net.standardizer();
    const double mean = net.predict(x);
    out.mean(k) = mean;
    out.std(k) = st.y_scale * shortcuts_[static_cast<std::size_t>(k)]((mean - st.y_mean) / st.y_scale);
  }
  return out;
}

ScorePrediction BnnSurrogate::predict_sampled(const CalibrationVector& theta, int n_draws,
                                              std::uint64_t seed) const {
  const Eigen::VectorXd x = theta.to_eigen();
  const auto m = static_cast<Eigen::Index>(models_.size());
  ScorePrediction out{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Eigen::Index k = 0; k < m; ++k) {
    const BnnPrediction p = models_[static_cast<std::size_t>(k)].predict(x, n_draws, seed + static_cast<std::uint64_t>(k));
    out.mean(k) = p.mean;
    out.std(k) = p.std;
  }
  return out;
}

double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw ArgumentError("r_squared: length mismatch");
  if (y_true.size() < 2) throw ArgumentError("r_squared: need at least 2 values");
  const double m = numeric::mean(y_true);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - m) * (y_true[i] - m);
  }
  if (!(ss_tot > 0.0)) throw ArgumentError("r_squared: y_true is constant");
  return 1.0 - ss_res / ss_tot;
}

Eigen::MatrixXd design_matrix(const std::vector<CalibrationVector>& design) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(design.size()), static_cast<Eigen::Index>(kNumParameters));
  for (std::size_t i = 0; i < design.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = design[i].to_eigen().transpose();
  }
  return x;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(m.rows())) throw ArgumentError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

TrainedSurrogate train_surrogate(SurrogateKind kind, const Eigen::MatrixXd& inputs,
                                 const Eigen::MatrixXd& scores, const TrainTestSplit& split,
                                 const SurrogateTrainOptions& options) {
  if (inputs.rows() != scores.rows()) throw ArgumentError("train_surrogate: row counts differ");
  if (inputs.cols() != static_cast<Eigen::Index>(kNumParameters)) {
    throw ArgumentError("train_surrogate: inputs must have one column per calibration parameter");
  }
  if (split.test.size() < 2) throw ArgumentError("train_surrogate: need at least 2 test samples");
  const Eigen::MatrixXd xt = select_rows(inputs, split.train);
  const Eigen::MatrixXd yt = select_rows(scores, split.train);
  const Eigen::MatrixXd xv = select_rows(inputs, split.validation);
  const Eigen::MatrixXd yv = select_rows(scores, split.validation);
  const auto m = scores.cols();

  TrainedSurrogate out;
  if (kind == SurrogateKind::Gp) {
    GpOptions gp = options.gp;
    gp.seed = options.seed;
    out.model = std::make_shared<GpSurrogate>(train_gp(xt, yt, gp));
  } else {
    if (split.validation.empty()) throw ArgumentError("train_surrogate: networks need a validation set");
    if (kind == SurrogateKind::Dnn) {
      std::vector<DnnModel> models;
      for (Eigen::Index k = 0; k < m; ++k) {
        NnTrainOptions nn = options.nn;
        nn.seed = options.seed + static_cast<std::uint64_t>(k);
        models.push_back(train_dnn(xt, yt.col(k), xv, yv.col(k), nn));
      }
      out.model = std::make_shared<DnnSurrogate>(std::move(models));
    } else {
      std::vector<BnnModel> models;
      std::vector<StdShortcut> shortcuts;
      for (Eigen::Index k = 0; k < m; ++k) {
        BnnTrainOptions bo = options.bnn;
        bo.base.seed = options.seed + static_cast<std::uint64_t>(k);
        BnnModel bnn = train_bnn(xt, yt.col(k), xv, yv.col(k), bo);
        const auto preds = bnn.predict_batch(inputs, options.shortcut_draws, bo.base.seed);
        const Standardizer& st = bnn.standardizer();
        std::vector<double> pz;
        std::vector<double> sz;
        for (const auto& p : preds) {
          pz.push_back((p.mean - st.y_mean) / st.y_scale);
          sz.push_back(p.std / st.y_scale);
        }
        shortcuts.push_back(fit_std_shortcut(pz, sz, options.shortcut));
        models.push_back(std::move(bnn));
      }
      out.model = std::make_shared<BnnSurrogate>(std::move(models), std::move(shortcuts));
    }
  }

  for (Eigen::Index k = 0; k < m; ++k) {
    std::vector<double> truth;
    std::vector<double> pred;
    for (std::size_t i : split.test) {
      truth.push_back(scores(static_cast<Eigen::Index>(i), k));
      const auto theta = CalibrationVector::from_eigen(inputs.row(static_cast<Eigen::Index>(i)).transpose());
      pred.push_back(out.model->predict(theta).mean(k));
    }
    double se = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) se += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    out.test_rmse.push_back(std::sqrt(se / static_cast<double>(truth.size())));
    out.test_r2.push_back(r_squared(truth, pred));
  }
  return out;
}

}  // namespace iuq
