#include "iuq/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iuq/errors.hpp"

namespace iuq {

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
  const Eigen::VectorXd sq = singular_values.array().square();
  const double total = sq.sum();
  if (total <= 0.0) {
    // Zero-variance data: nothing is left unexplained after the first component.
    Eigen::VectorXd r = Eigen::VectorXd::Zero(sq.size());
    if (r.size() > 0) r(0) = 1.0;
    return r;
  }
  return sq / total;
}

double PcaModel::cumulative_explained(std::size_t k) const {
  const Eigen::VectorXd r = explained_variance_ratio();
  const auto kk = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), r.size());
  return r.head(kk).sum();
}

Eigen::VectorXd PcaModel::score_variances() const {
  const auto k = static_cast<Eigen::Index>(retained());
  return singular_values.head(k).array().square() / static_cast<double>(n_samples - 1);
}

PcaModel fit_pca(const DataMatrix& data, const Truncation& truncation) {
  const auto p = data.rows();
  const auto n = data.cols();
  if (p < 1 || n < 2) throw ArgumentError("fit_pca: need p >= 1 rows and N >= 2 columns");
  if (!data.allFinite()) throw ArgumentError("fit_pca: non-finite entries");

  PcaModel model;
  model.n_samples = static_cast<std::size_t>(n);
  model.mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - model.mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  model.singular_values = svd.singularValues();
  const Eigen::MatrixXd& u = svd.matrixU();
  const auto available = model.singular_values.size();

  const double s0 = available > 0 ? model.singular_values(0) : 0.0;
  const double rank_tol =
      static_cast<double>(std::max(p, n)) * std::numeric_limits<double>::epsilon() * s0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < available; ++i) {
    if (model.singular_values(i) > rank_tol && model.singular_values(i) > 0.0) ++rank;
  }

  Eigen::Index keep = 0;
  if (const auto* target = std::get_if<VarianceTarget>(&truncation)) {
    if (!(target->fraction > 0.0 && target->fraction <= 1.0)) {
      throw ArgumentError("fit_pca: variance target must lie in (0, 1]");
    }
    const Eigen::VectorXd ratio = model.explained_variance_ratio();
    double acc = 0.0;
    keep = available;
    for (Eigen::Index i = 0; i < available; ++i) {
      acc += ratio(i);
      if (acc >= target->fraction - 1e-12) {
        keep = i + 1;
        break;
      }
    }
    keep = std::min(keep, std::max<Eigen::Index>(rank, 1));
  } else {
    const auto k = static_cast<Eigen::Index>(std::get<ComponentCount>(truncation).k);
    if (k < 1 || k > available) {
      throw ArgumentError("fit_pca: component count must lie in [1, min(p, N)]");
    }
    keep = k;
    if (k > std::max<Eigen::Index>(rank, 1)) {
      keep = std::max<Eigen::Index>(rank, 1);
      model.truncated_to_rank = true;
    }
  }

  model.basis = u.leftCols(keep).transpose();
  // Each component's largest-magnitude loading is made positive.
  for (Eigen::Index r = 0; r < keep; ++r) {
    Eigen::Index arg = 0;
    model.basis.row(r).cwiseAbs().maxCoeff(&arg);
    if (model.basis(r, arg) < 0.0) model.basis.row(r) *= -1.0;
  }
  return model;
}

PcScores project(const PcaModel& model, const Eigen::VectorXd& sample) {
  if (sample.size() != model.mean.size()) throw ArgumentError("project: length mismatch");
  return model.basis * (sample - model.mean);
}

Eigen::VectorXd reconstruct(const PcaModel& model, const PcScores& scores) {
  if (scores.size() != model.basis.rows()) throw ArgumentError("reconstruct: score length mismatch");
  return model.basis.transpose() * scores + model.mean;
}

Eigen::MatrixXd transform_covariance(const PcaModel& model, const Eigen::MatrixXd& sigma_data) {
  const auto p = model.mean.size();
  if (sigma_data.rows() != p || sigma_data.cols() != p) {
    throw ArgumentError("transform_covariance: covariance must be p x p");
  }
  const double scale = std::max(sigma_data.cwiseAbs().maxCoeff(), 1e-300);
  if ((sigma_data - sigma_data.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ArgumentError("transform_covariance: covariance is not symmetric");
  }
  const Eigen::MatrixXd out = model.basis * sigma_data * model.basis.transpose();
  return 0.5 * (out + out.transpose());
}

DataMatrix curves_to_matrix(const std::vector<TransientCurve>& curves) {
  if (curves.empty()) throw ArgumentError("curves_to_matrix: no curves");
  const auto p = static_cast<Eigen::Index>(curves.front().size());
  DataMatrix m(p, static_cast<Eigen::Index>(curves.size()));
  for (std::size_t j = 0; j < curves.size(); ++j) {
    if (static_cast<Eigen::Index>(curves[j].size()) != p) {
      throw ArgumentError("curves_to_matrix: curves differ in length");
    }
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(curves[j].values.data(), p);
  }
  return m;
}

DataMatrix warps_to_matrix(const std::vector<WarpingFunction>& warps) {
  if (warps.empty()) throw ArgumentError("warps_to_matrix: no warps");
  const auto p = static_cast<Eigen::Index>(warps.front().gamma.size());
  DataMatrix m(p, static_cast<Eigen::Index>(warps.size()));
  for (std::size_t j = 0; j < warps.size(); ++j) {
    if (static_cast<Eigen::Index>(warps[j].gamma.size()) != p) {
      throw ArgumentError("warps_to_matrix: warps differ in length");
    }
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(warps[j].gamma.data(), p);
  }
  return m;
}

FpcaModel fpca_fit(const AlignedEnsemble& aligned, std::size_t amplitude_k, std::size_t phase_k) {
  if (amplitude_k < 1 || phase_k < 1) throw ArgumentError("fpca_fit: component counts must be >= 1");
  if (aligned.warped_curves.size() != aligned.warpings.size()) {
    throw ArgumentError("fpca_fit: warped curves and warps differ in count");
  }
  return FpcaModel{fit_pca(curves_to_matrix(aligned.warped_curves), ComponentCount{amplitude_k}),
                   fit_pca(warps_to_matrix(aligned.warpings), ComponentCount{phase_k}),
                   aligned.template_srsf, aligned.grid()};
}

TransientCurve fpca_reconstruct(const FpcaModel& model, const PcScores& amplitude_scores,
                                const PcScores& phase_scores) {
  const Eigen::VectorXd warped = reconstruct(model.amplitude, amplitude_scores);
  const Eigen::VectorXd gamma = reconstruct(model.phase, phase_scores);
  TransientCurve warped_curve(model.grid, {warped.data(), warped.data() + warped.size()});
  WarpingFunction warp{model.grid, {gamma.data(), gamma.data() + gamma.size()}};
  return reconstruct_curve(warped_curve, warp);
}

FpcaProjection fpca_project(const FpcaModel& model, const TransientCurve& curve,
                            const WarpOptions& options, double smoothing_seconds) {
  WarpingFunction gamma = align_to_template(curve, model.template_srsf, options, smoothing_seconds);
  TransientCurve warped = warp_curve(curve, gamma);
  const Eigen::Map<const Eigen::VectorXd> wv(warped.values.data(),
                                             static_cast<Eigen::Index>(warped.size()));
  const Eigen::Map<const Eigen::VectorXd> gv(gamma.gamma.data(),
                                             static_cast<Eigen::Index>(gamma.gamma.size()));
  PcScores amp = project(model.amplitude, wv);
  PcScores phase = project(model.phase, gv);
  return {std::move(amp), std::move(phase), std::move(warped), std::move(gamma)};
}

ScoreSpace::ScoreSpace(PcaModel conventional, TimeGrid grid)
    : model_(std::move(conventional)), grid_(grid) {
  if (std::get<PcaModel>(model_).output_dim() != grid_.size()) {
    throw ArgumentError("ScoreSpace: model output size does not match the grid");
  }
}

ScoreSpace::ScoreSpace(FpcaModel functional)
    : model_(std::move(functional)), grid_(std::get<FpcaModel>(model_).grid) {}

std::size_t ScoreSpace::dim() const {
  if (is_functional()) return functional().amplitude.retained() + functional().phase.retained();
  return conventional().retained();
}

PcScores ScoreSpace::encode(const TransientCurve& curve, const WarpOptions& options,
                            double smoothing_seconds) const {
  if (!(curve.grid == grid_)) throw ArgumentError("ScoreSpace::encode: grid mismatch");
  if (!is_functional()) {
    const Eigen::Map<const Eigen::VectorXd> v(curve.values.data(),
                                              static_cast<Eigen::Index>(curve.size()));
    return project(conventional(), v);
  }
  const FpcaProjection p = fpca_project(functional(), curve, options, smoothing_seconds);
  PcScores out(static_cast<Eigen::Index>(dim()));
  out << p.amplitude, p.phase;
  return out;
}

TransientCurve ScoreSpace::decode(const PcScores& scores) const {
  if (scores.size() != static_cast<Eigen::Index>(dim())) throw ArgumentError("ScoreSpace::decode: score length mismatch");
  if (!is_functional()) {
    const Eigen::VectorXd v = reconstruct(conventional(), scores);
    return {grid_, {v.data(), v.data() + v.size()}};
  }
  const auto ka = static_cast<Eigen::Index>(functional().amplitude.retained());
  return fpca_reconstruct(functional(), scores.head(ka), scores.tail(scores.size() - ka));
}

}  // namespace iuq
