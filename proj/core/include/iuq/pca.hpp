#pragma once

// Principal component analysis of curve ensembles (columns are samples) and
// the functional variant: separate PCA on warped curves and on warps.

#include <optional>
#include <variant>

#include <Eigen/Dense>

#include "iuq/fda_align.hpp"

namespace iuq {

/// p x N, rows are outputs (time points), columns are samples.
using DataMatrix = Eigen::MatrixXd;
using PcScores = Eigen::VectorXd;

struct VarianceTarget {
  double fraction;
};
struct ComponentCount {
  std::size_t k;
};
using Truncation = std::variant<VarianceTarget, ComponentCount>;

struct PcaModel {
  Eigen::VectorXd mean;             // u, length p
  Eigen::MatrixXd basis;            // P*, p* x p with orthonormal rows
  Eigen::VectorXd singular_values;  // all min(p, N), descending
  std::size_t n_samples = 0;
  /// Set when an explicit k exceeded the numerical rank and was reduced.
  bool truncated_to_rank = false;

  std::size_t output_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t retained() const { return static_cast<std::size_t>(basis.rows()); }

  /// Fraction of total variance carried by each component (all of them).
  Eigen::VectorXd explained_variance_ratio() const;
  /// Sum of the first k ratios (k clipped to the available count).
  double cumulative_explained(std::size_t k) const;
  double retained_explained() const { return cumulative_explained(retained()); }
  /// Sample variance of each retained score across the training set.
  Eigen::VectorXd score_variances() const;
};

PcaModel fit_pca(const DataMatrix& data, const Truncation& truncation);

PcScores project(const PcaModel& model, const Eigen::VectorXd& sample);
Eigen::VectorXd reconstruct(const PcaModel& model, const PcScores& scores);

/// Sigma* = P* Sigma (P*)^T. Rejects inputs asymmetric beyond 1e-8 (relative).
Eigen::MatrixXd transform_covariance(const PcaModel& model, const Eigen::MatrixXd& sigma_data);

/// Columns are the curve values.
DataMatrix curves_to_matrix(const std::vector<TransientCurve>& curves);
DataMatrix warps_to_matrix(const std::vector<WarpingFunction>& warps);

struct FpcaModel {
  PcaModel amplitude;  // over warped curves
  PcaModel phase;      // over raw gamma samples
  SrsfCurve template_srsf;
  TimeGrid grid;
};

FpcaModel fpca_fit(const AlignedEnsemble& aligned, std::size_t amplitude_k = 2,
                   std::size_t phase_k = 4);

/// Curve from amplitude and phase scores: inverse PCA on both parts, monotone
/// repair of gamma, then warped(gamma^-1(t)).
TransientCurve fpca_reconstruct(const FpcaModel& model, const PcScores& amplitude_scores,
                                const PcScores& phase_scores);

struct FpcaProjection {
  PcScores amplitude;
  PcScores phase;
  TransientCurve warped;
  WarpingFunction gamma;
};

/// Aligns a new curve to the model template, then projects both parts.
FpcaProjection fpca_project(const FpcaModel& model, const TransientCurve& curve,
                            const WarpOptions& options = {}, double smoothing_seconds = 0.0);

/// A fitted reduction of curves to PC scores: conventional PCA on the raw
/// curves, or fPCA with the amplitude scores followed by the phase scores.
class ScoreSpace {
 public:
  ScoreSpace(PcaModel conventional, TimeGrid grid);
  explicit ScoreSpace(FpcaModel functional);

  bool is_functional() const { return std::holds_alternative<FpcaModel>(model_); }
  std::size_t dim() const;
  const TimeGrid& grid() const { return grid_; }
  const PcaModel& conventional() const { return std::get<PcaModel>(model_); }
  const FpcaModel& functional() const { return std::get<FpcaModel>(model_); }

  /// smoothing_seconds only affects the alignment step of the functional path.
  PcScores encode(const TransientCurve& curve, const WarpOptions& options = {},
                  double smoothing_seconds = 0.0) const;
  TransientCurve decode(const PcScores& scores) const;

 private:
  std::variant<PcaModel, FpcaModel> model_;
  TimeGrid grid_;
};

}  // namespace iuq
