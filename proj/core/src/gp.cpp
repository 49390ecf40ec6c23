#include "iuq/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "iuq/errors.hpp"
#include "iuq/numeric.hpp"

namespace iuq {

namespace {

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const GpHyperparameters& h) {
  const auto n = x.rows();
  const Eigen::RowVectorXd inv_l = h.length_scales.cwiseInverse().transpose();
  const Eigen::MatrixXd xs = x.array().rowwise() * inv_l.array();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = h.signal_variance + h.nugget;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = h.signal_variance * std::exp(-0.5 * (xs.row(i) - xs.row(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

struct Normalised {
  Eigen::MatrixXd y;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
};

Normalised normalise(const Eigen::MatrixXd& y) {
  Normalised out{y, y.colwise().mean(), Eigen::RowVectorXd(y.cols())};
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double var = (y.col(c).array() - out.mean(c)).square().sum() / static_cast<double>(y.rows() - 1);
    out.std(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    out.y.col(c) = (y.col(c).array() - out.mean(c)) / out.std(c);
  }
  return out;
}

GpHyperparameters unpack(const Eigen::VectorXd& v, Eigen::Index d, double floor) {
  GpHyperparameters h;
  h.length_scales = v.head(d).array().exp();
  h.signal_variance = std::exp(v(d));
  h.nugget = floor + std::exp(v(d + 1));
  return h;
}

}  // namespace

double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                  const GpHyperparameters& hyper) {
  const Eigen::LLT<Eigen::MatrixXd> llt(kernel_matrix(x, hyper));
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const auto n = static_cast<double>(x.rows());
  const auto m = static_cast<double>(y.cols());
  const double fit = (y.array() * alpha.array()).sum();
  return -0.5 * fit - 0.5 * m * log_det - 0.5 * m * n * std::log(2.0 * std::numbers::pi);
}

GpModel::GpModel(Eigen::MatrixXd inputs, Eigen::MatrixXd targets, GpHyperparameters hyper)
    : x_(std::move(inputs)), y_(std::move(targets)), hyper_(std::move(hyper)) {
  if (x_.rows() != y_.rows() || x_.rows() < 2) throw ArgumentError("GpModel: inconsistent shapes");
  if (hyper_.length_scales.size() != x_.cols()) {
    throw ArgumentError("GpModel: one length scale per input dimension required");
  }
  if (!(hyper_.length_scales.array() > 0.0).all() || !(hyper_.signal_variance > 0.0) ||
      !(hyper_.nugget > 0.0)) {
    throw ArgumentError("GpModel: hyperparameters must be positive");
  }
  const Normalised norm = normalise(y_);
  y_mean_ = norm.mean;
  y_std_ = norm.std;
  chol_.compute(kernel_matrix(x_, hyper_));
  if (chol_.info() != Eigen::Success) {
    throw NumericError("GpModel: kernel matrix is not positive definite after the nugget floor");
  }
  alpha_ = chol_.solve(norm.y);
  lml_ = gp_log_marginal_likelihood(x_, norm.y, hyper_);
}

double GpModel::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  return hyper_.signal_variance *
         std::exp(-0.5 * ((a - b).array() / hyper_.length_scales.array()).square().sum());
}

GpPrediction GpModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != x_.cols()) throw ArgumentError("GpModel::predict: input dimension mismatch");
  Eigen::VectorXd k(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) k(i) = kernel(x, x_.row(i).transpose());
  const Eigen::VectorXd mean_n = alpha_.transpose() * k;
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  const double var_n = std::max(hyper_.signal_variance - v.squaredNorm(), 0.0);
  GpPrediction out;
  out.mean = mean_n.array() * y_std_.transpose().array() + y_mean_.transpose().array();
  out.std = std::sqrt(var_n) * y_std_.transpose();
  return out;
}

GpModel train_gp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GpOptions& options) {
  if (x.rows() != y.rows()) throw ArgumentError("train_gp: X and Y row counts differ");
  if (x.rows() < 10) throw ArgumentError("train_gp: need at least 10 training points");
  if (y.cols() < 1 || x.cols() < 1) throw ArgumentError("train_gp: empty inputs or outputs");
  if (options.restarts < 1) throw ArgumentError("train_gp: restarts must be >= 1");
  if (!x.allFinite() || !y.allFinite()) throw ArgumentError("train_gp: non-finite data");

  const auto d = x.cols();
  const Normalised norm = normalise(y);
  Eigen::VectorXd range(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    range(c) = std::max(x.col(c).maxCoeff() - x.col(c).minCoeff(), 1e-6);
  }

  auto objective = [&](const Eigen::VectorXd& v) {
    // Keep the search inside a sane box so the kernel stays representable.
    if ((v.array().abs() > 25.0).any()) return std::numeric_limits<double>::infinity();
    return -gp_log_marginal_likelihood(x, norm.y, unpack(v, d, options.nugget_floor));
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  numeric::NelderMeadResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd v0(d + 2);
    for (Eigen::Index c = 0; c < d; ++c) {
      v0(c) = std::log(range(c) * (0.1 + 1.9 * unit(rng)));
    }
    v0(d) = std::log(0.5 + 1.5 * unit(rng));
    v0(d + 1) = std::log(1e-6) + unit(rng) * (std::log(1e-2) - std::log(1e-6));
    auto res = numeric::nelder_mead(objective, v0, 0.5, options.max_evaluations, 1e-7);
    if (res.value < best.value) best = std::move(res);
  }
  if (!std::isfinite(best.value)) {
    throw NumericError("train_gp: no restart produced a factorisable kernel");
  }
  return {x, y, unpack(best.x, d, options.nugget_floor)};
}

}  // namespace iuq
