#pragma once

// Multi-output Gaussian process regression with one anisotropic
// squared-exponential kernel shared by all (z-scored) outputs.

#include <cstdint>

#include <Eigen/Dense>

namespace iuq {

struct GpHyperparameters {
  Eigen::VectorXd length_scales;  // one per input dimension
  double signal_variance = 1.0;   // in normalised output units
  double nugget = 1e-6;           // noise variance, normalised units
};

struct GpOptions {
  int restarts = 8;
  int max_evaluations = 400;  // per restart
  double nugget_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GpPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // latent-function std, de-normalised
};

class GpModel {
 public:
  GpModel(Eigen::MatrixXd inputs, Eigen::MatrixXd targets, GpHyperparameters hyper);

  GpPrediction predict(const Eigen::VectorXd& x) const;

  const GpHyperparameters& hyperparameters() const { return hyper_; }
  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::MatrixXd& targets() const { return y_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(y_.cols()); }
  /// Sum over outputs of the log marginal likelihood of the normalised targets.
  double log_marginal_likelihood() const { return lml_; }

 private:
  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  Eigen::MatrixXd x_;  // N x d
  Eigen::MatrixXd y_;  // N x m, raw
  GpHyperparameters hyper_;
  Eigen::RowVectorXd y_mean_;
  Eigen::RowVectorXd y_std_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::MatrixXd alpha_;  // K^-1 (normalised y)
  double lml_ = 0.0;
};

/// Summed log marginal likelihood for given hyperparameters; -inf when the
/// kernel matrix cannot be factorised.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y_normalised,
                                  const GpHyperparameters& hyper);

/// X is N x d, Y is N x m. Hyperparameters maximise the marginal likelihood
/// (Nelder-Mead on log-parameters from several random starts).
GpModel train_gp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GpOptions& options = {});

}  // namespace iuq
