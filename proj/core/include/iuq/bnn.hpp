#pragma once

// Bayesian neural network with a mean-field Gaussian variational posterior
// over the weights. Biases are deterministic.

#include <cstdint>
#include <vector>

#include "iuq/nn.hpp"

namespace iuq {

struct VariationalLayer {
  Eigen::MatrixXd weight_mean;     // out x in
  Eigen::MatrixXd weight_log_std;  // out x in
  Eigen::VectorXd bias;            // out
};

struct BnnPrediction {
  double mean = 0.0;
  double std = 0.0;
};

struct BnnTrainOptions {
  NnTrainOptions base;
  double prior_std = 1.0;
  double initial_log_std = -5.0;
  double initial_log_noise_std = -1.0;  // standardised units
};

class BnnModel {
 public:
  BnnModel(std::vector<VariationalLayer> layers, Standardizer standardizer, double log_noise_std,
           double prior_std = 1.0);

  /// One forward pass with every weight at its variational mean.
  double mean_prediction(const Eigen::VectorXd& x) const;
  /// Sample mean and sample std of n_draws forward passes with weights drawn
  /// from the variational posterior. Deterministic for a given seed.
  BnnPrediction predict(const Eigen::VectorXd& x, int n_draws = 200, std::uint64_t seed = 0) const;
  /// Predictions for many inputs (rows) sharing the same weight draws.
  std::vector<BnnPrediction> predict_batch(const Eigen::MatrixXd& x, int n_draws = 200,
                                           std::uint64_t seed = 0) const;

  /// KL(q || p) summed over all weights, closed form.
  double kl_divergence() const;

  Mlp mean_network() const;
  Mlp sample_network(std::mt19937_64& rng) const;
  /// The mean network wrapped as a deterministic model.
  DnnModel as_dnn() const;

  const std::vector<VariationalLayer>& layers() const { return layers_; }
  const Standardizer& standardizer() const { return std_; }
  double log_noise_std() const { return log_noise_std_; }
  double prior_std() const { return prior_std_; }

  std::vector<TrainingRecord> history;
  /// ELBO on the full training set per epoch, from a fixed set of weight draws.
  std::vector<double> elbo_history;
  int best_epoch = 0;

 private:
  std::vector<VariationalLayer> layers_;
  Standardizer std_;
  double log_noise_std_;
  double prior_std_;
};

/// Maximises the ELBO: Gaussian log-likelihood with a learned noise std minus
/// KL to an N(0, prior_std^2) prior, one reparameterised draw per step.
/// Early stopping watches the validation NLL of the mean network under the
/// learned noise std.
BnnModel train_bnn(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                   const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val,
                   const BnnTrainOptions& options = {});

}  // namespace iuq
