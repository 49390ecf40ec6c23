#pragma once

// Fully connected regression networks: tanh hidden layers, one linear output.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace iuq {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Affine input/output standardisation stored with a trained network.
struct Standardizer {
  Eigen::VectorXd x_mean;
  Eigen::VectorXd x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Standardizer fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  static Standardizer identity(std::size_t input_dim);
  /// Rows of x become columns of the result.
  Eigen::MatrixXd inputs(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd input(const Eigen::VectorXd& x) const;
};

/// Network in standardised units. Samples are columns.
class Mlp {
 public:
  explicit Mlp(std::vector<DenseLayer> layers);
  /// Glorot-uniform weights, zero biases.
  static Mlp random(const std::vector<int>& widths, std::mt19937_64& rng);

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& z) const;
  double forward_one(const Eigen::VectorXd& z) const;

  /// Back-propagates dL/d(output) (one entry per column of z). Accumulates
  /// parameter gradients into `grads` (same shapes as the layers) and, when
  /// requested, writes dL/dz.
  void backward(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& d_output,
                std::vector<DenseLayer>& grads, Eigen::MatrixXd* d_input = nullptr) const;

  std::vector<DenseLayer> zeros_like() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::vector<int> widths() const;
  std::size_t parameter_count() const;

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& params);
  static Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers);

 private:
  std::vector<DenseLayer> layers_;
};

/// Adam on a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, b1_, b2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct TrainingRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct NnTrainOptions {
  std::vector<int> hidden{10, 20, 10};
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 5000;
  /// Epochs without validation improvement before stopping.
  int patience = 200;
  std::uint64_t seed = 0;
};

class DnnModel {
 public:
  DnnModel(Mlp network, Standardizer standardizer);

  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& x) const;  // rows are samples
  /// d predict / d x.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x) const;

  const Mlp& network() const { return net_; }
  const Standardizer& standardizer() const { return std_; }
  std::vector<int> widths() const { return net_.widths(); }

  std::vector<TrainingRecord> history;
  int best_epoch = 0;

 private:
  Mlp net_;
  Standardizer std_;
};

/// Mean-squared-error training with mini-batch Adam and early stopping on the
/// validation loss; the best validation weights are kept. Rows are samples.
DnnModel train_dnn(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                   const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val,
                   const NnTrainOptions& options = {});

}  // namespace iuq
