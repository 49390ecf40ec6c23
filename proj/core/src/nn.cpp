#include "iuq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "iuq/errors.hpp"

namespace iuq {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() < 2 || x.rows() != y.size()) throw ArgumentError("Standardizer: bad shapes");
  Standardizer s;
  s.x_mean = x.colwise().mean().transpose();
  s.x_scale.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.x_mean(c)).square().sum() / static_cast<double>(x.rows() - 1);
    s.x_scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  s.y_mean = y.mean();
  const double var = (y.array() - s.y_mean).square().sum() / static_cast<double>(y.size() - 1);
  s.y_scale = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

Standardizer Standardizer::identity(std::size_t input_dim) {
  const auto d = static_cast<Eigen::Index>(input_dim);
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d), 0.0, 1.0};
}

Eigen::MatrixXd Standardizer::inputs(const Eigen::MatrixXd& x) const {
  return ((x.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array())
      .transpose();
}

Eigen::VectorXd Standardizer::input(const Eigen::VectorXd& x) const {
  return (x - x_mean).cwiseQuotient(x_scale);
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ArgumentError("Mlp: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.bias.size() != L.weight.rows()) throw ArgumentError("Mlp: bias/weight shape mismatch");
    if (l > 0 && L.weight.cols() != layers_[l - 1].weight.rows()) {
      throw ArgumentError("Mlp: layer shapes do not chain");
    }
  }
  if (layers_.back().weight.rows() != 1) throw ArgumentError("Mlp: output layer must have one unit");
}

Mlp Mlp::random(const std::vector<int>& widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw ArgumentError("Mlp::random: need input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    if (in < 1 || out < 1) throw ArgumentError("Mlp::random: widths must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer L{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index i = 0; i < L.weight.size(); ++i) L.weight.data()[i] = u(rng);
    layers.push_back(std::move(L));
  }
  return Mlp(std::move(layers));
}

Eigen::RowVectorXd Mlp::forward(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd a = z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd pre = (layers_[l].weight * a).colwise() + layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(pre.array().tanh()) : pre;
  }
  return a.row(0);
}

double Mlp::forward_one(const Eigen::VectorXd& z) const {
  Eigen::VectorXd a = z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd pre = layers_[l].weight * a + layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::VectorXd(pre.array().tanh()) : pre;
  }
  return a(0);
}

void Mlp::backward(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& d_output,
                   std::vector<DenseLayer>& grads, Eigen::MatrixXd* d_input) const {
  const std::size_t n_layers = layers_.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input to layer l
  acts.reserve(n_layers + 1);
  acts.push_back(z);
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    acts.push_back(((layers_[l].weight * acts.back()).colwise() + layers_[l].bias).array().tanh());
  }
  Eigen::MatrixXd delta = d_output;  // dL/d(pre-activation) of the current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    grads[l].weight.noalias() += delta * acts[l].transpose();
    grads[l].bias += delta.rowwise().sum();
    if (l == 0 && d_input == nullptr) break;
    Eigen::MatrixXd back = layers_[l].weight.transpose() * delta;
    if (l == 0) {
      *d_input = std::move(back);
      break;
    }
    delta = back.array() * (1.0 - acts[l].array().square());
  }
}

std::vector<DenseLayer> Mlp::zeros_like() const {
  std::vector<DenseLayer> out;
  for (const auto& L : layers_) {
    out.push_back({Eigen::MatrixXd::Zero(L.weight.rows(), L.weight.cols()),
                   Eigen::VectorXd::Zero(L.bias.size())});
  }
  return out;
}

std::vector<int> Mlp::widths() const {
  std::vector<int> w{static_cast<int>(layers_.front().weight.cols())};
  for (const auto& L : layers_) w.push_back(static_cast<int>(L.weight.rows()));
  return w;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& L : layers_) n += static_cast<std::size_t>(L.weight.size() + L.bias.size());
  return n;
}

Eigen::VectorXd Mlp::flatten(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& L : layers) n += L.weight.size() + L.bias.size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const auto& L : layers) {
    out.segment(at, L.weight.size()) = L.weight.reshaped();
    at += L.weight.size();
    out.segment(at, L.bias.size()) = L.bias;
    at += L.bias.size();
  }
  return out;
}

Eigen::VectorXd Mlp::flatten() const { return flatten(layers_); }

void Mlp::unflatten(const Eigen::VectorXd& params) {
  if (params.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw ArgumentError("Mlp::unflatten: parameter count mismatch");
  }
  Eigen::Index at = 0;
  for (auto& L : layers_) {
    L.weight.reshaped() = params.segment(at, L.weight.size());
    at += L.weight.size();
    L.bias = params.segment(at, L.bias.size());
    at += L.bias.size();
  }
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

DnnModel::DnnModel(Mlp network, Standardizer standardizer)
    : net_(std::move(network)), std_(std::move(standardizer)) {
  if (std_.x_mean.size() != net_.layers().front().weight.cols()) {
    throw ArgumentError("DnnModel: standardizer does not match the input width");
  }
}

double DnnModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != std_.x_mean.size()) throw ArgumentError("DnnModel::predict: input size mismatch");
  return std_.y_mean + std_.y_scale * net_.forward_one(std_.input(x));
}

Eigen::VectorXd DnnModel::predict_batch(const Eigen::MatrixXd& x) const {
  if (x.cols() != std_.x_mean.size()) throw ArgumentError("DnnModel::predict_batch: input size mismatch");
  return (std_.y_mean + std_.y_scale * net_.forward(std_.inputs(x)).array()).transpose();
}

Eigen::VectorXd DnnModel::input_gradient(const Eigen::VectorXd& x) const {
  auto grads = net_.zeros_like();
  Eigen::MatrixXd dz;
  const Eigen::MatrixXd z = std_.input(x);
  net_.backward(z, Eigen::RowVectorXd::Ones(1), grads, &dz);
  return std_.y_scale * dz.col(0).cwiseQuotient(std_.x_scale);
}

namespace {

void check_training_shapes(const Eigen::MatrixXd& xt, const Eigen::VectorXd& yt,
                           const Eigen::MatrixXd& xv, const Eigen::VectorXd& yv) {
  if (xt.rows() != yt.size() || xv.rows() != yv.size()) {
    throw ArgumentError("training: X and y sample counts differ");
  }
  if (xt.rows() < 2 || xv.rows() < 1) throw ArgumentError("training: too few samples");
  if (xt.cols() != xv.cols()) throw ArgumentError("training: train/validation widths differ");
  if (!xt.allFinite() || !yt.allFinite() || !xv.allFinite() || !yv.allFinite()) {
    throw ArgumentError("training: non-finite data");
  }
}

}  // namespace

DnnModel train_dnn(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                   const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val,
                   const NnTrainOptions& options) {
  check_training_shapes(x_train, y_train, x_val, y_val);
  if (options.batch_size < 1 || options.max_epochs < 1 || options.patience < 1) {
    throw ArgumentError("train_dnn: batch size, epochs and patience must be positive");
  }
  const Standardizer st = Standardizer::fit(x_train, y_train);
  const Eigen::MatrixXd zt = st.inputs(x_train);
  const Eigen::RowVectorXd yt = ((y_train.array() - st.y_mean) / st.y_scale).transpose();
  const Eigen::MatrixXd zv = st.inputs(x_val);
  const Eigen::RowVectorXd yv = ((y_val.array() - st.y_mean) / st.y_scale).transpose();

  std::vector<int> widths{static_cast<int>(x_train.cols())};
  widths.insert(widths.end(), options.hidden.begin(), options.hidden.end());
  widths.push_back(1);
  std::mt19937_64 rng(options.seed);
  Mlp net = Mlp::random(widths, rng);
  Eigen::VectorXd params = net.flatten();
  Adam adam(static_cast<std::size_t>(params.size()), options.learning_rate);

  const auto n = static_cast<std::size_t>(zt.cols());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<TrainingRecord> history;

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(options.batch_size));
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd zb(zt.rows(), b);
      Eigen::RowVectorXd yb(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        zb.col(k) = zt.col(order[start + static_cast<std::size_t>(k)]);
        yb(k) = yt(order[start + static_cast<std::size_t>(k)]);
      }
      const Eigen::RowVectorXd resid = net.forward(zb) - yb;
      epoch_loss += resid.squaredNorm();
      auto grads = net.zeros_like();
      net.backward(zb, resid * (2.0 / static_cast<double>(b)), grads);
      adam.step(params, Mlp::flatten(grads));
      net.unflatten(params);
    }
    epoch_loss /= static_cast<double>(n);
    const double val_loss = (net.forward(zv) - yv).squaredNorm() / static_cast<double>(zv.cols());
    if (!std::isfinite(epoch_loss) || !std::isfinite(val_loss)) {
      throw TrainingError("train_dnn: loss diverged", epoch, epoch_loss);
    }
    history.push_back({epoch, epoch_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
    } else if (epoch - best_epoch >= options.patience) {
      break;
    }
  }
  net.unflatten(best_params);
  DnnModel model(std::move(net), st);
  model.history = std::move(history);
  model.best_epoch = best_epoch;
  return model;
}

}  // namespace iuq
