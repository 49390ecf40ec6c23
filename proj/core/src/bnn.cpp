#include "iuq/bnn.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "iuq/errors.hpp"

namespace iuq {

BnnModel::BnnModel(std::vector<VariationalLayer> layers, Standardizer standardizer,
                   double log_noise_std, double prior_std)
    : layers_(std::move(layers)), std_(std::move(standardizer)), log_noise_std_(log_noise_std),
      prior_std_(prior_std) {
  if (layers_.empty()) throw ArgumentError("BnnModel: no layers");
  for (const auto& L : layers_) {
    if (L.weight_mean.rows() != L.weight_log_std.rows() ||
        L.weight_mean.cols() != L.weight_log_std.cols() || L.bias.size() != L.weight_mean.rows()) {
      throw ArgumentError("BnnModel: inconsistent layer shapes");
    }
    if (!L.weight_log_std.allFinite()) throw ArgumentError("BnnModel: non-finite log-std");
  }
  if (!(prior_std > 0.0)) throw ArgumentError("BnnModel: prior std must be positive");
  // Shape chaining is validated by the Mlp constructor.
  (void)mean_network();
}

Mlp BnnModel::mean_network() const {
  std::vector<DenseLayer> out;
  for (const auto& L : layers_) out.push_back({L.weight_mean, L.bias});
  return Mlp(std::move(out));
}

Mlp BnnModel::sample_network(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<DenseLayer> out;
  for (const auto& L : layers_) {
    DenseLayer d{L.weight_mean, L.bias};
    for (Eigen::Index i = 0; i < d.weight.size(); ++i) {
      d.weight.data()[i] += std::exp(L.weight_log_std.data()[i]) * normal(rng);
    }
    out.push_back(std::move(d));
  }
  return Mlp(std::move(out));
}

DnnModel BnnModel::as_dnn() const { return {mean_network(), std_}; }

double BnnModel::mean_prediction(const Eigen::VectorXd& x) const { return as_dnn().predict(x); }

std::vector<BnnPrediction> BnnModel::predict_batch(const Eigen::MatrixXd& x, int n_draws,
                                                   std::uint64_t seed) const {
  if (n_draws < 2) throw ArgumentError("BnnModel::predict: n_draws must be >= 2");
  if (x.cols() != std_.x_mean.size()) throw ArgumentError("BnnModel::predict: input size mismatch");
  const Eigen::MatrixXd z = std_.inputs(x);
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd draws(n_draws, x.rows());
  for (int k = 0; k < n_draws; ++k) draws.row(k) = sample_network(rng).forward(z);
  std::vector<BnnPrediction> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    // Shifted by the first draw so identical draws give exactly zero spread.
    const Eigen::ArrayXd d = draws.col(c).array() - draws(0, c);
    const double dm = d.mean();
    const double m = draws(0, c) + dm;
    const double var = (d - dm).square().sum() / static_cast<double>(n_draws - 1);
    out[static_cast<std::size_t>(c)] = {std_.y_mean + std_.y_scale * m, std_.y_scale * std::sqrt(var)};
  }
  return out;
}

BnnPrediction BnnModel::predict(const Eigen::VectorXd& x, int n_draws, std::uint64_t seed) const {
  return predict_batch(x.transpose(), n_draws, seed).front();
}

double BnnModel::kl_divergence() const {
  const double log_p = std::log(prior_std_);
  const double var_p = prior_std_ * prior_std_;
  double kl = 0.0;
  for (const auto& L : layers_) {
    kl += (log_p - L.weight_log_std.array() +
           ((2.0 * L.weight_log_std.array()).exp() + L.weight_mean.array().square()) / (2.0 * var_p) -
           0.5)
              .sum();
  }
  return kl;
}

namespace {

// Flat layout: per layer [mean, log_std, bias], then the log noise std.
Eigen::VectorXd pack(const std::vector<VariationalLayer>& layers, double log_noise) {
  Eigen::Index n = 1;
  for (const auto& L : layers) n += 2 * L.weight_mean.size() + L.bias.size();
  Eigen::VectorXd v(n);
  Eigen::Index at = 0;
  for (const auto& L : layers) {
    v.segment(at, L.weight_mean.size()) = L.weight_mean.reshaped();
    at += L.weight_mean.size();
    v.segment(at, L.weight_log_std.size()) = L.weight_log_std.reshaped();
    at += L.weight_log_std.size();
    v.segment(at, L.bias.size()) = L.bias;
    at += L.bias.size();
  }
  v(at) = log_noise;
  return v;
}

double unpack(const Eigen::VectorXd& v, std::vector<VariationalLayer>& layers) {
  Eigen::Index at = 0;
  for (auto& L : layers) {
    L.weight_mean.reshaped() = v.segment(at, L.weight_mean.size());
    at += L.weight_mean.size();
    L.weight_log_std.reshaped() = v.segment(at, L.weight_log_std.size());
    at += L.weight_log_std.size();
    L.bias = v.segment(at, L.bias.size());
    at += L.bias.size();
  }
  return v(at);
}

}  // namespace

BnnModel train_bnn(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                   const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val,
                   const BnnTrainOptions& options) {
  const NnTrainOptions& base = options.base;
  if (x_train.rows() != y_train.size() || x_val.rows() != y_val.size() ||
      x_train.cols() != x_val.cols() || x_train.rows() < 2 || x_val.rows() < 1) {
    throw ArgumentError("train_bnn: inconsistent shapes");
  }
  if (!x_train.allFinite() || !y_train.allFinite() || !x_val.allFinite() || !y_val.allFinite()) {
    throw ArgumentError("train_bnn: non-finite data");
  }
  if (base.batch_size < 1 || base.max_epochs < 1 || base.patience < 1) {
    throw ArgumentError("train_bnn: batch size, epochs and patience must be positive");
  }
  const Standardizer st = Standardizer::fit(x_train, y_train);
  const Eigen::MatrixXd zt = st.inputs(x_train);
  const Eigen::RowVectorXd yt = ((y_train.array() - st.y_mean) / st.y_scale).transpose();
  const Eigen::MatrixXd zv = st.inputs(x_val);
  const Eigen::RowVectorXd yv = ((y_val.array() - st.y_mean) / st.y_scale).transpose();

  std::vector<int> widths{static_cast<int>(x_train.cols())};
  widths.insert(widths.end(), base.hidden.begin(), base.hidden.end());
  widths.push_back(1);
  std::mt19937_64 rng(base.seed);
  const Mlp init = Mlp::random(widths, rng);
  std::vector<VariationalLayer> layers;
  for (const auto& L : init.layers()) {
    layers.push_back({L.weight,
                      Eigen::MatrixXd::Constant(L.weight.rows(), L.weight.cols(), options.initial_log_std),
                      L.bias});
  }
  Eigen::VectorXd params = pack(layers, options.initial_log_noise_std);
  Adam adam(static_cast<std::size_t>(params.size()), base.learning_rate);

  const auto n = static_cast<std::size_t>(zt.cols());
  const double n_d = static_cast<double>(n);
  const double var_p = options.prior_std * options.prior_std;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Eigen::VectorXd best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<TrainingRecord> history;
  std::vector<double> elbo_history;

  // Fixed weight noise for the per-epoch ELBO, so its trend is not masked by
  // fresh Monte Carlo draws.
  constexpr int kMonitorDraws = 8;
  std::vector<std::vector<Eigen::MatrixXd>> monitor_eps(kMonitorDraws);
  for (auto& draw : monitor_eps) {
    for (const auto& L : layers) {
      Eigen::MatrixXd e(L.weight_mean.rows(), L.weight_mean.cols());
      for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
      draw.push_back(std::move(e));
    }
  }
  const auto full_elbo = [&](double log_noise) {
    const double noise_var = std::exp(2.0 * log_noise);
    double nll = 0.0;
    for (const auto& draw : monitor_eps) {
      std::vector<DenseLayer> sampled;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        sampled.push_back({L.weight_mean + (L.weight_log_std.array().exp() * draw[l].array()).matrix(), L.bias});
      }
      const Eigen::RowVectorXd r = Mlp(std::move(sampled)).forward(zt) - yt;
      nll += (0.5 * r.array().square() / noise_var).sum() + n_d * (log_noise + half_log_2pi);
    }
    double kl = 0.0;
    for (const auto& L : layers) {
      kl += (std::log(options.prior_std) - L.weight_log_std.array() +
             ((2.0 * L.weight_log_std.array()).exp() + L.weight_mean.array().square()) / (2.0 * var_p) - 0.5)
                .sum();
    }
    return -(nll / kMonitorDraws + kl);
  };

  for (int epoch = 1; epoch <= base.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double mse_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(base.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(base.batch_size));
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd zb(zt.rows(), b);
      Eigen::RowVectorXd yb(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        zb.col(k) = zt.col(order[start + static_cast<std::size_t>(k)]);
        yb(k) = yt(order[start + static_cast<std::size_t>(k)]);
      }
      const double log_noise = unpack(params, layers);
      const double noise_var = std::exp(2.0 * log_noise);

      // Reparameterised weight draw.
      std::vector<Eigen::MatrixXd> eps;
      std::vector<DenseLayer> sampled;
      for (const auto& L : layers) {
        Eigen::MatrixXd e(L.weight_mean.rows(), L.weight_mean.cols());
        for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
        sampled.push_back({L.weight_mean + (L.weight_log_std.array().exp() * e.array()).matrix(), L.bias});
        eps.push_back(std::move(e));
      }
      const Mlp net(std::move(sampled));
      const Eigen::RowVectorXd resid = net.forward(zb) - yb;
      const double bd = static_cast<double>(b);
      const double nll = (0.5 * resid.array().square() / noise_var).sum() / bd + log_noise + half_log_2pi;

      auto grads = net.zeros_like();
      net.backward(zb, resid / (noise_var * bd), grads);

      Eigen::VectorXd g(params.size());
      Eigen::Index at = 0;
      double kl = 0.0;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const Eigen::ArrayXXd s = L.weight_log_std.array().exp();
        const auto sz = L.weight_mean.size();
        g.segment(at, sz) = (grads[l].weight.array() + L.weight_mean.array() / (var_p * n_d)).reshaped();
        at += sz;
        g.segment(at, sz) =
            (grads[l].weight.array() * eps[l].array() * s + (s.square() / var_p - 1.0) / n_d).reshaped();
        at += sz;
        g.segment(at, L.bias.size()) = grads[l].bias;
        at += L.bias.size();
        kl += (std::log(options.prior_std) - L.weight_log_std.array() +
               (s.square() + L.weight_mean.array().square()) / (2.0 * var_p) - 0.5)
                  .sum();
      }
      g(at) = 1.0 - (resid.array().square() / noise_var).sum() / bd;

      const double loss = nll + kl / n_d;
      if (!std::isfinite(loss) || !g.allFinite()) {
        throw TrainingError("train_bnn: ELBO diverged", epoch, loss);
      }
      mse_sum += resid.squaredNorm();
      adam.step(params, g);
    }
    unpack(params, layers);
    Mlp mean_net = [&] {
      std::vector<DenseLayer> d;
      for (const auto& L : layers) d.push_back({L.weight_mean, L.bias});
      return Mlp(std::move(d));
    }();
    // Validation score: Gaussian NLL of the mean network under the learned
    // noise, so stopping also waits for the noise scale to settle.
    const double log_noise = params(params.size() - 1);
    const double val_mse = (mean_net.forward(zv) - yv).squaredNorm() / static_cast<double>(zv.cols());
    const double val_loss = 0.5 * val_mse * std::exp(-2.0 * log_noise) + log_noise + half_log_2pi;
    if (!std::isfinite(val_loss)) throw TrainingError("train_bnn: validation loss diverged", epoch, val_loss);
    history.push_back({epoch, mse_sum / n_d, val_mse});
    elbo_history.push_back(full_elbo(log_noise));
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
    } else if (epoch - best_epoch >= base.patience) {
      break;
    }
  }
  const double log_noise = unpack(best_params, layers);
  BnnModel model(std::move(layers), st, log_noise, options.prior_std);
  model.history = std::move(history);
  model.elbo_history = std::move(elbo_history);
  model.best_epoch = best_epoch;
  return model;
}

}  // namespace iuq
