#include "iuq/bayes_iuq.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "iuq/errors.hpp"
#include "iuq/numeric.hpp"

namespace iuq {

Eigen::MatrixXd linear_score_covariance(const ScoreSpace& space, double noise_std,
                                        double phase_inflation) {
  if (!(noise_std >= 0.0) || !(phase_inflation >= 0.0)) {
    throw ArgumentError("linear_score_covariance: noise_std and phase_inflation must be >= 0");
  }
  const auto p = static_cast<Eigen::Index>(space.grid().size());
  const Eigen::MatrixXd sigma_data = noise_std * noise_std * Eigen::MatrixXd::Identity(p, p);
  if (!space.is_functional()) return transform_covariance(space.conventional(), sigma_data);
  const FpcaModel& fm = space.functional();
  const auto ka = static_cast<Eigen::Index>(fm.amplitude.retained());
  const auto d = static_cast<Eigen::Index>(space.dim());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  out.topLeftCorner(ka, ka) = transform_covariance(fm.amplitude, sigma_data);
  const Eigen::VectorXd pv = fm.phase.score_variances();
  for (Eigen::Index k = 0; k < pv.size(); ++k) out(ka + k, ka + k) = phase_inflation * pv(k);
  return out;
}

Eigen::MatrixXd sampled_score_covariance(const ScoreSpace& space,
                                         const std::vector<TransientCurve>& references,
                                         double noise_std, std::size_t replicates,
                                         double smoothing_seconds, std::uint64_t seed) {
  if (!space.is_functional()) return linear_score_covariance(space, noise_std, 0.0);
  if (references.empty() || replicates == 0) {
    throw ArgumentError("sampled_score_covariance: need reference curves and replicates");
  }
  if (!(noise_std >= 0.0)) throw ArgumentError("sampled_score_covariance: noise_std must be >= 0");
  const auto d = static_cast<Eigen::Index>(space.dim());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_std);
  const double n = static_cast<double>(references.size() * replicates);
  for (const TransientCurve& ref : references) {
    const PcScores clean = space.encode(ref, {}, smoothing_seconds);
    for (std::size_t r = 0; r < replicates; ++r) {
      TransientCurve noisy = ref;
      for (double& v : noisy.values) v += noise(rng);
      const Eigen::VectorXd diff = space.encode(noisy, {}, smoothing_seconds) - clean;
      out.noalias() += diff * diff.transpose() / n;
    }
  }
  return out;
}

void validate(const LikelihoodSpec& spec) {
  if (!spec.surrogate) throw ArgumentError("LikelihoodSpec: no surrogate");
  const auto m = spec.data_scores.size();
  if (m < 1 || static_cast<std::size_t>(m) != spec.surrogate->output_dim()) {
    throw ArgumentError("LikelihoodSpec: data scores do not match the surrogate outputs");
  }
  if (spec.sigma_exp_pc.rows() != m || spec.sigma_exp_pc.cols() != m) {
    throw ArgumentError("LikelihoodSpec: sigma_exp_pc must be m x m");
  }
  const double scale = std::max(spec.sigma_exp_pc.cwiseAbs().maxCoeff(), 1e-300);
  if ((spec.sigma_exp_pc - spec.sigma_exp_pc.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ArgumentError("LikelihoodSpec: sigma_exp_pc is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spec.sigma_exp_pc);
  if (eig.eigenvalues().minCoeff() < -1e-10 * spec.sigma_exp_pc.trace()) {
    throw ArgumentError("LikelihoodSpec: sigma_exp_pc is not positive semidefinite");
  }
}

double log_posterior(const CalibrationVector& theta, const LikelihoodSpec& spec,
                     const PriorSpec& prior) {
  if (!within_bounds(theta, prior.bounds)) return -std::numeric_limits<double>::infinity();
  const ScorePrediction pred = spec.surrogate->predict(theta);
  if (pred.mean.size() != spec.data_scores.size()) {
    throw ArgumentError("log_posterior: surrogate output size mismatch");
  }
  Eigen::MatrixXd sigma = spec.sigma_exp_pc;
  if (spec.use_code_uncertainty) sigma.diagonal() += pred.std.cwiseAbs2();
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericError("log_posterior: likelihood covariance is not positive definite");
  }
  const Eigen::VectorXd r = spec.data_scores - pred.mean;
  const double quad = llt.matrixL().solve(r).squaredNorm();
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * quad - 0.5 * log_det;
}

std::size_t PosteriorChain::retained_count() const {
  if (samples.size() <= burn_in || thin == 0) return 0;
  return (samples.size() - burn_in) / thin;
}

std::vector<CalibrationVector> PosteriorChain::retained() const {
  std::vector<CalibrationVector> out;
  const std::size_t k = retained_count();
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(samples[burn_in + (i + 1) * thin - 1]);
  return out;
}

PosteriorChain adaptive_mcmc(const LogDensity& log_density, const CalibrationVector& init,
                             const McmcOptions& o) {
  if (o.n_samples == 0 || o.thin == 0) throw ArgumentError("adaptive_mcmc: n_samples and thin must be >= 1");
  if (o.burn_in >= o.n_samples) throw ArgumentError("adaptive_mcmc: burn-in must be shorter than the chain");
  if (!(o.initial_step > 0.0)) throw ArgumentError("adaptive_mcmc: initial_step must be positive");
  double current_lp = log_density(init);
  if (!std::isfinite(current_lp)) {
    throw ArgumentError("adaptive_mcmc: log density at the initial state is not finite");
  }
  constexpr auto d = static_cast<Eigen::Index>(kNumParameters);
  const double scale0 = 2.38 * 2.38 / static_cast<double>(d);

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::VectorXd x = init.to_eigen();
  Eigen::VectorXd mu = x;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * (o.initial_step * o.initial_step);
  const Eigen::MatrixXd initial_cov = cov / scale0;
  double log_lambda = 0.0;
  Eigen::MatrixXd chol = (scale0 * initial_cov).llt().matrixL();

  PosteriorChain chain;
  chain.burn_in = o.burn_in;
  chain.thin = o.thin;
  chain.seed = o.seed;
  chain.samples.reserve(o.n_samples);
  chain.log_post.reserve(o.n_samples);
  chain.accepted.reserve(o.n_samples);
  std::size_t accepted_after = 0;

  for (std::size_t n = 1; n <= o.n_samples; ++n) {
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k) z(k) = normal(rng);
    const Eigen::VectorXd y = x + chol * z;
    const CalibrationVector cand = CalibrationVector::from_eigen(y);
    const double lp = log_density(cand);
    double alpha = 0.0;
    if (std::isfinite(lp)) alpha = std::min(1.0, std::exp(lp - current_lp));
    const bool accept = unit(rng) < alpha;
    if (accept) {
      x = y;
      current_lp = lp;
    }
    chain.samples.push_back(CalibrationVector::from_eigen(x));
    chain.log_post.push_back(current_lp);
    chain.accepted.push_back(accept);
    if (n > o.burn_in && accept) ++accepted_after;

    if (n <= o.burn_in) {
      const double g = std::pow(static_cast<double>(n + 1), -0.6);
      const Eigen::VectorXd dx = x - mu;
      mu += g * dx;
      cov += g * (dx * dx.transpose() - cov);
      if (n == o.adapt_start) log_lambda = 0.0;
      if (n >= o.adapt_start) {
        const double gl = std::pow(static_cast<double>(n - o.adapt_start + 2), -0.6);
        log_lambda += gl * (alpha - o.target_acceptance);
      }
      const Eigen::MatrixXd base =
          n >= o.adapt_start ? Eigen::MatrixXd(cov + o.regularization * Eigen::MatrixXd::Identity(d, d))
                             : initial_cov;
      const Eigen::LLT<Eigen::MatrixXd> llt(std::exp(log_lambda) * scale0 * base);
      if (llt.info() == Eigen::Success) chol = llt.matrixL();
    }
  }
  chain.acceptance_rate =
      static_cast<double>(accepted_after) / static_cast<double>(o.n_samples - o.burn_in);
  return chain;
}

CalibrationVector chain_start(const PriorSpec& prior, std::size_t chain_index, std::uint64_t seed) {
  CalibrationVector theta;
  for (std::size_t i = 0; i < kNumParameters; ++i) {
    theta[i] = 0.5 * (prior.bounds[i].lower + prior.bounds[i].upper);
  }
  if (chain_index == 0) return theta;
  std::mt19937_64 rng(seed + 7919 * chain_index);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t i = 0; i < kNumParameters; ++i) theta[i] += u(rng) * prior.bounds[i].width();
  return theta;
}

PosteriorSummary posterior_summary(const std::vector<CalibrationVector>& samples) {
  if (samples.empty()) throw ArgumentError("posterior_summary: empty chain");
  if (samples.size() < 10) throw ArgumentError("posterior_summary: need at least 10 retained samples");
  PosteriorSummary out;
  for (std::size_t p = 0; p < kNumParameters; ++p) {
    std::vector<double> v(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) v[i] = samples[i][p];
    std::string name(kParameterNames[p]);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    out[p].name = std::move(name);
    out[p].mean = numeric::mean(v);
    out[p].std = numeric::stddev(v);
    out[p].lower = numeric::quantile(v, 0.025);
    out[p].upper = numeric::quantile(v, 0.975);
  }
  return out;
}

PosteriorSummary posterior_summary(const PosteriorChain& chain) {
  return posterior_summary(chain.retained());
}

std::string format_summary_row(const ParameterSummary& r) {
  return fmt::format("{}, {:.3f}, {:.4f}, [{:.3f}, {:.3f}]", r.name, r.mean, r.std, r.lower, r.upper);
}

double r_hat(const std::vector<std::vector<double>>& seqs) {
  if (seqs.size() < 2) throw ArgumentError("r_hat: need at least 2 sequences");
  const std::size_t n = seqs.front().size();
  if (n < 4) throw ArgumentError("r_hat: sequences too short");
  std::vector<double> means;
  double w = 0.0;
  for (const auto& s : seqs) {
    if (s.size() != n) throw ArgumentError("r_hat: sequences differ in length");
    means.push_back(numeric::mean(s));
    w += numeric::variance(s);
  }
  w /= static_cast<double>(seqs.size());
  const double b_over_n = numeric::variance(means);
  if (!(w > 0.0)) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return std::sqrt(1.0 + b_over_n / w);
}

double autocorrelation_time(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) throw ArgumentError("autocorrelation_time: sequence too short");
  const double m = numeric::mean(xs);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - m) * (x - m);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;
  auto rho = [&](std::size_t lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (xs[i] - m) * (xs[i + lag] - m);
    return c / static_cast<double>(n) / c0;
  };
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1.0 / static_cast<double>(n));
}

ChainDiagnostics chain_diagnostics(const std::vector<PosteriorChain>& chains) {
  if (chains.empty()) throw ArgumentError("chain_diagnostics: no chains");
  std::vector<std::vector<CalibrationVector>> kept;
  for (const auto& c : chains) kept.push_back(c.retained());
  const std::size_t n = kept.front().size();
  for (const auto& k : kept) {
    if (k.size() != n) throw ArgumentError("chain_diagnostics: chains differ in retained length");
  }
  if (n < 8) throw ArgumentError("chain_diagnostics: chains too short");

  ChainDiagnostics out;
  for (const auto& c : chains) out.acceptance += c.acceptance_rate;
  out.acceptance /= static_cast<double>(chains.size());
  for (std::size_t p = 0; p < kNumParameters; ++p) {
    std::vector<std::vector<double>> seqs;
    double tau = 0.0;
    for (const auto& k : kept) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = k[i][p];
      tau += autocorrelation_time(v);
      if (kept.size() == 1) {
        const std::size_t half = n / 2;
        seqs.emplace_back(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half));
        seqs.emplace_back(v.end() - static_cast<std::ptrdiff_t>(half), v.end());
      } else {
        seqs.push_back(std::move(v));
      }
    }
    out.r_hat[p] = r_hat(seqs);
    out.autocorrelation_time[p] = tau / static_cast<double>(kept.size());
    out.effective_sample_size[p] =
        static_cast<double>(n * kept.size()) / out.autocorrelation_time[p];
  }
  return out;
}

CorrelationMatrix parameter_correlations(const std::vector<CalibrationVector>& samples) {
  if (samples.size() < 10) throw ArgumentError("parameter_correlations: need at least 10 samples");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), 4);
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = samples[i].to_eigen().transpose();
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c;
  CorrelationMatrix out;
  for (int i = 0; i < 4; ++i) out.undefined[static_cast<std::size_t>(i)] = !(cov(i, i) > 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) {
        out.values(i, j) = 1.0;
      } else if (out.undefined[static_cast<std::size_t>(i)] || out.undefined[static_cast<std::size_t>(j)]) {
        out.values(i, j) = std::numeric_limits<double>::quiet_NaN();
      } else {
        out.values(i, j) = std::clamp(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)), -1.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace iuq
