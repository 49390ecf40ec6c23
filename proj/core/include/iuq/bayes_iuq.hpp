#pragma once

// Bayesian inverse UQ in PC-score space: Gaussian likelihood with
// Sigma = Sigma_exp + Sigma_code, uniform box prior, adaptive Metropolis.

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "iuq/pca.hpp"
#include "iuq/reflood_sim.hpp"
#include "iuq/surrogate.hpp"

namespace iuq {

struct PriorSpec {
  PriorBounds bounds = default_prior_bounds();
};

/// Score-space covariance of i.i.d. curve noise. Conventional spaces use
/// noise_std^2 P P^T; functional spaces map the noise through the amplitude
/// basis and add phase_inflation times each phase-score ensemble variance.
Eigen::MatrixXd linear_score_covariance(const ScoreSpace& space, double noise_std,
                                        double phase_inflation);

/// Second moment of encode(curve + noise) - encode(curve) over `replicates`
/// noise draws per reference curve, with the same smoothing the experiment
/// gets. Conventional spaces return the exact linear result.
Eigen::MatrixXd sampled_score_covariance(const ScoreSpace& space,
                                         const std::vector<TransientCurve>& references,
                                         double noise_std, std::size_t replicates,
                                         double smoothing_seconds, std::uint64_t seed);

struct LikelihoodSpec {
  Eigen::VectorXd data_scores;
  Eigen::MatrixXd sigma_exp_pc;
  std::shared_ptr<const ScoreSurrogate> surrogate;
  bool use_code_uncertainty = false;
};

/// Throws ArgumentError on inconsistent dimensions or a non-symmetric /
/// non-PSD sigma_exp_pc.
void validate(const LikelihoodSpec& spec);

/// Unnormalised log posterior; -inf outside the prior box. The -1/2 log|Sigma|
/// term is kept because Sigma depends on theta when code uncertainty is on.
double log_posterior(const CalibrationVector& theta, const LikelihoodSpec& spec,
                     const PriorSpec& prior = {});

using LogDensity = std::function<double(const CalibrationVector&)>;

struct McmcOptions {
  std::size_t n_samples = 25000;
  std::size_t burn_in = 5000;
  std::size_t thin = 20;
  /// Steps before the running covariance replaces the initial proposal.
  std::size_t adapt_start = 500;
  double regularization = 1e-6;
  double target_acceptance = 0.234;
  /// Initial proposal std per parameter (before the covariance is learned).
  double initial_step = 0.1;
  std::uint64_t seed = 0;
};

struct PosteriorChain {
  std::vector<CalibrationVector> samples;  // every step, including burn-in
  std::vector<double> log_post;
  std::vector<bool> accepted;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  /// Acceptance fraction after burn-in (adaptation frozen).
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;

  std::size_t retained_count() const;
  /// Every thin-th sample after burn-in: floor((n - burn_in) / thin) of them.
  std::vector<CalibrationVector> retained() const;
};

/// Random-walk Metropolis with a Robbins-Monro adapted mean, covariance and
/// global scale; adaptation stops at the end of burn-in.
PosteriorChain adaptive_mcmc(const LogDensity& log_density, const CalibrationVector& init,
                             const McmcOptions& options = {});

/// Initial state for chain k: the prior midpoint, jittered by up to 10% of
/// the box for k > 0.
CalibrationVector chain_start(const PriorSpec& prior, std::size_t chain_index, std::uint64_t seed);

struct ParameterSummary {
  std::string name;  // e.g. "P1010"
  double mean = 0.0;
  double std = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
};

using PosteriorSummary = std::array<ParameterSummary, kNumParameters>;

PosteriorSummary posterior_summary(const std::vector<CalibrationVector>& samples);
PosteriorSummary posterior_summary(const PosteriorChain& chain);

/// "P1010, 1.175, 0.0266, [1.126, 1.226]"
std::string format_summary_row(const ParameterSummary& row);

struct ChainDiagnostics {
  double acceptance = 0.0;  // mean over chains
  std::array<double, kNumParameters> r_hat{};
  std::array<double, kNumParameters> autocorrelation_time{};
  std::array<double, kNumParameters> effective_sample_size{};
};

/// R-hat = sqrt(1 + B / (n W)) over the given sequences (B/n: variance of the
/// sequence means, W: mean within-sequence variance).
double r_hat(const std::vector<std::vector<double>>& sequences);
/// Integrated autocorrelation time, Geyer initial positive sequence.
double autocorrelation_time(std::span<const double> xs);

/// Uses the retained samples. One chain is split in halves; several chains
/// are compared as they are.
ChainDiagnostics chain_diagnostics(const std::vector<PosteriorChain>& chains);

struct CorrelationMatrix {
  Eigen::Matrix4d values;
  /// Parameters with zero variance; their off-diagonal entries are NaN.
  std::array<bool, kNumParameters> undefined{};
};

CorrelationMatrix parameter_correlations(const std::vector<CalibrationVector>& samples);

}  // namespace iuq
