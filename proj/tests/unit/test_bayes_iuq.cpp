#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "iuq/bayes_iuq.hpp"
#include "iuq/errors.hpp"

using namespace iuq;

namespace {

// Scores are an affine function of theta with a fixed per-score std.
class AffineSurrogate final : public ScoreSurrogate {
 public:
  AffineSurrogate(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::VectorXd sd)
      : a_(std::move(a)), b_(std::move(b)), sd_(std::move(sd)) {}
  ScorePrediction predict(const CalibrationVector& theta) const override {
    return {a_ * theta.to_eigen() + b_, sd_};
  }
  std::size_t output_dim() const override { return static_cast<std::size_t>(b_.size()); }
  SurrogateKind kind() const override { return SurrogateKind::Dnn; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::VectorXd sd_;
};

std::shared_ptr<const ScoreSurrogate> one_d(double sd) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 4);
  a(0, 0) = 1.0;
  return std::make_shared<AffineSurrogate>(a, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, sd));
}

double gaussian_4d(const CalibrationVector& th) {
  double s = 0.0;
  for (std::size_t k = 0; k < 4; ++k) s += th[k] * th[k];
  return -0.5 * s;
}

std::vector<double> column(const std::vector<CalibrationVector>& xs, std::size_t k) {
  std::vector<double> out;
  for (const auto& x : xs) out.push_back(x[k]);
  return out;
}

}  // namespace

TEST_CASE("log_posterior") {
  const LikelihoodSpec spec{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), one_d(0.5), false};
  validate(spec);

  SUBCASE("outside the prior") {
    CHECK(log_posterior({{5.5, 1, 1, 1}}, spec) == -std::numeric_limits<double>::infinity());
    CHECK(log_posterior({{1, 1, -0.01, 1}}, spec) == -std::numeric_limits<double>::infinity());
  }
  SUBCASE("one-dimensional Gaussian exponent") {
    // Residual r = 0 - (theta0 - 1).
    const double r0 = -(1.0 - 1.0), r1 = -(1.8 - 1.0);
    const double d = log_posterior({{1.8, 2, 2, 2}}, spec) - log_posterior({{1.0, 2, 2, 2}}, spec);
    CHECK(d == doctest::Approx(-0.5 * (r1 * r1 - r0 * r0)).epsilon(1e-14));
  }
  SUBCASE("code uncertainty widens the likelihood") {
    LikelihoodSpec with = spec;
    with.use_code_uncertainty = true;
    const CalibrationVector th{{2.5, 1, 1, 1}};
    const double r = -1.5, s2 = 0.25;
    const double quad_without = -2.0 * log_posterior(th, spec);
    const double quad_with = -2.0 * log_posterior(th, with) - std::log(1.0 + s2);
    CHECK(quad_without == doctest::Approx(r * r).epsilon(1e-14));
    CHECK(quad_with == doctest::Approx(r * r / (1.0 + s2)).epsilon(1e-14));
    CHECK(quad_with < quad_without);
  }
  SUBCASE("singular covariance is a numeric error") {
    const LikelihoodSpec bad{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1), one_d(0.5), false};
    CHECK_THROWS_AS(log_posterior({{1, 1, 1, 1}}, bad), NumericError);
  }
  SUBCASE("inconsistent specs are rejected") {
    CHECK_THROWS_AS(validate({Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(1, 1), one_d(0.5), false}),
                    ArgumentError);
    CHECK_THROWS_AS(validate({Eigen::VectorXd::Zero(1), -Eigen::MatrixXd::Identity(1, 1), one_d(0.5), false}),
                    ArgumentError);
    CHECK_THROWS_AS(validate({Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), nullptr, false}), ArgumentError);
  }
}

TEST_CASE("log_posterior is invariant under a consistent permutation of scores") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(3, 4), c(3, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = z(rng);
  const Eigen::MatrixXd sigma = c * c.transpose() + Eigen::MatrixXd::Identity(3, 3);
  const Eigen::Vector3d b(0.5, -1.0, 2.0), sd(0.3, 0.2, 0.7), y(1.0, 2.0, -1.0);
  Eigen::PermutationMatrix<3> p;
  p.indices() << 2, 0, 1;
  const LikelihoodSpec s1{y, sigma, std::make_shared<AffineSurrogate>(a, b, sd), true};
  const LikelihoodSpec s2{p * y, p * sigma * p.transpose(),
                          std::make_shared<AffineSurrogate>(p * a, p * b, p * sd), true};
  for (const CalibrationVector th : {CalibrationVector{{1, 2, 3, 4}}, CalibrationVector{{0.2, 4.1, 2.2, 1.0}}}) {
    CHECK(log_posterior(th, s1) == doctest::Approx(log_posterior(th, s2)).epsilon(1e-12));
  }
}

TEST_CASE("adaptive Metropolis on a standard Gaussian") {
  McmcOptions o;
  o.seed = 17;
  const auto chain = adaptive_mcmc(gaussian_4d, {{0.5, -0.5, 0.2, 0.0}}, o);
  CHECK(chain.samples.size() == 25000);
  CHECK(chain.retained_count() == 1000);
  const auto kept = chain.retained();
  const auto s = posterior_summary(kept);
  for (const auto& row : s) {
    CHECK(std::abs(row.mean) <= 0.1);
    CHECK(std::abs(row.std - 1.0) <= 0.1);
  }
  CHECK(chain.acceptance_rate >= 0.1);
  CHECK(chain.acceptance_rate <= 0.5);

  const auto again = adaptive_mcmc(gaussian_4d, {{0.5, -0.5, 0.2, 0.0}}, o);
  CHECK(again.samples == chain.samples);
  CHECK(again.log_post == chain.log_post);

  CHECK_THROWS_AS(adaptive_mcmc([](const CalibrationVector&) { return -std::numeric_limits<double>::infinity(); },
                                {}, o),
                  ArgumentError);
}

TEST_CASE("chains never leave the prior box") {
  const LikelihoodSpec spec{Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd::Identity(1, 1), one_d(0.0), false};
  McmcOptions o;
  o.n_samples = 4000;
  o.burn_in = 1000;
  o.thin = 3;
  o.seed = 5;
  const auto chain = adaptive_mcmc([&](const CalibrationVector& t) { return log_posterior(t, spec); },
                                   chain_start({}, 0, 1), o);
  for (const auto& th : chain.samples) CHECK(within_bounds(th, default_prior_bounds()));
}

TEST_CASE("chain starts") {
  const auto a = chain_start({}, 0, 9);
  CHECK(a == CalibrationVector{{2.5, 2.5, 2.5, 2.5}});
  const auto b = chain_start({}, 1, 9);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(b[k] - 2.5) <= 0.5);
  CHECK(chain_start({}, 1, 9) == b);
  CHECK(chain_start({}, 2, 9) != b);
}

TEST_CASE("posterior summaries") {
  SUBCASE("constant chain") {
    const std::vector<CalibrationVector> xs(50, CalibrationVector{{1.5, 2, 3, 4}});
    const auto s = posterior_summary(xs);
    CHECK(s[0].std == 0.0);
    CHECK(s[0].lower == 1.5);
    CHECK(s[0].upper == 1.5);
    CHECK(s[0].name == "P1009");
    CHECK(s[3].name == "P1031");
  }
  SUBCASE("uniform draws") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<CalibrationVector> xs(10000);
    for (auto& x : xs) x = {{u(rng), u(rng), u(rng), u(rng)}};
    for (const auto& row : posterior_summary(xs)) CHECK(std::abs(row.mean - 0.5) <= 0.02);
  }
  SUBCASE("table row format") {
    const ParameterSummary row{"P1010", 1.175, 0.0266, 1.126, 1.226};
    CHECK(format_summary_row(row) == "P1010, 1.175, 0.0266, [1.126, 1.226]");
  }
  SUBCASE("too few samples") {
    CHECK_THROWS_AS(posterior_summary(std::vector<CalibrationVector>{}), ArgumentError);
    CHECK_THROWS_AS(posterior_summary(std::vector<CalibrationVector>(5)), ArgumentError);
  }
}

TEST_CASE("R-hat") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> a(2000), b(2000);
  for (auto& x : a) x = z(rng);
  for (auto& x : b) x = z(rng);
  CHECK(r_hat({a, a}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r_hat({a, b}) < 1.01);
  std::vector<double> shifted = a;
  for (auto& x : shifted) x += 5.0;
  CHECK(r_hat({a, shifted}) > 1.5);
  CHECK_THROWS_AS(r_hat({a}), ArgumentError);
  CHECK(autocorrelation_time(a) == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("chain diagnostics") {
  McmcOptions o;
  o.n_samples = 6000;
  o.burn_in = 1000;
  o.thin = 5;
  std::vector<PosteriorChain> chains;
  for (std::uint64_t s = 0; s < 2; ++s) {
    o.seed = s;
    chains.push_back(adaptive_mcmc(gaussian_4d, {}, o));
  }
  const auto d = chain_diagnostics(chains);
  for (double r : d.r_hat) CHECK(r < 1.1);
  for (double t : d.autocorrelation_time) CHECK(t >= 0.5);
  for (double n : d.effective_sample_size) CHECK(n > 0.0);
  CHECK(d.acceptance > 0.1);
  CHECK_THROWS_AS(chain_diagnostics({}), ArgumentError);
}

TEST_CASE("parameter correlations") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<CalibrationVector> xs(1000);
  for (auto& x : xs) x = {{u(rng), u(rng), u(rng), u(rng)}};
  const auto c = parameter_correlations(xs);
  for (int i = 0; i < 4; ++i) {
    CHECK(c.values(i, i) == 1.0);
    for (int k = 0; k < 4; ++k) {
      if (i != k) CHECK(std::abs(c.values(i, k)) <= 0.1);
    }
  }
  for (auto& x : xs) x[1] = 5.0 - x[0];
  for (auto& x : xs) x[3] = 2.0;
  const auto d = parameter_correlations(xs);
  CHECK(d.values(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(d.undefined[3]);
  CHECK_FALSE(d.undefined[0]);
  CHECK(std::isnan(d.values(0, 3)));
}

TEST_CASE("experimental covariance in score space") {
  const auto grid = TimeGrid::default_grid();
  const auto curves = iuq::test::simulate_all(lhs_sample(25, default_prior_bounds(), 8), grid);
  const ScoreSpace conv(fit_pca(curves_to_matrix(curves), ComponentCount{4}), grid);
  const Eigen::MatrixXd lc = linear_score_covariance(conv, 10.0, 0.1);
  CHECK((lc - 100.0 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((sampled_score_covariance(conv, curves, 10.0, 2, 5.0, 1) - lc).cwiseAbs().maxCoeff() == 0.0);

  const ScoreSpace fun(fpca_fit(align_ensemble(curves), 2, 4));
  const Eigen::MatrixXd lf = linear_score_covariance(fun, 10.0, 0.1);
  CHECK((lf.topLeftCorner(2, 2) - 100.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(lf.topRightCorner(2, 4).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd pv = fun.functional().phase.score_variances().head(4);
  CHECK((lf.bottomRightCorner(4, 4).diagonal() - 0.1 * pv).cwiseAbs().maxCoeff() <= 1e-9 * pv.maxCoeff());

  const std::vector<TransientCurve> refs{curves[0], curves[7], curves[14]};
  const Eigen::MatrixXd sf = sampled_score_covariance(fun, refs, 10.0, 2, 5.0, 3);
  CHECK(sf.rows() == 6);
  CHECK((sf - sf.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * sf.trace());
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sf).eigenvalues().minCoeff() >= -1e-9 * sf.trace());
  CHECK((sampled_score_covariance(fun, refs, 10.0, 2, 5.0, 3) - sf).cwiseAbs().maxCoeff() == 0.0);
}
