#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "iuq/errors.hpp"
#include "iuq/fuq.hpp"
#include "iuq/pca.hpp"

using namespace iuq;

namespace {

Eigen::MatrixXd gaussian_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::Matrix2d L;
  L << 3.0, 0.0, 1.2, 0.8;
  Eigen::MatrixXd data(2, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const Eigen::Vector2d e(z(rng), z(rng));
    data.col(j) = Eigen::Vector2d(5.0, -2.0) + L * e;
  }
  return data;
}

Eigen::MatrixXd random_matrix(Eigen::Index p, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(p, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

void check_orthonormal(const PcaModel& m) {
  const Eigen::MatrixXd g = m.basis * m.basis.transpose();
  CHECK((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() <= 1e-10);
}

}  // namespace

TEST_CASE("rank-one data is explained by one component") {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(20, 1.0, 3.0);
  Eigen::MatrixXd data(20, 8);
  for (int j = 0; j < 8; ++j) data.col(j) = Eigen::VectorXd::Constant(20, 4.0) + (j - 3.5) * v;
  const auto m = fit_pca(data, VarianceTarget{0.999});
  CHECK(m.retained() == 1);
  CHECK(m.explained_variance_ratio()(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("principal directions match the sample covariance eigenvectors") {
  const auto data = gaussian_cloud(400, 1);
  const auto m = fit_pca(data, ComponentCount{2});
  check_orthonormal(m);
  const Eigen::MatrixXd c = data.colwise() - data.rowwise().mean();
  const Eigen::Matrix2d cov = c * c.transpose() / (data.cols() - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector2d oracle = es.eigenvectors().col(1 - k);
    const Eigen::Vector2d pc = m.basis.row(k).transpose();
    const double angle = std::asin(std::min(1.0, (pc - oracle.dot(pc) * oracle).norm()));
    CHECK(angle <= 1e-8);
    CHECK(m.singular_values(k) * m.singular_values(k) / (data.cols() - 1.0) ==
          doctest::Approx(es.eigenvalues()(1 - k)).epsilon(1e-10));
  }
}

TEST_CASE("signs are fixed by the largest loading") {
  const auto m = fit_pca(random_matrix(12, 30, 2), ComponentCount{5});
  for (Eigen::Index k = 0; k < m.basis.rows(); ++k) {
    Eigen::Index at = 0;
    m.basis.row(k).cwiseAbs().maxCoeff(&at);
    CHECK(m.basis(k, at) > 0.0);
  }
}

TEST_CASE("project and reconstruct") {
  const auto data = random_matrix(10, 6, 3);
  const auto full = fit_pca(data, ComponentCount{5});
  const auto trunc = fit_pca(data, ComponentCount{2});
  check_orthonormal(full);

  CHECK(project(full, full.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((reconstruct(full, Eigen::VectorXd::Zero(5)) - full.mean).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(5, -1.0, 2.0);
  CHECK((project(full, reconstruct(full, s)) - s).cwiseAbs().maxCoeff() <= 1e-10);

  // Training columns: scores equal U^T A_centered from an independent SVD.
  const Eigen::MatrixXd centred = data.colwise() - data.rowwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinU);
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const Eigen::VectorXd b = project(full, data.col(j));
    for (Eigen::Index k = 0; k < 5; ++k) {
      CHECK(std::abs(b(k)) == doctest::Approx(std::abs(svd.matrixU().col(k).dot(centred.col(j)))).epsilon(1e-9));
    }
    CHECK((reconstruct(full, b) - data.col(j)).cwiseAbs().maxCoeff() <= 1e-8);
    const double residual = (reconstruct(trunc, project(trunc, data.col(j))) - data.col(j)).norm();
    CHECK(residual == doctest::Approx(b.tail(3).norm()).epsilon(1e-9));
  }

  CHECK_THROWS_AS(project(full, Eigen::VectorXd::Zero(3)), ArgumentError);
  CHECK_THROWS_AS(reconstruct(full, Eigen::VectorXd::Zero(4)), ArgumentError);
}

TEST_CASE("truncation rules") {
  const auto data = random_matrix(8, 20, 4);
  CHECK_THROWS_AS(fit_pca(data, VarianceTarget{0.0}), ArgumentError);
  CHECK_THROWS_AS(fit_pca(data, VarianceTarget{1.5}), ArgumentError);
  CHECK_THROWS_AS(fit_pca(data, ComponentCount{9}), ArgumentError);
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Ones(4, 1), ComponentCount{1}), ArgumentError);

  const auto m = fit_pca(data, VarianceTarget{0.8});
  CHECK(m.retained_explained() >= 0.8);
  CHECK(m.cumulative_explained(m.retained() - 1) < 0.8);
  const auto r = m.explained_variance_ratio();
  for (Eigen::Index k = 1; k < r.size(); ++k) CHECK(r(k) <= r(k - 1));
  CHECK(r.sum() <= 1.0 + 1e-12);

  Eigen::MatrixXd low(6, 10);
  low << random_matrix(6, 2, 5) * random_matrix(2, 10, 6);
  const auto lr = fit_pca(low, ComponentCount{4});
  CHECK(lr.truncated_to_rank);
  CHECK(lr.retained() <= 3);
}

TEST_CASE("covariance transform") {
  const auto m = fit_pca(random_matrix(6, 30, 7), ComponentCount{3});

  SUBCASE("isotropic noise stays isotropic") {
    const Eigen::MatrixXd s = transform_covariance(m, 4.0 * Eigen::MatrixXd::Identity(6, 6));
    CHECK((s - 4.0 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("full basis preserves the spectrum") {
    const auto full = fit_pca(random_matrix(4, 30, 8), ComponentCount{4});
    Eigen::MatrixXd a = random_matrix(4, 4, 9);
    const Eigen::MatrixXd sigma = a * a.transpose();
    const Eigen::MatrixXd t = transform_covariance(full, sigma);
    const Eigen::VectorXd e1 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma).eigenvalues();
    const Eigen::VectorXd e2 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t).eigenvalues();
    CHECK((e1 - e2).cwiseAbs().maxCoeff() <= 1e-10 * e1.sum());
  }
  SUBCASE("output is symmetric PSD") {
    const Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(6, 1.0, 20.0);
    const Eigen::MatrixXd t = transform_covariance(m, d.asDiagonal());
    CHECK((t - t.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t).eigenvalues().minCoeff() >= -1e-10 * t.trace());
  }
  SUBCASE("asymmetric input is rejected") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(6, 6);
    s(0, 1) = 1e-3;
    CHECK_THROWS_AS(transform_covariance(m, s), ArgumentError);
  }
}

TEST_CASE("functional PCA on a small synthetic ensemble") {
  const auto grid = TimeGrid::default_grid();
  const auto curves = iuq::test::simulate_all(lhs_sample(40, default_prior_bounds(), 12), grid);
  const auto aligned = align_ensemble(curves);
  const auto f = fpca_fit(aligned, 2, 4);
  check_orthonormal(f.amplitude);
  check_orthonormal(f.phase);
  CHECK(f.amplitude.retained() == 2);
  CHECK(f.phase.retained() == 4);

  SUBCASE("explained variance grows with the component count") {
    double prev = 0.0;
    for (std::size_t k = 1; k <= 5; ++k) {
      const double e = fpca_fit(aligned, k, 4).amplitude.retained_explained();
      CHECK(e >= prev - 1e-15);
      prev = e;
    }
  }
  SUBCASE("six functional PCs beat six conventional PCs") {
    const auto conv = fit_pca(curves_to_matrix(curves), ComponentCount{6});
    CHECK(std::min(f.amplitude.retained_explained(), f.phase.retained_explained()) >= conv.retained_explained());
  }
  SUBCASE("zero scores give the mean warped curve under the mean warp") {
    const auto c = fpca_reconstruct(f, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(4));
    const TransientCurve mean_warped(grid, {f.amplitude.mean.data(), f.amplitude.mean.data() + grid.size()});
    const WarpingFunction mean_gamma{grid, {f.phase.mean.data(), f.phase.mean.data() + grid.size()}};
    CHECK(iuq::test::max_abs_diff(c.values, reconstruct_curve(mean_warped, mean_gamma).values) == 0.0);
  }
  SUBCASE("score length mismatch is rejected") {
    CHECK_THROWS_AS(fpca_reconstruct(f, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4)), ArgumentError);
  }
}

TEST_CASE("full-rank functional PCA round trip") {
  const auto grid = TimeGrid::default_grid();
  const auto curves = iuq::test::simulate_all(lhs_sample(8, default_prior_bounds(), 21), grid);
  const auto aligned = align_ensemble(curves);
  const auto f = fpca_fit(aligned, 7, 7);
  const DataMatrix w = curves_to_matrix(aligned.warped_curves);
  const DataMatrix g = warps_to_matrix(aligned.warpings);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const auto c = fpca_reconstruct(f, project(f.amplitude, w.col(idx)), project(f.phase, g.col(idx)));
    const auto direct = reconstruct_curve(aligned.warped_curves[i], aligned.warpings[i]);
    CHECK(iuq::test::max_abs_diff(c.values, direct.values) <= 1e-6);
  }
}

TEST_CASE("identical curves give a rank-one amplitude matrix") {
  const auto c = simulate_pct({{1.3, 0.9, 1.1, 1.0}}, TimeGrid::default_grid());
  const auto aligned = align_ensemble({c, c, c, c});
  const auto f = fpca_fit(aligned, 1, 1);
  CHECK(f.amplitude.singular_values(0) <= 1e-9);
}

TEST_CASE("conventional truncation at 95% keeps few components") {
  const auto curves = iuq::test::simulate_all(lhs_sample(200, default_prior_bounds(), 2024), TimeGrid::default_grid());
  const auto m = fit_pca(curves_to_matrix(curves), VarianceTarget{0.95});
  CHECK(m.retained() <= 10);
}

TEST_CASE("ScoreSpace encode/decode") {
  const auto grid = TimeGrid::default_grid();
  const auto curves = iuq::test::simulate_all(lhs_sample(30, default_prior_bounds(), 31), grid);
  const ScoreSpace conv(fit_pca(curves_to_matrix(curves), ComponentCount{6}), grid);
  CHECK_FALSE(conv.is_functional());
  CHECK(conv.dim() == 6);
  const auto s = conv.encode(curves[3]);
  CHECK((conv.encode(conv.decode(s)) - s).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK_THROWS_AS(conv.encode(simulate_pct({}, TimeGrid(0, 500, 500))), ArgumentError);

  const ScoreSpace fun(fpca_fit(align_ensemble(curves), 2, 4));
  CHECK(fun.is_functional());
  CHECK(fun.dim() == 6);
  CHECK(fun.decode(fun.encode(curves[0])).size() == grid.size());
  CHECK_THROWS_AS(fun.decode(Eigen::VectorXd::Zero(5)), ArgumentError);
}
