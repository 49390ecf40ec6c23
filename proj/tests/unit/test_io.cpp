#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "iuq/errors.hpp"
#include "iuq/io.hpp"
#include "iuq/split.hpp"
#include "iuq/svg.hpp"

using namespace iuq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "iuq_unit_io" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("curve CSV round trip and parse errors") {
  const auto dir = scratch("curves");
  const auto c = simulate_pct({{1.3, 0.7, 2.2, 1.9}}, TimeGrid::default_grid());
  io::write_curve_csv(dir / "c.csv", c);
  const auto back = io::read_curve_csv(dir / "c.csv");
  CHECK(back.grid == c.grid);
  CHECK(back.values == c.values);
  CHECK(io::read_text(dir / "c.csv").rfind("time_s,value_K\n", 0) == 0);

  io::write_text(dir / "bad.csv", "time_s,value_K\n0,1\n1,abc\n2,3\n");
  try {
    io::read_curve_csv(dir / "bad.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
  }
  io::write_text(dir / "hdr.csv", "t,v\n0,1\n1,2\n");
  CHECK_THROWS_AS(io::read_curve_csv(dir / "hdr.csv"), ParseError);
  CHECK_THROWS_AS(io::read_curve_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("design and chain CSV") {
  const auto dir = scratch("design");
  const auto d = lhs_sample(25, default_prior_bounds(), 4);
  io::write_design_csv(dir / "design.csv", d);
  CHECK(io::read_design_csv(dir / "design.csv") == d);
  CHECK(io::read_text(dir / "design.csv").rfind("p1009,p1010,p1011,p1031\n", 0) == 0);

  McmcOptions o;
  o.n_samples = 300;
  o.burn_in = 100;
  o.thin = 4;
  o.seed = 2;
  const auto chain = adaptive_mcmc([](const CalibrationVector& t) { return -0.5 * t.to_eigen().squaredNorm(); }, {}, o);
  io::write_chain_csv(dir / "chain.csv", chain);
  CHECK(io::read_text(dir / "chain.csv").rfind("step,p1009,p1010,p1011,p1031,log_post,accepted\n", 0) == 0);
  const auto back = io::read_chain_csv(dir / "chain.csv", 100, 4);
  CHECK(back.samples == chain.samples);
  CHECK(back.log_post == chain.log_post);
  CHECK(back.accepted == chain.accepted);
  CHECK(back.acceptance_rate == doctest::Approx(chain.acceptance_rate).epsilon(1e-15));
  CHECK(back.retained() == chain.retained());
}

TEST_CASE("band and matrix CSV") {
  const auto dir = scratch("band");
  const auto grid = TimeGrid::default_grid();
  const auto band = propagate(lhs_sample(60, default_prior_bounds(), 1), full_model_path(grid));
  io::write_band_csv(dir / "band.csv", band);
  CHECK(io::read_text(dir / "band.csv").rfind("time_s,mean,lower,upper\n", 0) == 0);
  const auto back = io::read_band_csv(dir / "band.csv", 0.95, "prior");
  CHECK(back.mean == band.mean);
  CHECK(back.lower == band.lower);
  CHECK(back.upper == band.upper);

  Eigen::MatrixXd m(3, 2);
  m << 1.0, 2.5, -3.25, 1e-17, 7.0, 1.0 / 3.0;
  io::write_matrix_csv(dir / "m.csv", {"pc0", "pc1"}, m);
  CHECK(io::read_matrix_csv(dir / "m.csv", {"pc0", "pc1"}) == m);
  CHECK_THROWS_AS(io::read_matrix_csv(dir / "m.csv", {"a", "b"}), ParseError);
}

TEST_CASE("aligned ensemble and model JSON round trips") {
  const auto dir = scratch("models");
  const auto grid = TimeGrid::default_grid();
  const auto design = lhs_sample(30, default_prior_bounds(), 6);
  const auto curves = iuq::test::simulate_all(design, grid);
  const auto aligned = align_ensemble(curves);

  io::write_aligned_ensemble(dir / "aligned", aligned);
  CHECK(fs::exists(dir / "aligned" / "warped_000.csv"));
  CHECK(fs::exists(dir / "aligned" / "gamma_029.csv"));
  CHECK(fs::exists(dir / "aligned" / "template.csv"));
  const auto al2 = io::read_aligned_ensemble(dir / "aligned", 30);
  CHECK(al2.warped_curves[7].values == aligned.warped_curves[7].values);
  CHECK(al2.warpings[7].gamma == aligned.warpings[7].gamma);
  CHECK(al2.template_srsf.q == aligned.template_srsf.q);

  const auto pca = fit_pca(curves_to_matrix(curves), VarianceTarget{0.95});
  io::save_pca(dir / "pca.json", pca);
  const auto pca2 = io::load_pca(dir / "pca.json");
  CHECK(pca2.basis == pca.basis);
  CHECK(pca2.mean == pca.mean);
  CHECK(pca2.singular_values == pca.singular_values);

  const ScoreSpace fun(fpca_fit(aligned, 2, 4));
  io::save_score_space(dir / "fun.json", fun);
  const ScoreSpace fun2 = io::load_score_space(dir / "fun.json");
  CHECK(fun2.is_functional());
  CHECK(fun2.encode(curves[3]) == fun.encode(curves[3]));
  const ScoreSpace conv(pca, grid);
  io::save_score_space(dir / "conv.json", conv);
  CHECK(io::load_score_space(dir / "conv.json").encode(curves[3]) == conv.encode(curves[3]));

  Eigen::MatrixXd scores(30, 2);
  for (Eigen::Index i = 0; i < 30; ++i) scores.row(i) = fun.encode(curves[static_cast<std::size_t>(i)]).head(2).transpose();
  const auto split = split_data(30, {}, 1);
  SurrogateTrainOptions o;
  o.nn.max_epochs = 60;
  o.bnn.base.max_epochs = 60;
  o.gp.restarts = 2;
  for (auto kind : {SurrogateKind::Gp, SurrogateKind::Dnn, SurrogateKind::Bnn}) {
    const auto t = train_surrogate(kind, design_matrix(design), scores, split, o);
    const auto path = dir / (std::string(to_string(kind)) + ".json");
    io::save_surrogate(path, *t.model);
    const auto back = io::load_surrogate(path);
    CHECK(back->kind() == kind);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto a = t.model->predict(design[i]);
      const auto b = back->predict(design[i]);
      CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + a.mean.cwiseAbs().maxCoeff()));
      CHECK((a.std - b.std).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + a.std.cwiseAbs().maxCoeff()));
    }
  }
  io::write_text(dir / "broken.json", "{\"kind\": \"dnn\", ");
  CHECK_THROWS_AS(io::load_surrogate(dir / "broken.json"), ParseError);
}

TEST_CASE("svg charts") {
  svg::Chart c("title", "x", "y");
  c.add(svg::Series{{0, 1, 2}, {1, 4, 9}, "#000000", "line", 1.0});
  c.add(svg::Band{{0, 1, 2}, {0, 3, 8}, {2, 5, 10}, "#1f77b4", 0.3, "band"});
  const std::string a = c.render();
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("<polyline") != std::string::npos);
  CHECK(a.find("<polygon") != std::string::npos);
  CHECK(a == c.render());
  const auto t = svg::ticks(0.0, 500.0);
  CHECK(t.front() >= 0.0);
  CHECK(t.back() <= 500.0);
  CHECK(t.size() >= 3);
}
