#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "iuq/errors.hpp"
#include "iuq/io.hpp"
#include "iuq/pipeline.hpp"

using namespace iuq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "iuq_unit_pipeline" / name;
  fs::remove_all(p);
  return p;
}

PipelineConfig small_config(const fs::path& out, const std::string& preset = "method4") {
  PipelineConfig c;
  apply_preset(c, preset);
  c.output_dir = out;
  c.design_size = 40;
  c.design_seed = 7;
  c.mcmc.n_samples = 3000;
  c.mcmc.burn_in = 1000;
  c.mcmc.thin = 10;
  c.noise_references = 5;
  c.noise_replicates = 2;
  c.prior_samples = 100;
  return c;
}

std::map<std::string, std::string> artifact_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel.rfind("manifests/", 0) == 0) continue;
    out[rel] = io::read_text(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("presets follow the four-method table") {
  const auto m1 = preset_triple("method1");
  CHECK((m1.pca == PcaMethod::Conventional && m1.surrogate == SurrogateKind::Gp && m1.code_uncertainty));
  const auto m2 = preset_triple("method2");
  CHECK((m2.pca == PcaMethod::Conventional && m2.surrogate == SurrogateKind::Dnn && !m2.code_uncertainty));
  const auto m3 = preset_triple("method3");
  CHECK((m3.pca == PcaMethod::Functional && m3.surrogate == SurrogateKind::Dnn && !m3.code_uncertainty));
  const auto m4 = preset_triple("method4");
  CHECK((m4.pca == PcaMethod::Functional && m4.surrogate == SurrogateKind::Bnn && m4.code_uncertainty));
  CHECK_THROWS_AS(preset_triple("method5"), ConfigError);

  // Presets differ only in the triple.
  PipelineConfig a, b;
  apply_preset(a, "method1");
  apply_preset(b, "method3");
  b.pca_method = a.pca_method;
  b.surrogate = a.surrogate;
  b.use_code_uncertainty = a.use_code_uncertainty;
  b.preset = a.preset;
  CHECK(config_to_json(a) == config_to_json(b));
}

TEST_CASE("default sampler settings retain 1000 draws") {
  const PipelineConfig c;
  CHECK(c.mcmc.n_samples == 25000);
  CHECK(c.mcmc.burn_in == 5000);
  CHECK(c.mcmc.thin == 20);
  CHECK((c.mcmc.n_samples - c.mcmc.burn_in) / c.mcmc.thin == 1000);
  CHECK(c.design_size == 500);
  CHECK(c.grid.size() == 1000);
}

TEST_CASE("config parsing") {
  SUBCASE("minimal config gets the defaults") {
    const auto c = parse_config(R"({"version": 1})");
    CHECK(c.preset == "method4");
    CHECK(config_to_json(c) == config_to_json(PipelineConfig{}));
  }
  SUBCASE("serialised config parses back to itself") {
    PipelineConfig c = small_config("/tmp/x", "method2");
    c.sigma_exp = 7.5;
    c.validation_seeds = {1, 2, 3};
    CHECK(config_to_json(parse_config(config_to_json(c))) == config_to_json(c));
  }
  SUBCASE("unknown keys fail fast") {
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "extra": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "mcmc": {"samples": 10}})"), ConfigError);
  }
  SUBCASE("version and syntax") {
    CHECK_THROWS_AS(parse_config(R"({"preset": "method1"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "design": {"size": "many"}})"), ConfigError);
  }
  SUBCASE("method triple rules") {
    CHECK(parse_config(R"({"version": 1, "preset": "method2"})").surrogate == SurrogateKind::Dnn);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "preset": "method2", "surrogate": {"kind": "bnn"}})"), ConfigError);
    const auto named = parse_config(
        R"({"version": 1, "pca": {"method": "conventional"}, "surrogate": {"kind": "gp"}, "likelihood": {"use_code_uncertainty": true}})");
    CHECK(named.preset == "method1");
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "surrogate": {"kind": "gp"}})"), ConfigError);
    const auto custom = parse_config(R"({"version": 1, "preset": "custom", "surrogate": {"kind": "gp"}})");
    CHECK(custom.preset == "custom");
    CHECK(custom.surrogate == SurrogateKind::Gp);
    CHECK(custom.pca_method == PcaMethod::Functional);
  }
  SUBCASE("range checks") {
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "design": {"size": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "likelihood": {"sigma_exp": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "mcmc": {"n_samples": 100, "burn_in": 100}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "mcmc": {"n_samples": 100, "burn_in": 50, "thin": 10}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "prior": {"lower": [0, 0, 0, 0], "upper": [5, 5, 0, 5]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "fuq": {"level": 1.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "grid": {"n_points": 5}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "experiment": {"theta_true": [9, 1, 1, 1]}})"), ConfigError);
  }
  SUBCASE("missing files are config errors") {
    CHECK_THROWS_AS(load_config("/nonexistent/iuq.json"), ConfigError);
  }
}

TEST_CASE("seeds and fingerprints") {
  PipelineConfig c;
  set_all_seeds(c, 42);
  CHECK(c.design_seed == 42);
  CHECK(c.split_seed == 42);
  CHECK(c.surrogate_seed == 42);
  CHECK(c.mcmc.seed == 42);
  CHECK(c.experiment_seed == 42);
  CHECK(c.fuq_seed == 42);

  PipelineConfig d = c;
  d.band_level = 0.9;
  for (Stage s : {Stage::Sample, Stage::Simulate, Stage::Align, Stage::Pca, Stage::Train, Stage::Iuq}) {
    CHECK(stage_fingerprint(c, s) == stage_fingerprint(d, s));
  }
  CHECK(stage_fingerprint(c, Stage::Fuq) != stage_fingerprint(d, Stage::Fuq));

  d = c;
  d.output_dir = "elsewhere";
  CHECK(stage_fingerprint(c, Stage::Report) == stage_fingerprint(d, Stage::Report));
  d.surrogate = SurrogateKind::Dnn;
  CHECK(stage_fingerprint(c, Stage::Pca) == stage_fingerprint(d, Stage::Pca));
  CHECK(stage_fingerprint(c, Stage::Train) != stage_fingerprint(d, Stage::Train));

  CHECK(parse_stage("iuq") == Stage::Iuq);
  CHECK_THROWS_AS(parse_stage("deploy"), ConfigError);
}

TEST_CASE("stages need their upstream manifests") {
  const auto dir = scratch("deps");
  const auto c = small_config(dir);
  CHECK_THROWS_AS(run_stage(c, Stage::Simulate), DependencyError);
  run_stage(c, Stage::Sample);
  CHECK(fs::exists(dir / "design.csv"));
  CHECK_THROWS_AS(run_stage(c, Stage::Pca), DependencyError);

  PipelineConfig other = c;
  other.design_seed = 8;
  CHECK_THROWS_AS(run_stage(other, Stage::Simulate), DependencyError);
}

TEST_CASE("corrupt curve files name the file") {
  const auto dir = scratch("corrupt");
  auto c = small_config(dir);
  c.design_size = 10;
  run_stage(c, Stage::Sample);
  run_stage(c, Stage::Simulate);
  io::write_text(dir / "curves" / "curve_004.csv", "time_s,value_K\n0,oops\n");
  try {
    run_stage(c, Stage::Align);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("curve_004.csv") != std::string::npos);
  }
}

TEST_CASE("conventional presets skip alignment") {
  const auto dir = scratch("conv");
  auto c = small_config(dir, "method2");
  c.design_size = 12;
  run_stage(c, Stage::Sample);
  run_stage(c, Stage::Simulate);
  const auto m = json::parse(io::read_text(run_stage(c, Stage::Align)));
  CHECK(m["metrics"]["skipped"] == true);
  CHECK_FALSE(fs::exists(dir / "aligned"));
}

TEST_CASE("small method4 run end to end") {
  const auto dir = scratch("m4a");
  const auto c = small_config(dir);
  run_all(c);

  for (const char* f : {"design.csv", "curves/curve_039.csv", "aligned/template.csv", "score_space.json", "scores.csv",
                        "surrogate.json", "training/pc0.csv", "experiment.csv", "likelihood.json", "chains/chain_0.csv",
                        "posterior_summary.json", "bands/prior.csv", "bands/posterior.csv", "bands/predictive.csv",
                        "bands/posterior_surrogate.csv", "report/report.json", "report/bands.svg", "report/trace.svg",
                        "report/variance.svg"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  for (const char* s : {"sample", "simulate", "align", "pca", "train", "iuq", "fuq", "report"}) {
    const auto m = json::parse(io::read_text(dir / "manifests" / (std::string(s) + ".json")));
    CHECK(m["stage"] == s);
    CHECK(m.contains("config_hash"));
    CHECK(m.contains("stage_version"));
    CHECK(m.contains("created_utc"));
  }

  const auto summary = json::parse(io::read_text(dir / "posterior_summary.json"));
  REQUIRE(summary["rows"].size() == 4);
  CHECK(summary["rows"][0]["method"] == "Method 4");
  CHECK(summary["rows"][0]["representation"] == "P1009");
  CHECK(summary["rows"][3]["credible_interval_95"].size() == 2);

  const auto report = json::parse(io::read_text(dir / "report" / "report.json"));
  for (const char* k : {"variance_explained", "surrogate_r2", "posterior_summary", "diagnostics", "fuq", "figures"}) {
    CHECK_MESSAGE(report.contains(k), k);
  }
  const auto fuq = json::parse(io::read_text(dir / "manifests" / "fuq.json"));
  CHECK(fuq["metrics"]["posterior_mean_width"].get<double>() < fuq["metrics"]["prior_mean_width"].get<double>());

  SUBCASE("reruns are byte-identical outside the manifests") {
    const auto dir2 = scratch("m4b");
    run_all(small_config(dir2));
    CHECK(artifact_bytes(dir) == artifact_bytes(dir2));
  }
}

TEST_CASE("surrogate and full-model posterior bands agree") {
  const auto dir = scratch("paths");
  PipelineConfig c = small_config(dir, "method3");
  c.design_size = 60;
  const auto design = make_design(c);
  const auto curves = simulate_design(c, design);
  const auto aligned = align_curves(c, curves);
  const auto data = build_score_space(c, curves, &aligned);
  const auto trained = train_scores(c, design, data.scores);
  const auto inference = infer(c, data.space, trained.model, curves);
  const auto v = forward_validate(c, inference, data.space, trained.model);
  REQUIRE(v.surrogate_band.has_value());

  // Curve-space validation RMSE of the surrogate on held-out design points.
  const auto test_rows = split_data(design.size(), SplitProportions{}, c.split_seed).test;
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i : test_rows) {
    const auto rec = data.space.decode(trained.model->predict(design[i]).mean);
    for (std::size_t k = 0; k < rec.size(); ++k, ++n) se += std::pow(rec.values[k] - curves[i].values[k], 2);
  }
  const double rmse = std::sqrt(se / static_cast<double>(n));
  double diff = 0.0;
  for (std::size_t k = 0; k < c.grid.size(); ++k) diff += std::pow(v.surrogate_band->mean[k] - v.posterior_band.mean[k], 2);
  CHECK(std::sqrt(diff / static_cast<double>(c.grid.size())) <= 2.0 * rmse);
  CHECK(v.posterior_band.mean_width() < v.prior_band.mean_width());
  CHECK(v.validation_coverage.size() == 2);
}
