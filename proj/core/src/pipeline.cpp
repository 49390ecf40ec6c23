#include "iuq/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "iuq/errors.hpp"
#include "iuq/io.hpp"
#include "iuq/numeric.hpp"
#include "iuq/svg.hpp"

namespace iuq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kStageVersion = 1;

// ---- configuration --------------------------------------------------------

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(fmt::format("unknown key '{}{}'", where.empty() ? "" : where + ".", item.key()));
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}.{}' has the wrong type", where, key));
  }
}

std::array<double, kNumParameters> read_vec4(const json& obj, const char* key, const std::string& where) {
  std::vector<double> v;
  read_field(obj, key, v, where);
  if (v.size() != kNumParameters) throw ConfigError(fmt::format("'{}.{}' needs 4 numbers", where, key));
  return {v[0], v[1], v[2], v[3]};
}

PcaMethod parse_pca_method(const std::string& s) {
  if (s == "conventional") return PcaMethod::Conventional;
  if (s == "fpca") return PcaMethod::Functional;
  throw ConfigError("pca.method must be 'conventional' or 'fpca'");
}

SurrogateKind parse_kind(const std::string& s) {
  try {
    return parse_surrogate_kind(s);
  } catch (const Error&) {
    throw ConfigError("surrogate.kind must be 'gp', 'dnn' or 'bnn'");
  }
}

json config_json(const PipelineConfig& c) {
  json lower = json::array(), upper = json::array();
  for (const auto& b : c.prior) {
    lower.push_back(b.lower);
    upper.push_back(b.upper);
  }
  return {
      {"version", c.version},
      {"preset", c.preset},
      {"output_dir", c.output_dir.string()},
      {"grid", {{"t_start", c.grid.t_start()}, {"t_end", c.grid.t_end()}, {"n_points", c.grid.size()}}},
      {"design", {{"size", c.design_size}, {"seed", c.design_seed}}},
      {"prior", {{"lower", lower}, {"upper", upper}}},
      {"pca",
       {{"method", std::string(to_string(c.pca_method))},
        {"variance_target", c.variance_target},
        {"amplitude_components", c.amplitude_components},
        {"phase_components", c.phase_components}}},
      {"alignment",
       {{"iterations", c.alignment.iterations},
        {"penalty", c.alignment.warp.penalty},
        {"max_step", c.alignment.warp.max_step},
        {"coarse_lattice_nodes", c.alignment.warp.coarse_lattice_nodes},
        {"max_full_lattice", c.alignment.warp.max_full_lattice},
        {"refine_band", c.alignment.warp.refine_band},
        {"subgrid_factor", c.alignment.warp.subgrid_factor}}},
      {"surrogate",
       {{"kind", std::string(to_string(c.surrogate))}, {"split_seed", c.split_seed}, {"seed", c.surrogate_seed}}},
      {"likelihood",
       {{"use_code_uncertainty", c.use_code_uncertainty},
        {"sigma_exp", c.sigma_exp},
        {"score_noise", std::string(to_string(c.score_noise))},
        {"phase_inflation", c.phase_inflation},
        {"noise_references", c.noise_references},
        {"noise_replicates", c.noise_replicates},
        {"experiment_smoothing_s", c.experiment_smoothing}}},
      {"mcmc",
       {{"n_samples", c.mcmc.n_samples},
        {"burn_in", c.mcmc.burn_in},
        {"thin", c.mcmc.thin},
        {"seed", c.mcmc.seed},
        {"chains", c.chains}}},
      {"experiment",
       {{"theta_true", c.theta_true.values},
        {"noise_std", c.experiment_noise},
        {"seed", c.experiment_seed},
        {"csv", c.experiment_csv ? json(c.experiment_csv->string()) : json(nullptr)},
        {"validation_seeds", c.validation_seeds}}},
      {"fuq",
       {{"level", c.band_level},
        {"prior_samples", c.prior_samples},
        {"posterior_path", std::string(to_string(c.posterior_path))},
        {"seed", c.fuq_seed}}},
  };
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string hash_text(const std::string& s) { return hex64(numeric::fnv1a64({s.data(), s.size()})); }

// ---- artifacts ------------------------------------------------------------

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path manifest_path(const PipelineConfig& c, Stage s) {
  return c.output_dir / "manifests" / (std::string(to_string(s)) + ".json");
}

json read_upstream(const PipelineConfig& c, Stage stage, Stage upstream) {
  const fs::path p = manifest_path(c, upstream);
  if (!fs::exists(p)) {
    throw DependencyError(fmt::format("stage '{}' needs stage '{}' first: {} not found", to_string(stage),
                                      to_string(upstream), p.string()));
  }
  json m;
  try {
    m = json::parse(io::read_text(p));
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
  if (m.value("fingerprint", "") != stage_fingerprint(c, upstream)) {
    throw DependencyError(fmt::format("stage '{}' output in {} was produced with a different configuration; rerun it",
                                      to_string(upstream), c.output_dir.string()));
  }
  return m;
}

fs::path write_manifest(const PipelineConfig& c, Stage s, json outputs, json metrics) {
  json m = {{"stage", std::string(to_string(s))},
            {"stage_version", kStageVersion},
            {"config_hash", hash_text(config_to_json(c))},
            {"fingerprint", stage_fingerprint(c, s)},
            {"preset", c.preset},
            {"created_utc", utc_now()},
            {"outputs", std::move(outputs)},
            {"metrics", std::move(metrics)}};
  const fs::path p = manifest_path(c, s);
  io::write_text(p, m.dump(2) + "\n");
  return p;
}

std::string curve_file(std::size_t i) { return fmt::format("curves/curve_{:03d}.csv", i); }

std::vector<std::string> score_header(std::size_t m) {
  std::vector<std::string> h;
  for (std::size_t k = 0; k < m; ++k) h.push_back(fmt::format("pc{}", k));
  return h;
}

json summary_json(const PipelineConfig& c, const PosteriorSummary& s) {
  std::string method = c.preset;
  if (method.rfind("method", 0) == 0) method = "Method " + method.substr(6);
  json rows = json::array();
  for (const auto& r : s) {
    rows.push_back({{"method", method},
                    {"representation", r.name},
                    {"mean_value", r.mean},
                    {"standard_deviation", r.std},
                    {"credible_interval_95", {r.lower, r.upper}}});
  }
  return {{"columns", {"method", "representation", "mean_value", "standard_deviation", "credible_interval_95"}},
          {"rows", rows}};
}

std::vector<TransientCurve> read_curves(const PipelineConfig& c, const std::vector<std::size_t>& idx) {
  std::vector<TransientCurve> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    TransientCurve curve = io::read_curve_csv(c.output_dir / curve_file(i));
    if (!(curve.grid == c.grid)) throw ParseError(curve_file(i) + ": grid differs from the configured grid");
    out.push_back(std::move(curve));
  }
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> reference_indices(const PipelineConfig& c) {
  const std::size_t m = std::min(c.noise_references, c.design_size);
  std::vector<std::size_t> v;
  for (std::size_t k = 0; k < m; ++k) v.push_back(k * c.design_size / m);
  return v;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string posterior_summary_json(const PipelineConfig& config, const PosteriorSummary& summary) {
  return summary_json(config, summary).dump(2);
}

// ---- names ----------------------------------------------------------------

std::string_view to_string(PcaMethod m) { return m == PcaMethod::Conventional ? "conventional" : "fpca"; }
std::string_view to_string(ScoreNoiseModel m) { return m == ScoreNoiseModel::Linear ? "linear" : "sampled"; }
std::string_view to_string(PropagationPath p) {
  return p == PropagationPath::FullModel ? "full_model" : "surrogate";
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Sample: return "sample";
    case Stage::Simulate: return "simulate";
    case Stage::Align: return "align";
    case Stage::Pca: return "pca";
    case Stage::Train: return "train";
    case Stage::Iuq: return "iuq";
    case Stage::Fuq: return "fuq";
    case Stage::Report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::Sample, Stage::Simulate, Stage::Align, Stage::Pca, Stage::Train, Stage::Iuq,
                  Stage::Fuq, Stage::Report}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

// ---- presets and configuration --------------------------------------------

MethodTriple preset_triple(std::string_view preset) {
  if (preset == "method1") return {PcaMethod::Conventional, SurrogateKind::Gp, true};
  if (preset == "method2") return {PcaMethod::Conventional, SurrogateKind::Dnn, false};
  if (preset == "method3") return {PcaMethod::Functional, SurrogateKind::Dnn, false};
  if (preset == "method4") return {PcaMethod::Functional, SurrogateKind::Bnn, true};
  throw ConfigError("unknown preset '" + std::string(preset) + "' (expected method1..method4)");
}

std::optional<std::string> matching_preset(const MethodTriple& t) {
  for (const char* name : {"method1", "method2", "method3", "method4"}) {
    const MethodTriple p = preset_triple(name);
    if (p.pca == t.pca && p.surrogate == t.surrogate && p.code_uncertainty == t.code_uncertainty) return name;
  }
  return std::nullopt;
}

void apply_preset(PipelineConfig& config, std::string_view preset) {
  const MethodTriple t = preset_triple(preset);
  config.preset = std::string(preset);
  config.pca_method = t.pca;
  config.surrogate = t.surrogate;
  config.use_code_uncertainty = t.code_uncertainty;
}

void set_all_seeds(PipelineConfig& config, std::uint64_t seed) {
  config.design_seed = seed;
  config.split_seed = seed;
  config.surrogate_seed = seed;
  config.mcmc.seed = seed;
  config.experiment_seed = seed;
  config.fuq_seed = seed;
}

void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.version != kConfigVersion) fail(fmt::format("unsupported config version {} (expected {})", c.version, kConfigVersion));
  if (c.grid.size() < 10) fail("grid.n_points must be >= 10");
  if (c.design_size < 1) fail("design.size must be >= 1");
  for (std::size_t d = 0; d < kNumParameters; ++d) {
    const auto& b = c.prior[d];
    if (!(std::isfinite(b.lower) && std::isfinite(b.upper) && b.lower < b.upper)) fail("prior bounds need lower < upper");
    if (b.lower < 0.0 || b.upper > 5.0) fail("prior bounds must lie inside the simulator support [0, 5]");
  }
  if (!(c.variance_target > 0.0 && c.variance_target <= 1.0)) fail("pca.variance_target must lie in (0, 1]");
  if (c.amplitude_components < 1 || c.phase_components < 1) fail("pca component counts must be >= 1");
  if (c.alignment.iterations < 1) fail("alignment.iterations must be >= 1");
  if (!(c.alignment.warp.penalty >= 0.0)) fail("alignment.penalty must be >= 0");
  if (c.alignment.warp.max_step < 1) fail("alignment.max_step must be >= 1");
  if (c.alignment.warp.subgrid_factor < 1) fail("alignment.subgrid_factor must be >= 1");
  if (c.alignment.warp.coarse_lattice_nodes < 10) fail("alignment.coarse_lattice_nodes must be >= 10");
  if (!(c.sigma_exp > 0.0)) fail("likelihood.sigma_exp must be > 0");
  if (!(c.phase_inflation >= 0.0)) fail("likelihood.phase_inflation must be >= 0");
  if (c.noise_references < 1 || c.noise_replicates < 1) fail("likelihood noise references and replicates must be >= 1");
  if (!(c.experiment_smoothing >= 0.0)) fail("likelihood.experiment_smoothing_s must be >= 0");
  if (c.mcmc.thin < 1) fail("mcmc.thin must be >= 1");
  if (c.mcmc.n_samples <= c.mcmc.burn_in) fail("mcmc.n_samples must exceed mcmc.burn_in");
  if ((c.mcmc.n_samples - c.mcmc.burn_in) / c.mcmc.thin < 10) fail("mcmc settings must retain at least 10 samples");
  if (c.chains < 1) fail("mcmc.chains must be >= 1");
  if (!(c.experiment_noise >= 0.0)) fail("experiment.noise_std must be >= 0");
  if (!c.experiment_csv && !within_bounds(c.theta_true, c.prior)) fail("experiment.theta_true must lie inside the prior");
  if (!(c.band_level > 0.0 && c.band_level < 1.0)) fail("fuq.level must lie in (0, 1)");
  if (c.prior_samples < 50) fail("fuq.prior_samples must be >= 50");
  if (c.preset != "custom") {
    const MethodTriple t = preset_triple(c.preset);
    if (t.pca != c.pca_method || t.surrogate != c.surrogate || t.code_uncertainty != c.use_code_uncertainty) {
      fail("method settings contradict preset '" + c.preset + "'");
    }
  }
}

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"version", "preset", "output_dir", "grid", "design", "prior", "pca", "alignment", "surrogate",
                     "likelihood", "mcmc", "experiment", "fuq"},
                 "");
  PipelineConfig c;
  if (!j.contains("version")) throw ConfigError("config needs a 'version' field");
  read_field(j, "version", c.version, "config");
  if (c.version != kConfigVersion) {
    throw ConfigError(fmt::format("unsupported config version {} (expected {})", c.version, kConfigVersion));
  }
  std::optional<std::string> preset;
  if (j.contains("preset")) {
    std::string p;
    read_field(j, "preset", p, "config");
    preset = p;
  }
  std::string out = c.output_dir.string();
  read_field(j, "output_dir", out, "config");
  c.output_dir = out;

  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, {"t_start", "t_end", "n_points"}, "grid");
    double t0 = c.grid.t_start(), t1 = c.grid.t_end();
    std::size_t n = c.grid.size();
    read_field(g, "t_start", t0, "grid");
    read_field(g, "t_end", t1, "grid");
    read_field(g, "n_points", n, "grid");
    try {
      c.grid = TimeGrid(t0, t1, n);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }
  if (j.contains("design")) {
    const json& d = j["design"];
    reject_unknown(d, {"size", "seed"}, "design");
    read_field(d, "size", c.design_size, "design");
    read_field(d, "seed", c.design_seed, "design");
  }
  if (j.contains("prior")) {
    const json& p = j["prior"];
    reject_unknown(p, {"lower", "upper"}, "prior");
    if (p.contains("lower")) {
      const auto lo = read_vec4(p, "lower", "prior");
      for (std::size_t d = 0; d < kNumParameters; ++d) c.prior[d].lower = lo[d];
    }
    if (p.contains("upper")) {
      const auto hi = read_vec4(p, "upper", "prior");
      for (std::size_t d = 0; d < kNumParameters; ++d) c.prior[d].upper = hi[d];
    }
  }

  std::optional<PcaMethod> method;
  std::optional<SurrogateKind> kind;
  std::optional<bool> code_unc;
  if (j.contains("pca")) {
    const json& p = j["pca"];
    reject_unknown(p, {"method", "variance_target", "amplitude_components", "phase_components"}, "pca");
    if (p.contains("method")) {
      std::string m;
      read_field(p, "method", m, "pca");
      method = parse_pca_method(m);
    }
    read_field(p, "variance_target", c.variance_target, "pca");
    read_field(p, "amplitude_components", c.amplitude_components, "pca");
    read_field(p, "phase_components", c.phase_components, "pca");
  }
  if (j.contains("alignment")) {
    const json& a = j["alignment"];
    reject_unknown(a, {"iterations", "penalty", "max_step", "coarse_lattice_nodes", "max_full_lattice", "refine_band",
                       "subgrid_factor"},
                   "alignment");
    read_field(a, "iterations", c.alignment.iterations, "alignment");
    read_field(a, "penalty", c.alignment.warp.penalty, "alignment");
    read_field(a, "max_step", c.alignment.warp.max_step, "alignment");
    read_field(a, "coarse_lattice_nodes", c.alignment.warp.coarse_lattice_nodes, "alignment");
    read_field(a, "max_full_lattice", c.alignment.warp.max_full_lattice, "alignment");
    read_field(a, "refine_band", c.alignment.warp.refine_band, "alignment");
    read_field(a, "subgrid_factor", c.alignment.warp.subgrid_factor, "alignment");
  }
  if (j.contains("surrogate")) {
    const json& s = j["surrogate"];
    reject_unknown(s, {"kind", "split_seed", "seed"}, "surrogate");
    if (s.contains("kind")) {
      std::string k;
      read_field(s, "kind", k, "surrogate");
      kind = parse_kind(k);
    }
    read_field(s, "split_seed", c.split_seed, "surrogate");
    read_field(s, "seed", c.surrogate_seed, "surrogate");
  }
  if (j.contains("likelihood")) {
    const json& l = j["likelihood"];
    reject_unknown(l, {"use_code_uncertainty", "sigma_exp", "score_noise", "phase_inflation", "noise_references",
                       "noise_replicates", "experiment_smoothing_s"},
                   "likelihood");
    if (l.contains("use_code_uncertainty")) {
      bool b = false;
      read_field(l, "use_code_uncertainty", b, "likelihood");
      code_unc = b;
    }
    read_field(l, "sigma_exp", c.sigma_exp, "likelihood");
    if (l.contains("score_noise")) {
      std::string m;
      read_field(l, "score_noise", m, "likelihood");
      if (m == "linear") {
        c.score_noise = ScoreNoiseModel::Linear;
      } else if (m == "sampled") {
        c.score_noise = ScoreNoiseModel::Sampled;
      } else {
        throw ConfigError("likelihood.score_noise must be 'linear' or 'sampled'");
      }
    }
    read_field(l, "phase_inflation", c.phase_inflation, "likelihood");
    read_field(l, "noise_references", c.noise_references, "likelihood");
    read_field(l, "noise_replicates", c.noise_replicates, "likelihood");
    read_field(l, "experiment_smoothing_s", c.experiment_smoothing, "likelihood");
  }
  if (j.contains("mcmc")) {
    const json& m = j["mcmc"];
    reject_unknown(m, {"n_samples", "burn_in", "thin", "seed", "chains"}, "mcmc");
    read_field(m, "n_samples", c.mcmc.n_samples, "mcmc");
    read_field(m, "burn_in", c.mcmc.burn_in, "mcmc");
    read_field(m, "thin", c.mcmc.thin, "mcmc");
    read_field(m, "seed", c.mcmc.seed, "mcmc");
    read_field(m, "chains", c.chains, "mcmc");
  }
  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    reject_unknown(e, {"theta_true", "noise_std", "seed", "csv", "validation_seeds"}, "experiment");
    if (e.contains("theta_true")) c.theta_true.values = read_vec4(e, "theta_true", "experiment");
    read_field(e, "noise_std", c.experiment_noise, "experiment");
    read_field(e, "seed", c.experiment_seed, "experiment");
    if (e.contains("csv") && !e["csv"].is_null()) {
      std::string p;
      read_field(e, "csv", p, "experiment");
      c.experiment_csv = p;
    }
    read_field(e, "validation_seeds", c.validation_seeds, "experiment");
  }
  if (j.contains("fuq")) {
    const json& f = j["fuq"];
    reject_unknown(f, {"level", "prior_samples", "posterior_path", "seed"}, "fuq");
    read_field(f, "level", c.band_level, "fuq");
    read_field(f, "prior_samples", c.prior_samples, "fuq");
    if (f.contains("posterior_path")) {
      std::string p;
      read_field(f, "posterior_path", p, "fuq");
      if (p == "full_model") {
        c.posterior_path = PropagationPath::FullModel;
      } else if (p == "surrogate") {
        c.posterior_path = PropagationPath::Surrogate;
      } else {
        throw ConfigError("fuq.posterior_path must be 'full_model' or 'surrogate'");
      }
    }
    read_field(f, "seed", c.fuq_seed, "fuq");
  }

  // Method triple: a named preset fixes it; explicit settings must agree.
  if (preset && *preset != "custom") {
    apply_preset(c, *preset);
    const MethodTriple t = preset_triple(*preset);
    if ((method && *method != t.pca) || (kind && *kind != t.surrogate) || (code_unc && *code_unc != t.code_uncertainty)) {
      throw ConfigError("pca.method / surrogate.kind / likelihood.use_code_uncertainty contradict preset '" + *preset +
                        "'");
    }
  } else {
    const MethodTriple base = preset_triple("method4");
    c.pca_method = method.value_or(base.pca);
    c.surrogate = kind.value_or(base.surrogate);
    c.use_code_uncertainty = code_unc.value_or(base.code_uncertainty);
    if (preset) {
      c.preset = "custom";
    } else if (auto name = matching_preset({c.pca_method, c.surrogate, c.use_code_uncertainty})) {
      c.preset = *name;
    } else {
      throw ConfigError("method settings match none of method1..method4; set \"preset\": \"custom\"");
    }
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string config_to_json(const PipelineConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string stage_fingerprint(const PipelineConfig& config, Stage stage) {
  const json full = config_json(config);
  json part = {{"version", full["version"]}, {"design", full["design"]}, {"prior", full["prior"]}};
  const int level = static_cast<int>(stage);
  if (level >= static_cast<int>(Stage::Simulate)) part["grid"] = full["grid"];
  if (level >= static_cast<int>(Stage::Align)) {
    part["pca_method"] = full["pca"]["method"];
    part["alignment"] = full["alignment"];
  }
  if (level >= static_cast<int>(Stage::Pca)) part["pca"] = full["pca"];
  if (level >= static_cast<int>(Stage::Train)) part["surrogate"] = full["surrogate"];
  if (level >= static_cast<int>(Stage::Iuq)) {
    part["likelihood"] = full["likelihood"];
    part["mcmc"] = full["mcmc"];
    part["experiment"] = full["experiment"];
  }
  if (level >= static_cast<int>(Stage::Fuq)) part["fuq"] = full["fuq"];
  return hash_text(part.dump());
}

// ---- in-memory stages ------------------------------------------------------

std::vector<CalibrationVector> make_design(const PipelineConfig& config) {
  return lhs_sample(config.design_size, config.prior, config.design_seed);
}

std::vector<TransientCurve> simulate_design(const PipelineConfig& config,
                                            const std::vector<CalibrationVector>& design) {
  std::vector<TransientCurve> out;
  out.reserve(design.size());
  for (const auto& th : design) out.push_back(simulate_pct(th, config.grid));
  return out;
}

AlignedEnsemble align_curves(const PipelineConfig& config, const std::vector<TransientCurve>& curves) {
  return align_ensemble(curves, config.alignment);
}

ScoreData build_score_space(const PipelineConfig& config, const std::vector<TransientCurve>& curves,
                            const AlignedEnsemble* aligned) {
  if (config.pca_method == PcaMethod::Conventional) {
    const DataMatrix data = curves_to_matrix(curves);
    ScoreSpace space(fit_pca(data, VarianceTarget{config.variance_target}), config.grid);
    const PcaModel& m = space.conventional();
    Eigen::MatrixXd scores = ((m.basis * (data.colwise() - m.mean))).transpose();
    return {std::move(space), std::move(scores)};
  }
  if (aligned == nullptr) throw ArgumentError("build_score_space: the functional method needs aligned curves");
  ScoreSpace space(fpca_fit(*aligned, config.amplitude_components, config.phase_components));
  const FpcaModel& f = space.functional();
  const DataMatrix w = curves_to_matrix(aligned->warped_curves);
  const DataMatrix g = warps_to_matrix(aligned->warpings);
  Eigen::MatrixXd scores(w.cols(), static_cast<Eigen::Index>(space.dim()));
  const auto ka = static_cast<Eigen::Index>(f.amplitude.retained());
  scores.leftCols(ka) = (f.amplitude.basis * (w.colwise() - f.amplitude.mean)).transpose();
  scores.rightCols(scores.cols() - ka) = (f.phase.basis * (g.colwise() - f.phase.mean)).transpose();
  return {std::move(space), std::move(scores)};
}

TrainedSurrogate train_scores(const PipelineConfig& config, const std::vector<CalibrationVector>& design,
                              const Eigen::MatrixXd& scores) {
  SurrogateTrainOptions opts;
  opts.seed = config.surrogate_seed;
  opts.gp.seed = config.surrogate_seed;
  return train_surrogate(config.surrogate, design_matrix(design), scores,
                         split_data(design.size(), {}, config.split_seed), opts);
}

ExperimentalCurve make_experiment(const PipelineConfig& config) {
  if (config.experiment_csv) {
    TransientCurve c = io::read_curve_csv(*config.experiment_csv);
    if (!(c.grid == config.grid)) {
      throw ConfigError(config.experiment_csv->string() + ": experiment grid differs from the configured grid");
    }
    return {std::move(c), config.sigma_exp, "measured"};
  }
  return synth_experiment(config.theta_true, config.grid, config.experiment_noise, config.experiment_seed,
                          "synthetic");
}

Eigen::MatrixXd experimental_score_covariance(const PipelineConfig& config, const ScoreSpace& space,
                                              const std::vector<TransientCurve>& curves) {
  if (config.score_noise == ScoreNoiseModel::Linear || !space.is_functional()) {
    return linear_score_covariance(space, config.sigma_exp, config.phase_inflation);
  }
  std::vector<TransientCurve> refs;
  if (curves.size() == config.design_size) {
    for (std::size_t i : reference_indices(config)) refs.push_back(curves[i]);
  } else {
    refs = curves;
  }
  return sampled_score_covariance(space, refs, config.sigma_exp, config.noise_replicates,
                                  config.experiment_smoothing, config.experiment_seed ^ 0x5bd1e995ULL);
}

InferenceResult infer(const PipelineConfig& config, const ScoreSpace& space,
                      std::shared_ptr<const ScoreSurrogate> surrogate, const std::vector<TransientCurve>& curves) {
  ExperimentalCurve experiment = make_experiment(config);
  Eigen::VectorXd y = space.encode(experiment.curve, config.alignment.warp, config.experiment_smoothing);
  Eigen::MatrixXd sigma = experimental_score_covariance(config, space, curves);
  LikelihoodSpec spec{y, sigma, surrogate, config.use_code_uncertainty};
  validate(spec);
  const PriorSpec prior{config.prior};
  const LogDensity logp = [&](const CalibrationVector& th) { return log_posterior(th, spec, prior); };

  std::vector<PosteriorChain> chains;
  std::vector<CalibrationVector> pooled;
  for (std::size_t k = 0; k < config.chains; ++k) {
    McmcOptions o = config.mcmc;
    o.seed = config.mcmc.seed + k;
    chains.push_back(adaptive_mcmc(logp, chain_start(prior, k, config.mcmc.seed), o));
    const auto kept = chains.back().retained();
    pooled.insert(pooled.end(), kept.begin(), kept.end());
  }
  InferenceResult r{std::move(experiment), std::move(y), std::move(sigma), std::move(chains), std::move(pooled),
                    {}, {}, {}};
  r.summary = posterior_summary(r.posterior);
  r.diagnostics = chain_diagnostics(r.chains);
  r.correlations = parameter_correlations(r.posterior);
  return r;
}

ValidationResult forward_validate(const PipelineConfig& config, const InferenceResult& inference,
                                  const ScoreSpace& space, std::shared_ptr<const ScoreSurrogate> surrogate) {
  const CurveModel full = full_model_path(config.grid);
  const CurveModel sur = surrogate_path(surrogate, space);
  const CurveModel& post_model = config.posterior_path == PropagationPath::FullModel ? full : sur;
  const std::string post_tag =
      config.posterior_path == PropagationPath::FullModel ? "posterior/full-model" : "posterior/surrogate";

  PropagateOptions o;
  o.level = config.band_level;
  o.seed = config.fuq_seed;
  o.source = "prior/full-model";
  const auto prior_samples = lhs_sample(config.prior_samples, config.prior, config.fuq_seed);
  PredictiveBand prior_band = propagate(prior_samples, full, o);
  o.source = post_tag;
  PredictiveBand posterior_band = propagate(inference.posterior, post_model, o);
  o.noise_std = config.sigma_exp;
  o.source = post_tag + "+noise";
  PredictiveBand predictive = propagate(inference.posterior, post_model, o);
  o.noise_std = 0.0;
  o.source = "posterior/surrogate";
  PredictiveBand surrogate_band = propagate(inference.posterior, sur, o);

  ValidationResult r{std::move(prior_band), std::move(posterior_band), std::move(predictive),
                     std::move(surrogate_band), 0.0, {}};
  r.coverage = coverage(r.predictive_band, inference.experiment);
  if (!config.experiment_csv) {
    for (std::uint64_t seed : config.validation_seeds) {
      const auto fresh = synth_experiment(config.theta_true, config.grid, config.experiment_noise, seed);
      r.validation_coverage.push_back(coverage(r.predictive_band, fresh));
    }
  }
  return r;
}

// ---- file-backed stages ----------------------------------------------------

namespace {

fs::path stage_sample(const PipelineConfig& c) {
  const auto design = make_design(c);
  io::write_design_csv(c.output_dir / "design.csv", design);
  return write_manifest(c, Stage::Sample, {"design.csv"}, {{"design_size", design.size()}});
}

fs::path stage_simulate(const PipelineConfig& c) {
  read_upstream(c, Stage::Simulate, Stage::Sample);
  const auto design = io::read_design_csv(c.output_dir / "design.csv");
  if (design.size() != c.design_size) throw ParseError("design.csv: row count differs from design.size");
  const auto curves = simulate_design(c, design);
  for (std::size_t i = 0; i < curves.size(); ++i) io::write_curve_csv(c.output_dir / curve_file(i), curves[i]);
  return write_manifest(c, Stage::Simulate, {"curves/"}, {{"curve_count", curves.size()}});
}

fs::path stage_align(const PipelineConfig& c) {
  read_upstream(c, Stage::Align, Stage::Simulate);
  if (c.pca_method == PcaMethod::Conventional) {
    return write_manifest(c, Stage::Align, json::array(), {{"skipped", true}});
  }
  const auto curves = read_curves(c, all_indices(c.design_size));
  const AlignedEnsemble aligned = align_curves(c, curves);
  io::write_aligned_ensemble(c.output_dir / "aligned", aligned);
  const LandmarkSpread before = landmark_spread(curves);
  const LandmarkSpread after = landmark_spread(aligned.warped_curves);
  json metrics = {{"skipped", false},
                  {"peak_time_std_before", before.peak_time_std},
                  {"peak_time_std_after", after.peak_time_std},
                  {"quench_time_std_before", before.quench_time_std},
                  {"quench_time_std_after", after.quench_time_std}};
  return write_manifest(c, Stage::Align, {"aligned/"}, metrics);
}

fs::path stage_pca(const PipelineConfig& c) {
  read_upstream(c, Stage::Pca, Stage::Simulate);
  read_upstream(c, Stage::Pca, Stage::Align);
  const auto curves = read_curves(c, all_indices(c.design_size));
  std::optional<AlignedEnsemble> aligned;
  if (c.pca_method == PcaMethod::Functional) aligned = io::read_aligned_ensemble(c.output_dir / "aligned", c.design_size);
  const ScoreData sd = build_score_space(c, curves, aligned ? &*aligned : nullptr);
  io::save_score_space(c.output_dir / "score_space.json", sd.space);
  io::write_matrix_csv(c.output_dir / "scores.csv", score_header(sd.space.dim()), sd.scores);
  json metrics = {{"method", std::string(to_string(c.pca_method))}, {"score_dim", sd.space.dim()}};
  if (sd.space.is_functional()) {
    metrics["amplitude_retained_variance"] = sd.space.functional().amplitude.retained_explained();
    metrics["phase_retained_variance"] = sd.space.functional().phase.retained_explained();
  } else {
    metrics["retained_variance"] = sd.space.conventional().retained_explained();
  }
  return write_manifest(c, Stage::Pca, {"score_space.json", "scores.csv"}, metrics);
}

fs::path stage_train(const PipelineConfig& c) {
  read_upstream(c, Stage::Train, Stage::Sample);
  const json pca = read_upstream(c, Stage::Train, Stage::Pca);
  const auto design = io::read_design_csv(c.output_dir / "design.csv");
  const std::size_t m = pca.at("metrics").at("score_dim").get<std::size_t>();
  const Eigen::MatrixXd scores = io::read_matrix_csv(c.output_dir / "scores.csv", score_header(m));
  if (static_cast<std::size_t>(scores.rows()) != design.size()) throw ParseError("scores.csv: row count differs from the design");
  const TrainedSurrogate t = train_scores(c, design, scores);
  io::save_surrogate(c.output_dir / "surrogate.json", *t.model);
  json outputs = {"surrogate.json"};
  if (const auto* d = dynamic_cast<const DnnSurrogate*>(t.model.get())) {
    for (std::size_t k = 0; k < d->models().size(); ++k) {
      const std::string f = fmt::format("training/pc{}.csv", k);
      io::write_training_log_csv(c.output_dir / f, d->models()[k].history);
      outputs.push_back(f);
    }
  } else if (const auto* b = dynamic_cast<const BnnSurrogate*>(t.model.get())) {
    for (std::size_t k = 0; k < b->models().size(); ++k) {
      const std::string f = fmt::format("training/pc{}.csv", k);
      io::write_training_log_csv(c.output_dir / f, b->models()[k].history);
      outputs.push_back(f);
    }
  }
  return write_manifest(c, Stage::Train, outputs,
                        {{"kind", std::string(to_string(c.surrogate))}, {"test_r2", t.test_r2}, {"test_rmse", t.test_rmse}});
}

fs::path stage_iuq(const PipelineConfig& c) {
  read_upstream(c, Stage::Iuq, Stage::Simulate);
  read_upstream(c, Stage::Iuq, Stage::Pca);
  read_upstream(c, Stage::Iuq, Stage::Train);
  const ScoreSpace space = io::load_score_space(c.output_dir / "score_space.json");
  const auto surrogate = io::load_surrogate(c.output_dir / "surrogate.json");
  const auto refs = read_curves(c, reference_indices(c));
  const InferenceResult r = infer(c, space, surrogate, refs);

  io::write_curve_csv(c.output_dir / "experiment.csv", r.experiment.curve);
  json outputs = {"experiment.csv", "likelihood.json", "posterior_summary.json"};
  for (std::size_t k = 0; k < r.chains.size(); ++k) {
    const std::string f = fmt::format("chains/chain_{}.csv", k);
    io::write_chain_csv(c.output_dir / f, r.chains[k]);
    outputs.push_back(f);
  }
  json sigma = json::array();
  for (Eigen::Index i = 0; i < r.sigma_exp_pc.rows(); ++i) sigma.push_back(vec_json(r.sigma_exp_pc.row(i).transpose()));
  io::write_text(c.output_dir / "likelihood.json",
                 json({{"data_scores", vec_json(r.data_scores)},
                       {"sigma_exp_pc", sigma},
                       {"use_code_uncertainty", c.use_code_uncertainty},
                       {"score_noise", std::string(to_string(c.score_noise))}})
                         .dump(1) +
                     "\n");
  io::write_text(c.output_dir / "posterior_summary.json", posterior_summary_json(c, r.summary) + "\n");

  json rows = json::array();
  for (const auto& s : r.summary) rows.push_back(format_summary_row(s));
  json corr = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int k = 0; k < 4; ++k) {
      const double v = r.correlations.values(i, k);
      row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    corr.push_back(row);
  }
  json metrics = {{"acceptance", r.diagnostics.acceptance},
                  {"r_hat", r.diagnostics.r_hat},
                  {"autocorrelation_time", r.diagnostics.autocorrelation_time},
                  {"effective_sample_size", r.diagnostics.effective_sample_size},
                  {"retained_samples", r.posterior.size()},
                  {"summary_rows", rows},
                  {"correlations", corr}};
  return write_manifest(c, Stage::Iuq, outputs, metrics);
}

InferenceResult reload_inference(const PipelineConfig& c) {
  InferenceResult r{ExperimentalCurve{io::read_curve_csv(c.output_dir / "experiment.csv"),
                                      c.experiment_csv ? c.sigma_exp : c.experiment_noise,
                                      c.experiment_csv ? "measured" : "synthetic"},
                    {}, {}, {}, {}, {}, {}, {}};
  for (std::size_t k = 0; k < c.chains; ++k) {
    PosteriorChain ch =
        io::read_chain_csv(c.output_dir / fmt::format("chains/chain_{}.csv", k), c.mcmc.burn_in, c.mcmc.thin);
    const auto kept = ch.retained();
    r.posterior.insert(r.posterior.end(), kept.begin(), kept.end());
    r.chains.push_back(std::move(ch));
  }
  return r;
}

fs::path stage_fuq(const PipelineConfig& c) {
  read_upstream(c, Stage::Fuq, Stage::Iuq);
  const ScoreSpace space = io::load_score_space(c.output_dir / "score_space.json");
  const auto surrogate = io::load_surrogate(c.output_dir / "surrogate.json");
  const InferenceResult inf = reload_inference(c);
  const ValidationResult v = forward_validate(c, inf, space, surrogate);
  io::write_band_csv(c.output_dir / "bands/prior.csv", v.prior_band);
  io::write_band_csv(c.output_dir / "bands/posterior.csv", v.posterior_band);
  io::write_band_csv(c.output_dir / "bands/predictive.csv", v.predictive_band);
  json outputs = {"bands/prior.csv", "bands/posterior.csv", "bands/predictive.csv"};
  if (v.surrogate_band) {
    io::write_band_csv(c.output_dir / "bands/posterior_surrogate.csv", *v.surrogate_band);
    outputs.push_back("bands/posterior_surrogate.csv");
  }
  json metrics = {{"coverage", v.coverage},
                  {"validation_coverage", v.validation_coverage},
                  {"validation_seeds", c.experiment_csv ? std::vector<std::uint64_t>{} : c.validation_seeds},
                  {"prior_mean_width", v.prior_band.mean_width()},
                  {"posterior_mean_width", v.posterior_band.mean_width()},
                  {"predictive_mean_width", v.predictive_band.mean_width()},
                  {"failures", v.posterior_band.failures},
                  {"level", c.band_level}};
  return write_manifest(c, Stage::Fuq, outputs, metrics);
}

std::vector<double> to_vec(const std::vector<double>& v) { return v; }

fs::path stage_report(const PipelineConfig& c) {
  const json pca = read_upstream(c, Stage::Report, Stage::Pca);
  const json align = read_upstream(c, Stage::Report, Stage::Align);
  const json train = read_upstream(c, Stage::Report, Stage::Train);
  const json iuq = read_upstream(c, Stage::Report, Stage::Iuq);
  const json fuq = read_upstream(c, Stage::Report, Stage::Fuq);
  const ScoreSpace space = io::load_score_space(c.output_dir / "score_space.json");
  const InferenceResult inf = reload_inference(c);

  // Explained variance curves.
  svg::Chart var_chart("Cumulative explained variance", "number of PCs", "fraction");
  auto add_cumulative = [&](const PcaModel& m, const std::string& label, const std::string& color) {
    const Eigen::VectorXd r = m.explained_variance_ratio();
    svg::Series s;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(r.size(), 10); ++k) {
      acc += r(k);
      s.x.push_back(static_cast<double>(k + 1));
      s.y.push_back(acc);
    }
    s.label = label;
    s.color = color;
    var_chart.add(std::move(s));
  };
  json variance;
  if (space.is_functional()) {
    add_cumulative(space.functional().amplitude, "warped data", "#1f77b4");
    add_cumulative(space.functional().phase, "warping functions", "#d62728");
    variance = {{"amplitude", vec_json(space.functional().amplitude.explained_variance_ratio().head(
                                  std::min<Eigen::Index>(10, space.functional().amplitude.singular_values.size())))},
                {"phase", vec_json(space.functional().phase.explained_variance_ratio().head(
                              std::min<Eigen::Index>(10, space.functional().phase.singular_values.size())))}};
  } else {
    add_cumulative(space.conventional(), "curves", "#1f77b4");
    variance = {{"conventional", vec_json(space.conventional().explained_variance_ratio().head(
                                     std::min<Eigen::Index>(10, space.conventional().singular_values.size())))}};
  }
  io::write_text(c.output_dir / "report/variance.svg", var_chart.render());

  // Traces of the first chain.
  svg::Chart trace("MCMC trace", "step", "parameter value");
  const std::array<const char*, 4> colors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  const PosteriorChain& ch = inf.chains.front();
  const std::size_t stride = std::max<std::size_t>(1, ch.samples.size() / 2000);
  for (std::size_t d = 0; d < kNumParameters; ++d) {
    svg::Series s;
    for (std::size_t i = 0; i < ch.samples.size(); i += stride) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(ch.samples[i][d]);
    }
    std::string label(kParameterNames[d]);
    for (auto& ch2 : label) ch2 = static_cast<char>(std::toupper(static_cast<unsigned char>(ch2)));
    s.label = label;
    s.color = colors[d];
    trace.add(std::move(s));
  }
  io::write_text(c.output_dir / "report/trace.svg", trace.render());

  // Bands with the experiment overlaid.
  const double level = c.band_level;
  const PredictiveBand prior = io::read_band_csv(c.output_dir / "bands/prior.csv", level, "prior");
  const PredictiveBand post = io::read_band_csv(c.output_dir / "bands/predictive.csv", level, "posterior");
  svg::Chart bands("Forward propagation", "time (s)", "PCT (K)");
  const auto t = c.grid.times();
  bands.add(svg::Band{t, prior.lower, prior.upper, "#999999", 0.3, "prior band"});
  bands.add(svg::Band{t, post.lower, post.upper, "#1f77b4", 0.35, "posterior band"});
  bands.add(svg::Series{t, post.mean, "#1f77b4", "posterior mean", 1.5});
  bands.add(svg::Series{t, to_vec(inf.experiment.curve.values), "#000000", "experiment", 1.0});
  io::write_text(c.output_dir / "report/bands.svg", bands.render());

  json summary = json::parse(io::read_text(c.output_dir / "posterior_summary.json"));
  json report = {{"preset", c.preset},
                 {"method",
                  {{"pca", std::string(to_string(c.pca_method))},
                   {"surrogate", std::string(to_string(c.surrogate))},
                   {"code_uncertainty", c.use_code_uncertainty}}},
                 {"variance_explained", variance},
                 {"pca", pca.at("metrics")},
                 {"alignment", align.at("metrics")},
                 {"surrogate_r2", train.at("metrics").at("test_r2")},
                 {"surrogate_rmse", train.at("metrics").at("test_rmse")},
                 {"posterior_summary", summary},
                 {"diagnostics",
                  {{"acceptance", iuq.at("metrics").at("acceptance")},
                   {"r_hat", iuq.at("metrics").at("r_hat")},
                   {"effective_sample_size", iuq.at("metrics").at("effective_sample_size")}}},
                 {"correlations", iuq.at("metrics").at("correlations")},
                 {"fuq", fuq.at("metrics")},
                 {"figures", {"report/variance.svg", "report/trace.svg", "report/bands.svg"}}};
  io::write_text(c.output_dir / "report/report.json", report.dump(2) + "\n");
  return write_manifest(c, Stage::Report, {"report/report.json", "report/variance.svg", "report/trace.svg",
                                           "report/bands.svg"},
                        json::object());
}

}  // namespace

fs::path run_stage(const PipelineConfig& config, Stage stage) {
  validate(config);
  switch (stage) {
    case Stage::Sample: return stage_sample(config);
    case Stage::Simulate: return stage_simulate(config);
    case Stage::Align: return stage_align(config);
    case Stage::Pca: return stage_pca(config);
    case Stage::Train: return stage_train(config);
    case Stage::Iuq: return stage_iuq(config);
    case Stage::Fuq: return stage_fuq(config);
    case Stage::Report: return stage_report(config);
  }
  throw ArgumentError("run_stage: unknown stage");
}

void run_all(const PipelineConfig& config) {
  for (Stage s : {Stage::Sample, Stage::Simulate, Stage::Align, Stage::Pca, Stage::Train, Stage::Iuq, Stage::Fuq,
                  Stage::Report}) {
    run_stage(config, s);
  }
}

}  // namespace iuq
