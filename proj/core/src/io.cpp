#include "iuq/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "iuq/errors.hpp"

namespace iuq::io {

using nlohmann::json;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
    std::size_t b = 0;
    while (b < field.size() && field[b] == ' ') ++b;
    out.push_back(field.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& expected_header) {
  const std::string text = read_text(path);
  std::istringstream is(text);
  std::string line;
  const std::string name = path.string();
  if (!std::getline(is, line)) throw ParseError(name + ": empty file");
  CsvTable table;
  table.header = split_fields(line);
  if (table.header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw ParseError(name + ": expected header '" + want + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != expected_header.size()) {
      throw ParseError(fmt::format("{}:{}: expected {} fields, found {}", name, line_no,
                                   expected_header.size(), fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[i]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(fmt::format("{}:{}: '{}' is not a number", name, line_no, f));
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

TimeGrid grid_from_times(const std::vector<double>& t, const std::string& name) {
  if (t.size() < 2) throw ParseError(name + ": need at least 2 rows");
  TimeGrid grid = [&] {
    try {
      return TimeGrid(t.front(), t.back(), t.size());
    } catch (const ArgumentError& e) {
      throw ParseError(name + ": " + e.what());
    }
  }();
  const double tol = 1e-6 * grid.spacing();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - grid.time(i)) > tol) throw ParseError(name + ": time column is not a uniform grid");
  }
  return grid;
}

std::vector<double> column(const CsvTable& table, std::size_t c) {
  std::vector<double> out(table.rows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = table.rows[i][c];
  return out;
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::MatrixXd matrix_from(const json& j) {
  const auto r = static_cast<Eigen::Index>(j.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) throw ParseError("ragged matrix");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json grid_json(const TimeGrid& g) {
  return {{"t_start", g.t_start()}, {"t_end", g.t_end()}, {"n_points", g.size()}};
}

TimeGrid grid_from(const json& j) {
  return {j.at("t_start").get<double>(), j.at("t_end").get<double>(),
          j.at("n_points").get<std::size_t>()};
}

json pca_json(const PcaModel& m) {
  return {{"mean", to_json(m.mean)},
          {"basis", to_json(m.basis)},
          {"singular_values", to_json(m.singular_values)},
          {"n_samples", m.n_samples},
          {"truncated_to_rank", m.truncated_to_rank}};
}

PcaModel pca_from(const json& j) {
  PcaModel m;
  m.mean = vector_from(j.at("mean"));
  m.basis = matrix_from(j.at("basis"));
  m.singular_values = vector_from(j.at("singular_values"));
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.truncated_to_rank = j.at("truncated_to_rank").get<bool>();
  if (m.basis.rows() > 0 && m.basis.cols() != m.mean.size()) throw ParseError("basis width mismatch");
  return m;
}

json standardizer_json(const Standardizer& s) {
  return {{"x_mean", to_json(s.x_mean)},
          {"x_scale", to_json(s.x_scale)},
          {"y_mean", s.y_mean},
          {"y_scale", s.y_scale}};
}

Standardizer standardizer_from(const json& j) {
  Standardizer s;
  s.x_mean = vector_from(j.at("x_mean"));
  s.x_scale = vector_from(j.at("x_scale"));
  s.y_mean = j.at("y_mean").get<double>();
  s.y_scale = j.at("y_scale").get<double>();
  return s;
}

json dnn_json(const DnnModel& m) {
  json layers = json::array();
  for (const auto& l : m.network().layers()) {
    layers.push_back({{"weight", to_json(l.weight)}, {"bias", to_json(l.bias)}});
  }
  return {{"standardizer", standardizer_json(m.standardizer())},
          {"layers", layers},
          {"best_epoch", m.best_epoch}};
}

DnnModel dnn_from(const json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& l : j.at("layers")) {
    layers.push_back({matrix_from(l.at("weight")), vector_from(l.at("bias"))});
  }
  DnnModel m(Mlp(std::move(layers)), standardizer_from(j.at("standardizer")));
  m.best_epoch = j.at("best_epoch").get<int>();
  return m;
}

json bnn_json(const BnnModel& m) {
  json layers = json::array();
  for (const auto& l : m.layers()) {
    layers.push_back({{"weight_mean", to_json(l.weight_mean)},
                      {"weight_log_std", to_json(l.weight_log_std)},
                      {"bias", to_json(l.bias)}});
  }
  return {{"standardizer", standardizer_json(m.standardizer())},
          {"layers", layers},
          {"log_noise_std", m.log_noise_std()},
          {"prior_std", m.prior_std()},
          {"best_epoch", m.best_epoch}};
}

BnnModel bnn_from(const json& j) {
  std::vector<VariationalLayer> layers;
  for (const auto& l : j.at("layers")) {
    layers.push_back({matrix_from(l.at("weight_mean")), matrix_from(l.at("weight_log_std")),
                      vector_from(l.at("bias"))});
  }
  BnnModel m(std::move(layers), standardizer_from(j.at("standardizer")),
             j.at("log_noise_std").get<double>(), j.at("prior_std").get<double>());
  m.best_epoch = j.at("best_epoch").get<int>();
  return m;
}

json shortcut_json(const StdShortcut& s) {
  json centroids = json::array();
  for (const auto& c : s.centroids) centroids.push_back({{"prediction", c.prediction}, {"std", c.std}});
  return {{"mode", s.mode == StdShortcut::Mode::Linear ? "linear" : "two_cluster"},
          {"slope", s.slope},
          {"intercept", s.intercept},
          {"centroids", centroids},
          {"silhouette", s.silhouette},
          {"floor", s.floor}};
}

StdShortcut shortcut_from(const json& j) {
  StdShortcut s;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "linear") {
    s.mode = StdShortcut::Mode::Linear;
  } else if (mode == "two_cluster") {
    s.mode = StdShortcut::Mode::TwoCluster;
  } else {
    throw ParseError("unknown shortcut mode '" + mode + "'");
  }
  s.slope = j.at("slope").get<double>();
  s.intercept = j.at("intercept").get<double>();
  const json& c = j.at("centroids");
  for (std::size_t k = 0; k < 2; ++k) {
    s.centroids[k] = {c.at(k).at("prediction").get<double>(), c.at(k).at("std").get<double>()};
  }
  s.silhouette = j.at("silhouette").get<double>();
  s.floor = j.at("floor").get<double>();
  return s;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

template <typename F>
auto parse_or_throw(const fs::path& path, F&& f) {
  try {
    return f(read_json(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    const std::string what = e.what();
    if (what.rfind(path.string(), 0) == 0) throw;
    throw ParseError(path.string() + ": " + what);
  } catch (const ArgumentError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_curve_csv(const fs::path& path, const TransientCurve& curve) {
  std::string s = "time_s,value_K\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    s += num(curve.grid.time(i)) + "," + num(curve.values[i]) + "\n";
  }
  write_text(path, s);
}

TransientCurve read_curve_csv(const fs::path& path) {
  const CsvTable t = read_csv(path, {"time_s", "value_K"});
  const TimeGrid grid = grid_from_times(column(t, 0), path.string());
  try {
    return {grid, column(t, 1)};
  } catch (const ArgumentError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_design_csv(const fs::path& path, const std::vector<CalibrationVector>& design) {
  std::string s = "p1009,p1010,p1011,p1031\n";
  for (const auto& th : design) {
    s += num(th[0]) + "," + num(th[1]) + "," + num(th[2]) + "," + num(th[3]) + "\n";
  }
  write_text(path, s);
}

std::vector<CalibrationVector> read_design_csv(const fs::path& path) {
  const CsvTable t = read_csv(path, {"p1009", "p1010", "p1011", "p1031"});
  std::vector<CalibrationVector> out(t.rows.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t d = 0; d < kNumParameters; ++d) out[i].values[d] = t.rows[i][d];
  }
  return out;
}

void write_chain_csv(const fs::path& path, const PosteriorChain& chain) {
  std::string s = "step,p1009,p1010,p1011,p1031,log_post,accepted\n";
  for (std::size_t i = 0; i < chain.samples.size(); ++i) {
    const auto& th = chain.samples[i];
    s += fmt::format("{},{},{},{},{},{},{}\n", i, num(th[0]), num(th[1]), num(th[2]), num(th[3]),
                     num(chain.log_post[i]), chain.accepted[i] ? 1 : 0);
  }
  write_text(path, s);
}

PosteriorChain read_chain_csv(const fs::path& path, std::size_t burn_in, std::size_t thin) {
  const CsvTable t =
      read_csv(path, {"step", "p1009", "p1010", "p1011", "p1031", "log_post", "accepted"});
  PosteriorChain chain;
  chain.burn_in = burn_in;
  chain.thin = thin;
  std::size_t accepted_after = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (r[0] != static_cast<double>(i)) throw ParseError(path.string() + ": steps out of order");
    CalibrationVector th;
    for (std::size_t d = 0; d < kNumParameters; ++d) th.values[d] = r[1 + d];
    chain.samples.push_back(th);
    chain.log_post.push_back(r[5]);
    chain.accepted.push_back(r[6] != 0.0);
    if (i >= burn_in && r[6] != 0.0) ++accepted_after;
  }
  if (chain.samples.size() > burn_in) {
    chain.acceptance_rate =
        static_cast<double>(accepted_after) / static_cast<double>(chain.samples.size() - burn_in);
  }
  return chain;
}

void write_band_csv(const fs::path& path, const PredictiveBand& band) {
  std::string s = "time_s,mean,lower,upper\n";
  for (std::size_t i = 0; i < band.grid.size(); ++i) {
    s += num(band.grid.time(i)) + "," + num(band.mean[i]) + "," + num(band.lower[i]) + "," +
         num(band.upper[i]) + "\n";
  }
  write_text(path, s);
}

PredictiveBand read_band_csv(const fs::path& path, double level, std::string source) {
  const CsvTable t = read_csv(path, {"time_s", "mean", "lower", "upper"});
  return {grid_from_times(column(t, 0), path.string()),
          column(t, 1),
          column(t, 2),
          column(t, 3),
          level,
          std::move(source),
          0,
          0};
}

void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& m) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols()) {
    throw ArgumentError("write_matrix_csv: header width does not match the matrix");
  }
  std::string s;
  for (std::size_t c = 0; c < header.size(); ++c) s += (c ? "," : "") + header[c];
  s += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += (c ? "," : "") + num(m(r, c));
    s += "\n";
  }
  write_text(path, s);
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path, const std::vector<std::string>& header) {
  const CsvTable t = read_csv(path, header);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.rows[r][c];
    }
  }
  return m;
}

void write_training_log_csv(const fs::path& path, const std::vector<TrainingRecord>& history) {
  std::string s = "epoch,train_loss,validation_loss\n";
  for (const auto& r : history) {
    s += fmt::format("{},{},{}\n", r.epoch, num(r.train_loss), num(r.validation_loss));
  }
  write_text(path, s);
}

void write_aligned_ensemble(const fs::path& dir, const AlignedEnsemble& aligned) {
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    write_curve_csv(dir / fmt::format("warped_{:03d}.csv", i), aligned.warped_curves[i]);
    const WarpingFunction& w = aligned.warpings[i];
    std::string s = "time_s,gamma_s\n";
    for (std::size_t k = 0; k < w.gamma.size(); ++k) s += num(w.grid.time(k)) + "," + num(w.gamma[k]) + "\n";
    write_text(dir / fmt::format("gamma_{:03d}.csv", i), s);
  }
  const SrsfCurve& q = aligned.template_srsf;
  std::string s = "time_s,q\n";
  for (std::size_t k = 0; k < q.q.size(); ++k) s += num(q.grid.time(k)) + "," + num(q.q[k]) + "\n";
  write_text(dir / "template.csv", s);
}

AlignedEnsemble read_aligned_ensemble(const fs::path& dir, std::size_t count) {
  const fs::path tp = dir / "template.csv";
  const CsvTable tt = read_csv(tp, {"time_s", "q"});
  AlignedEnsemble out{{}, {}, SrsfCurve{grid_from_times(column(tt, 0), tp.string()), column(tt, 1)}};
  for (std::size_t i = 0; i < count; ++i) {
    TransientCurve w = read_curve_csv(dir / fmt::format("warped_{:03d}.csv", i));
    const fs::path gp = dir / fmt::format("gamma_{:03d}.csv", i);
    const CsvTable t = read_csv(gp, {"time_s", "gamma_s"});
    WarpingFunction g{grid_from_times(column(t, 0), gp.string()), column(t, 1)};
    if (!(w.grid == out.grid()) || !(g.grid == out.grid())) {
      throw ParseError(gp.string() + ": grid differs from the template grid");
    }
    out.warped_curves.push_back(std::move(w));
    out.warpings.push_back(std::move(g));
  }
  return out;
}

void save_pca(const fs::path& path, const PcaModel& model) {
  write_text(path, pca_json(model).dump(1) + "\n");
}

PcaModel load_pca(const fs::path& path) {
  return parse_or_throw(path, [](const json& j) { return pca_from(j); });
}

void save_score_space(const fs::path& path, const ScoreSpace& space) {
  json j = {{"grid", grid_json(space.grid())}};
  if (space.is_functional()) {
    const FpcaModel& f = space.functional();
    j["method"] = "fpca";
    j["amplitude"] = pca_json(f.amplitude);
    j["phase"] = pca_json(f.phase);
    j["template_q"] = f.template_srsf.q;
  } else {
    j["method"] = "conventional";
    j["pca"] = pca_json(space.conventional());
  }
  write_text(path, j.dump(1) + "\n");
}

ScoreSpace load_score_space(const fs::path& path) {
  return parse_or_throw(path, [](const json& j) {
    const TimeGrid grid = grid_from(j.at("grid"));
    const auto method = j.at("method").get<std::string>();
    if (method == "conventional") return ScoreSpace(pca_from(j.at("pca")), grid);
    if (method != "fpca") throw ParseError("unknown score space method '" + method + "'");
    auto q = j.at("template_q").get<std::vector<double>>();
    if (q.size() != grid.size()) throw ParseError("template length mismatch");
    return ScoreSpace(FpcaModel{pca_from(j.at("amplitude")), pca_from(j.at("phase")),
                                SrsfCurve{grid, std::move(q)}, grid});
  });
}

void save_surrogate(const fs::path& path, const ScoreSurrogate& surrogate) {
  json j = {{"kind", std::string(to_string(surrogate.kind()))}};
  switch (surrogate.kind()) {
    case SurrogateKind::Gp: {
      const GpModel& m = dynamic_cast<const GpSurrogate&>(surrogate).model();
      const GpHyperparameters& h = m.hyperparameters();
      j["inputs"] = to_json(m.inputs());
      j["targets"] = to_json(m.targets());
      j["length_scales"] = to_json(h.length_scales);
      j["signal_variance"] = h.signal_variance;
      j["nugget"] = h.nugget;
      break;
    }
    case SurrogateKind::Dnn: {
      json models = json::array();
      for (const auto& m : dynamic_cast<const DnnSurrogate&>(surrogate).models()) models.push_back(dnn_json(m));
      j["models"] = models;
      break;
    }
    case SurrogateKind::Bnn: {
      const auto& b = dynamic_cast<const BnnSurrogate&>(surrogate);
      json models = json::array();
      json shortcuts = json::array();
      for (const auto& m : b.models()) models.push_back(bnn_json(m));
      for (const auto& s : b.shortcuts()) shortcuts.push_back(shortcut_json(s));
      j["models"] = models;
      j["shortcuts"] = shortcuts;
      break;
    }
  }
  write_text(path, j.dump(1) + "\n");
}

std::shared_ptr<const ScoreSurrogate> load_surrogate(const fs::path& path) {
  return parse_or_throw(path, [](const json& j) -> std::shared_ptr<const ScoreSurrogate> {
    const SurrogateKind kind = parse_surrogate_kind(j.at("kind").get<std::string>());
    switch (kind) {
      case SurrogateKind::Gp: {
        GpHyperparameters h{vector_from(j.at("length_scales")), j.at("signal_variance").get<double>(),
                            j.at("nugget").get<double>()};
        return std::make_shared<GpSurrogate>(
            GpModel(matrix_from(j.at("inputs")), matrix_from(j.at("targets")), std::move(h)));
      }
      case SurrogateKind::Dnn: {
        std::vector<DnnModel> models;
        for (const auto& m : j.at("models")) models.push_back(dnn_from(m));
        return std::make_shared<DnnSurrogate>(std::move(models));
      }
      case SurrogateKind::Bnn: {
        std::vector<BnnModel> models;
        std::vector<StdShortcut> shortcuts;
        for (const auto& m : j.at("models")) models.push_back(bnn_from(m));
        for (const auto& s : j.at("shortcuts")) shortcuts.push_back(shortcut_from(s));
        return std::make_shared<BnnSurrogate>(std::move(models), std::move(shortcuts));
      }
    }
    throw ParseError("unknown surrogate kind");
  });
}

}  // namespace iuq::io
