// iuq: command-line driver for the calibration pipeline stages.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "iuq/errors.hpp"
#include "iuq/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

iuq::PipelineConfig resolve_config(const Options& o) {
  iuq::PipelineConfig c = o.config_path.empty() ? iuq::PipelineConfig{} : iuq::load_config(o.config_path);
  if (!o.preset.empty()) iuq::apply_preset(c, o.preset);
  if (o.seed) iuq::set_all_seeds(c, *o.seed);
  if (!o.out.empty()) c.output_dir = o.out;
  iuq::validate(c);
  return c;
}

int run(const std::string& command, const Options& o) {
  const iuq::PipelineConfig c = resolve_config(o);
  if (command == "config") {
    std::cout << iuq::config_to_json(c);
    return kExitOk;
  }
  if (command == "all") {
    iuq::run_all(c);
    std::cout << fmt::format("all stages complete in {}\n", c.output_dir.string());
    return kExitOk;
  }
  const auto manifest = iuq::run_stage(c, iuq::parse_stage(command));
  std::cout << fmt::format("{}: wrote {}\n", command, manifest.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse and forward uncertainty quantification pipeline"};
  app.require_subcommand(1);
  Options opts;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"sample", "Latin hypercube design of the calibration factors"},
      {"simulate", "Run the simulator for every design row"},
      {"align", "Elastic alignment of the simulated curves (fPCA methods)"},
      {"pca", "Fit the score space and write training scores"},
      {"train", "Train the score surrogate"},
      {"iuq", "Adaptive MCMC over the calibration factors"},
      {"fuq", "Forward propagation and coverage validation"},
      {"report", "Write the JSON + SVG summary bundle"},
      {"all", "Run every stage in order"},
      {"config", "Print the effective configuration as JSON"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_path, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--preset", opts.preset, "Method preset")
        ->check(CLI::IsMember({"method1", "method2", "method3", "method4"}));
    sub->add_option("--seed", opts.seed, "Override every random seed");
    sub->add_option("--out", opts.out, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opts);
  } catch (const iuq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const iuq::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const iuq::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return kExitOther;
  } catch (const iuq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
