#pragma once

// End-to-end workflow: configuration, the in-memory stage functions, and the
// file-backed stages used by the command-line tool. Each file-backed stage
// reads the manifests of the stages it depends on and writes its own.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iuq/bayes_iuq.hpp"
#include "iuq/fuq.hpp"
#include "iuq/pca.hpp"
#include "iuq/surrogate.hpp"

namespace iuq {

enum class PcaMethod { Conventional, Functional };
enum class ScoreNoiseModel { Linear, Sampled };
enum class PropagationPath { FullModel, Surrogate };

inline constexpr int kConfigVersion = 1;

struct PipelineConfig {
  int version = kConfigVersion;
  /// "method1".."method4" or "custom".
  std::string preset = "method4";
  std::filesystem::path output_dir = "iuq_run";

  TimeGrid grid = TimeGrid::default_grid();
  std::size_t design_size = 500;
  std::uint64_t design_seed = 2024;
  PriorBounds prior = default_prior_bounds();

  PcaMethod pca_method = PcaMethod::Functional;
  double variance_target = 0.95;  // conventional truncation
  std::size_t amplitude_components = 2;
  std::size_t phase_components = 4;
  AlignOptions alignment;

  SurrogateKind surrogate = SurrogateKind::Bnn;
  std::uint64_t split_seed = 1;
  std::uint64_t surrogate_seed = 1;

  bool use_code_uncertainty = true;
  double sigma_exp = 10.0;  // kelvin, per grid point
  ScoreNoiseModel score_noise = ScoreNoiseModel::Sampled;
  double phase_inflation = 0.1;
  std::size_t noise_references = 20;
  std::size_t noise_replicates = 5;
  /// Gaussian pre-smoothing (seconds) applied when aligning measured curves.
  double experiment_smoothing = 5.0;

  McmcOptions mcmc;
  std::size_t chains = 1;

  CalibrationVector theta_true{{1.2, 1.1, 0.8, 1.0}};
  double experiment_noise = 10.0;
  std::uint64_t experiment_seed = 100;
  /// Measured curve to use instead of a synthetic one.
  std::optional<std::filesystem::path> experiment_csv;
  /// Noise seeds of the held-out synthetic experiments used for validation.
  std::vector<std::uint64_t> validation_seeds{900, 901};

  double band_level = 0.95;
  std::size_t prior_samples = 1000;
  PropagationPath posterior_path = PropagationPath::FullModel;
  std::uint64_t fuq_seed = 0;
};

std::string_view to_string(PcaMethod m);
std::string_view to_string(ScoreNoiseModel m);
std::string_view to_string(PropagationPath p);

struct MethodTriple {
  PcaMethod pca;
  SurrogateKind surrogate;
  bool code_uncertainty;
};

/// The four method presets. Throws ConfigError for unknown names.
MethodTriple preset_triple(std::string_view preset);
/// Name of the preset a triple matches, or nullopt.
std::optional<std::string> matching_preset(const MethodTriple& triple);
/// Sets the preset name and its (PCA, surrogate, code uncertainty) triple.
void apply_preset(PipelineConfig& config, std::string_view preset);
/// Sets every seed in the configuration to `seed`.
void set_all_seeds(PipelineConfig& config, std::uint64_t seed);

/// Parses a versioned JSON configuration. Unknown keys, out-of-range values
/// and method triples that contradict the preset throw ConfigError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field present.
std::string config_to_json(const PipelineConfig& config);
/// Throws ConfigError when a value is out of range.
void validate(const PipelineConfig& config);

// In-memory stages.

std::vector<CalibrationVector> make_design(const PipelineConfig& config);
std::vector<TransientCurve> simulate_design(const PipelineConfig& config,
                                            const std::vector<CalibrationVector>& design);
AlignedEnsemble align_curves(const PipelineConfig& config, const std::vector<TransientCurve>& curves);

struct ScoreData {
  ScoreSpace space;
  Eigen::MatrixXd scores;  // N x dim, rows follow the design
};

/// `aligned` is required for the functional method and ignored otherwise.
ScoreData build_score_space(const PipelineConfig& config, const std::vector<TransientCurve>& curves,
                            const AlignedEnsemble* aligned);

TrainedSurrogate train_scores(const PipelineConfig& config,
                              const std::vector<CalibrationVector>& design,
                              const Eigen::MatrixXd& scores);

struct InferenceResult {
  ExperimentalCurve experiment;
  Eigen::VectorXd data_scores;
  Eigen::MatrixXd sigma_exp_pc;
  std::vector<PosteriorChain> chains;
  /// Retained samples of all chains, chain by chain.
  std::vector<CalibrationVector> posterior;
  PosteriorSummary summary;
  ChainDiagnostics diagnostics;
  CorrelationMatrix correlations;
};

ExperimentalCurve make_experiment(const PipelineConfig& config);
Eigen::MatrixXd experimental_score_covariance(const PipelineConfig& config, const ScoreSpace& space,
                                              const std::vector<TransientCurve>& curves);
InferenceResult infer(const PipelineConfig& config, const ScoreSpace& space,
                      std::shared_ptr<const ScoreSurrogate> surrogate,
                      const std::vector<TransientCurve>& curves);

struct ValidationResult {
  PredictiveBand prior_band;          // model band from prior samples
  PredictiveBand posterior_band;      // model band from posterior samples
  PredictiveBand predictive_band;     // posterior band plus measurement noise
  std::optional<PredictiveBand> surrogate_band;
  double coverage = 0.0;              // predictive band vs the IUQ experiment
  std::vector<double> validation_coverage;  // one per validation seed
};

/// Posterior summary table: a "columns" list and one row per parameter with
/// method, representation, mean, std and 95% credible interval.
std::string posterior_summary_json(const PipelineConfig& config, const PosteriorSummary& summary);

ValidationResult forward_validate(const PipelineConfig& config, const InferenceResult& inference,
                                  const ScoreSpace& space,
                                  std::shared_ptr<const ScoreSurrogate> surrogate);

// File-backed stages.

enum class Stage { Sample, Simulate, Align, Pca, Train, Iuq, Fuq, Report };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);

/// Fingerprint of the configuration sections a stage and its upstream
/// stages depend on. Manifests store it; downstream stages compare it.
std::string stage_fingerprint(const PipelineConfig& config, Stage stage);

/// Runs one stage against config.output_dir and returns the manifest path.
/// Throws DependencyError when an upstream manifest is missing or was
/// produced under a different configuration.
std::filesystem::path run_stage(const PipelineConfig& config, Stage stage);

/// All stages in order.
void run_all(const PipelineConfig& config);

}  // namespace iuq
