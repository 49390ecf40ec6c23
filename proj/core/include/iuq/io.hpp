#pragma once

// File formats: CSV for curves, designs, chains, bands and training logs;
// JSON for fitted models. Parse failures throw ParseError naming the file.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "iuq/bayes_iuq.hpp"
#include "iuq/fuq.hpp"
#include "iuq/pca.hpp"
#include "iuq/surrogate.hpp"

namespace iuq::io {

namespace fs = std::filesystem;

/// Writes text, creating parent directories. Throws IoError.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// `time_s,value_K`; the grid must be uniform.
void write_curve_csv(const fs::path& path, const TransientCurve& curve);
TransientCurve read_curve_csv(const fs::path& path);

/// `p1009,p1010,p1011,p1031`
void write_design_csv(const fs::path& path, const std::vector<CalibrationVector>& design);
std::vector<CalibrationVector> read_design_csv(const fs::path& path);

/// `step,p1009,p1010,p1011,p1031,log_post,accepted`
void write_chain_csv(const fs::path& path, const PosteriorChain& chain);
/// burn_in, thin and seed are not part of the CSV and are supplied by the caller.
PosteriorChain read_chain_csv(const fs::path& path, std::size_t burn_in, std::size_t thin);

/// `time_s,mean,lower,upper`
void write_band_csv(const fs::path& path, const PredictiveBand& band);
PredictiveBand read_band_csv(const fs::path& path, double level, std::string source);

/// Numeric table with the given header; rows of the matrix are CSV rows.
void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const fs::path& path, const std::vector<std::string>& header);

/// `epoch,train_loss,validation_loss`
void write_training_log_csv(const fs::path& path, const std::vector<TrainingRecord>& history);

/// warped_###.csv, gamma_###.csv and template.csv (`time_s,q`).
void write_aligned_ensemble(const fs::path& dir, const AlignedEnsemble& aligned);
AlignedEnsemble read_aligned_ensemble(const fs::path& dir, std::size_t count);

void save_pca(const fs::path& path, const PcaModel& model);
PcaModel load_pca(const fs::path& path);

/// Conventional or functional score space in one file.
void save_score_space(const fs::path& path, const ScoreSpace& space);
ScoreSpace load_score_space(const fs::path& path);

/// GP, DNN or BNN surrogate with everything needed to predict.
void save_surrogate(const fs::path& path, const ScoreSurrogate& surrogate);
std::shared_ptr<const ScoreSurrogate> load_surrogate(const fs::path& path);

}  // namespace iuq::io
