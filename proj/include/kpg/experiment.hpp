#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kpg/config.hpp"
#include "kpg/diagnostics.hpp"

namespace kpg {

inline constexpr const char* kVersion = "1.0.0";

/// Command-line overrides shared by the subcommands.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::string> out;
};

ExperimentConfig apply_overrides(ExperimentConfig config, const RunOverrides& o);

struct Checkpoint {
  std::size_t k = 0;  ///< iterations completed
  FunctionExpansion policy;
  Vector state;  ///< system state s_k at the checkpoint
};

struct TrainingResult {
  std::vector<StepRecord> history;
  std::vector<Checkpoint> checkpoints;  ///< k = 0 first, final iteration last
  Vector initial_state;
  Vector reference_state;
  std::size_t compression_fallbacks = 0;
};

/// Runs the trainer of `config` and keeps a policy snapshot every
/// checkpoint_interval iterations. No files are written.
TrainingResult run_training(const ExperimentConfig& config);

/// Evaluation state: the configured one, else the first training state
/// below the low battery threshold (surveillance), else the initial state.
Vector reference_state(const ExperimentConfig& config, const std::vector<StepRecord>& history,
                       const Vector& initial_state);

std::vector<ValueEstimate> value_curve(const ExperimentConfig& config, const TrainingResult& run);

struct AlignmentPoint {
  std::size_t k;
  AlignmentInterval interval;
};
std::vector<AlignmentPoint> alignment_curve(const ExperimentConfig& config, const TrainingResult& run);

/// Writes every training output into `dir`.
void write_training_outputs(const ExperimentConfig& config, const TrainingResult& run,
                            const std::filesystem::path& dir);

nlohmann::json snapshot_json(const Checkpoint& c, const Vector& covariance);
GaussianPolicy policy_from_snapshot(const nlohmann::json& j);

// Subcommands. Each returns the process exit code and throws ConfigError for
// bad input (exit 1) or other exceptions for runtime failures (exit 2).
int cmd_train(const std::string& config_path, const RunOverrides& o, std::ostream& out);
int cmd_eval(const std::string& policy_path, const std::string& config_path,
             const std::optional<Vector>& state_override, const RunOverrides& o, std::ostream& out);
int cmd_bounds(const std::string& config_path, std::ostream& out);
int cmd_replay_figures(const std::string& run_dir, const RunOverrides& o, std::ostream& out);

}  // namespace kpg
