#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "kpg/bounds.hpp"
#include "kpg/envs.hpp"
#include "kpg/pg.hpp"

namespace kpg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EnvKind { chain, surveillance, constant };

struct EnvConfig {
  EnvKind kind = EnvKind::chain;
  int chain_start = 0;
  SurveillanceParams surveillance;
  std::size_t constant_state_dim = 1;
  std::size_t constant_action_dim = 1;
  double constant_reward = 1.0;
};

struct Schedule {
  std::size_t num_iterations = 1000;
  std::size_t checkpoint_interval = 500;
  std::size_t log_interval = 1;
};

struct DiagnosticsConfig {
  std::size_t value_episodes = 100;
  std::size_t value_horizon = 100;
  std::size_t gradient_samples = 100;
  std::size_t bootstrap_replicates = 1000;
  /// Alignment checkpoints are computed up to this iteration.
  std::size_t alignment_until = 10000;
  std::size_t trace_steps = 2000;
  /// Fixed evaluation state; when absent the first crossing of the low battery
  /// threshold (surveillance) or the initial state is used.
  std::optional<Vector> reference_state;
};

struct BoundsConfig {
  bounds::ProblemConstants constants;
  std::optional<double> K;    ///< defaults to trainer.compression_K
  std::optional<double> eta;  ///< defaults to trainer.eta
  bool gamma_factored = false;
};

struct ExperimentConfig {
  EnvConfig env;
  TrainerConfig trainer;
  Vector kernel_bandwidth;
  Vector policy_covariance;
  Schedule schedule;
  DiagnosticsConfig diagnostics;
  std::optional<BoundsConfig> bounds;
  std::string output_dir = "run";

  std::size_t state_dim() const;
  std::size_t action_dim() const;
  KernelSpec kernel() const;
};

/// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Complete, canonical form (every field written), parseable by parse_config.
nlohmann::json to_json(const ExperimentConfig& c);

/// 64-bit FNV-1a of the canonical JSON dump without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

std::unique_ptr<Environment> make_environment(const EnvConfig& c);

std::string to_string(EnvKind kind);

}  // namespace kpg
