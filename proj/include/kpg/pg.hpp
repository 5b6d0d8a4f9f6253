#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpg/komp.hpp"
#include "kpg/mdp.hpp"

namespace kpg {

enum class VarianceMode {
  plain,             ///< single Q estimate at (s_T, a_T)
  symmetric_q,       ///< difference with Q at the mirrored action; restarts the rollout from s_T
  antithetic_noise,  ///< plain estimator, exploration noise of a_T negated on every other call
};

std::string to_string(VarianceMode mode);
VarianceMode variance_mode_from_string(const std::string& name);

/// Draws of a geometric(gamma) horizon, P(T = t) = (1 - gamma) gamma^t.
///
/// Inverse-CDF sampling, T = floor(ln u / ln gamma). Draws above
/// ceil(50 / (1 - gamma)) are rejected and redrawn.
struct HorizonDraw {
  std::size_t value = 0;
  std::size_t rejected = 0;
};

HorizonDraw draw_geometric_horizon(double gamma, Rng& rng);
std::size_t horizon_cap(double gamma);

struct QEstimate {
  double q = 0.0;
  Vector end_state;  ///< state after the last rollout step
  std::size_t horizon = 0;
  std::size_t env_steps = 0;
  std::size_t rejected_draws = 0;
};

/// Sum of the rewards r_0..r_{T_Q} collected from (s, a) onward under the
/// policy, T_Q ~ geometric(gamma). Unbiased for Q(s, a; h). With
/// `legacy_scaling` the sum is multiplied by (1 - gamma).
QEstimate estimate_q(const Environment& env, const GaussianPolicy& policy, const Vector& s, const Vector& a,
                     double gamma, Rng& rng, bool legacy_scaling = false);

struct GradientOptions {
  VarianceMode mode = VarianceMode::plain;
  bool legacy_q_scaling = false;
  /// symmetric_q only: drive both Q rollouts from one copied random stream, so
  /// they share T_Q and the policy noise (common random numbers).
  bool coupled_rollouts = false;
  /// Standard-normal noise to use for a_T instead of a fresh draw.
  std::optional<Vector> forced_noise;
};

/// One stochastic functional gradient kappa(s_T, .) w~ (step size not applied).
struct GradientSample {
  Vector center;
  Vector weight;
  double q_estimate = 0.0;
  std::optional<double> q_mirror;
  std::size_t horizon_T = 0;
  std::size_t horizon_TQ = 0;
  std::optional<std::size_t> horizon_TQ_mirror;
  Vector action;  ///< a_T
  Vector noise;   ///< standard-normal z with a_T = h(s_T) + Sigma^{1/2} z
  Vector end_state;
  std::size_t env_steps = 0;
  std::size_t rejected_draws = 0;
};

GradientSample stochastic_gradient(const Environment& env, const GaussianPolicy& policy, const Vector& s_start,
                                   double gamma, const GradientOptions& options, Rng& rng);

/// Single-atom expansion of a gradient sample, scaled by `factor`.
FunctionExpansion as_expansion(const GradientSample& g, const KernelSpec& spec, double factor = 1.0);

struct TrainerConfig {
  double gamma = 0.9;
  double eta = 0.05;
  double compression_K = 0.5;
  VarianceMode variance_mode = VarianceMode::antithetic_noise;
  std::optional<std::size_t> max_model_order_guard;
  std::uint64_t seed = 1;
  bool legacy_q_scaling = false;
  bool coupled_rollouts = false;
  /// Carry the Gram inverse across steps (OnlineCompressor) instead of
  /// running `komp` from scratch.
  bool incremental_compression = true;
  /// Keep the system state in every n-th step record (0 disables).
  std::size_t log_interval = 1;

  double budget() const { return compression_K * eta; }
  void validate() const;
};

struct TrainerState {
  GaussianPolicy policy;
  Vector system_state;
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  /// Noise of the previous a_T, negated on the next call in antithetic mode.
  std::optional<Vector> pending_noise;
  OnlineCompressor compressor;

  std::size_t model_order() const { return policy.mean().model_order(); }
};

struct StepRecord {
  std::size_t k = 0;
  std::size_t model_order = 0;  ///< M_{k+1}, after compression
  std::size_t horizon_T = 0;
  std::size_t horizon_TQ = 0;
  double q_hat = 0.0;
  double wtilde_norm = 0.0;  ///< ||w~|| = ||kappa(s_T, .) w~||_H, step size not applied
  double komp_residual = 0.0;
  double eta = 0.0;
  double eps_K = 0.0;
  std::size_t removed = 0;
  std::size_t env_steps = 0;  ///< cumulative after this step
  Vector center;              ///< s_T
  std::optional<Vector> state;  ///< s_{k+1} on log-interval steps
};

class ModelOrderGuardError : public std::runtime_error {
 public:
  ModelOrderGuardError(std::size_t order, std::size_t guard);
};

/// h_0 = 0 and s_0 drawn from the environment.
TrainerState initial_trainer_state(const Environment& env, const KernelSpec& kernel, const Vector& covariance,
                                   Rng& rng);

/// One online iteration: gradient at s_k, ascent step, compression, state advance.
std::pair<TrainerState, StepRecord> train_step(TrainerState state, const Environment& env,
                                               const TrainerConfig& config, Rng& rng);

struct TrainingRun {
  TrainerState final_state;
  std::vector<StepRecord> history;
};

using StepObserver = std::function<void(const TrainerState&, const StepRecord&)>;

/// Runs `num_iterations` online steps from h_0 = 0. The random stream is
/// seeded from `config.seed`, so the history is a deterministic function of
/// the inputs. `observer` (optional) sees the state after every step.
TrainingRun train(const Environment& env, const TrainerConfig& config, const KernelSpec& kernel,
                  const Vector& covariance, std::size_t num_iterations, const StepObserver& observer = {});

}  // namespace kpg
