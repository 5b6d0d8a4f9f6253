#include "kpg/pg.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace kpg {

std::string to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::plain:
      return "plain";
    case VarianceMode::symmetric_q:
      return "symmetric_q";
    case VarianceMode::antithetic_noise:
      return "antithetic_noise";
  }
  return "plain";
}

VarianceMode variance_mode_from_string(const std::string& name) {
  if (name == "plain") return VarianceMode::plain;
  if (name == "symmetric_q") return VarianceMode::symmetric_q;
  if (name == "antithetic_noise") return VarianceMode::antithetic_noise;
  throw std::invalid_argument("unknown variance_mode '" + name + "' (plain, symmetric_q, antithetic_noise)");
}

std::size_t horizon_cap(double gamma) {
  // 1 - 0.9 is not exactly 0.1; round first so that the cap for 0.9 is 500.
  const double x = 50.0 / (1.0 - gamma);
  const double r = std::round(x);
  return static_cast<std::size_t>(std::abs(x - r) <= 1e-9 * r ? r : std::ceil(x));
}

HorizonDraw draw_geometric_horizon(double gamma, Rng& rng) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
  const double log_gamma = std::log(gamma);
  const auto cap = static_cast<double>(horizon_cap(gamma));
  HorizonDraw draw;
  for (;;) {
    const double t = std::floor(std::log(rng.uniform_open()) / log_gamma);
    if (t <= cap) {
      draw.value = static_cast<std::size_t>(t);
      return draw;
    }
    ++draw.rejected;
  }
}

QEstimate estimate_q(const Environment& env, const GaussianPolicy& policy, const Vector& s, const Vector& a,
                     double gamma, Rng& rng, bool legacy_scaling) {
  const HorizonDraw horizon = draw_geometric_horizon(gamma, rng);
  QEstimate out;
  out.horizon = horizon.value;
  out.rejected_draws = horizon.rejected;
  Vector state = s;
  Vector action = a;
  for (std::size_t t = 0; t <= horizon.value; ++t) {
    StepResult step = env.step(state, action, rng);
    out.q += step.reward;
    state = std::move(step.next_state);
    if (t < horizon.value) action = sample_action(policy, state, rng);
  }
  out.env_steps = horizon.value + 1;
  if (legacy_scaling) out.q *= 1.0 - gamma;
  out.end_state = std::move(state);
  return out;
}

GradientSample stochastic_gradient(const Environment& env, const GaussianPolicy& policy, const Vector& s_start,
                                   double gamma, const GradientOptions& options, Rng& rng) {
  const HorizonDraw horizon = draw_geometric_horizon(gamma, rng);
  GradientSample g;
  g.horizon_T = horizon.value;
  g.rejected_draws = horizon.rejected;

  Vector state = s_start;
  for (std::size_t t = 0; t < horizon.value; ++t) {
    const Vector a = sample_action(policy, state, rng);
    state = env.step(state, a, rng).next_state;
  }
  const auto p = static_cast<Eigen::Index>(policy.action_dim());
  g.noise = options.forced_noise ? *options.forced_noise : rng.normal_vector(p);
  g.action = policy.action_from_noise(state, g.noise);
  const Vector score = score_factor(policy, state, g.action);

  const bool coupled = options.mode == VarianceMode::symmetric_q && options.coupled_rollouts;
  std::optional<Rng> shared;
  std::optional<Rng> mirror_rng;
  if (coupled) {
    shared.emplace(rng.substream(rng.next_u64()));
    mirror_rng = shared;
  }
  QEstimate q = estimate_q(env, policy, state, g.action, gamma, coupled ? *shared : rng, options.legacy_q_scaling);
  g.q_estimate = q.q;
  g.horizon_TQ = q.horizon;
  g.rejected_draws += q.rejected_draws;
  g.env_steps = horizon.value + q.env_steps;

  if (options.mode == VarianceMode::symmetric_q) {
    const Vector mirrored = mirror_action(policy, state, g.action);
    QEstimate qm = estimate_q(env, policy, state, mirrored, gamma, coupled ? *mirror_rng : rng,
                              options.legacy_q_scaling);
    g.q_mirror = qm.q;
    g.horizon_TQ_mirror = qm.horizon;
    g.rejected_draws += qm.rejected_draws;
    g.env_steps += qm.env_steps;
    g.weight = ((q.q - qm.q) / (2.0 * (1.0 - gamma))) * score;
    g.end_state = std::move(qm.end_state);
  } else {
    g.weight = (q.q / (1.0 - gamma)) * score;
    g.end_state = std::move(q.end_state);
  }
  g.center = std::move(state);
  return g;
}

FunctionExpansion as_expansion(const GradientSample& g, const KernelSpec& spec, double factor) {
  return append(FunctionExpansion(spec), g.center, factor * g.weight);
}

void TrainerConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("trainer.gamma must lie in (0, 1)");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("trainer.eta must be positive");
  if (!(compression_K >= 0.0) || !std::isfinite(compression_K)) {
    throw std::invalid_argument("trainer.compression_K must be non-negative");
  }
  if (max_model_order_guard && *max_model_order_guard == 0) {
    throw std::invalid_argument("trainer.max_model_order_guard must be positive when set");
  }
}

ModelOrderGuardError::ModelOrderGuardError(std::size_t order, std::size_t guard)
    : std::runtime_error("model order " + std::to_string(order) + " exceeds guard " + std::to_string(guard) +
                         "; increase compression_K (eps_K = K * eta) or the guard") {}

TrainerState initial_trainer_state(const Environment& env, const KernelSpec& kernel, const Vector& covariance,
                                   Rng& rng) {
  if (kernel.state_dim() != env.state_dim() || kernel.action_dim() != env.action_dim()) {
    throw std::invalid_argument("kernel dimensions do not match environment '" + env.name() + "'");
  }
  return TrainerState{GaussianPolicy(FunctionExpansion(kernel), covariance), env.initial_state(rng), 0, 0, {}, OnlineCompressor()};
}

std::pair<TrainerState, StepRecord> train_step(TrainerState state, const Environment& env,
                                               const TrainerConfig& config, Rng& rng) {
  if (!(config.eta >= 0.0) || !(config.compression_K >= 0.0)) {
    throw std::invalid_argument("train_step: eta and K must be non-negative");
  }
  GradientOptions options;
  options.mode = config.variance_mode;
  options.legacy_q_scaling = config.legacy_q_scaling;
  options.coupled_rollouts = config.coupled_rollouts;
  const bool antithetic = config.variance_mode == VarianceMode::antithetic_noise;
  if (antithetic && state.pending_noise) options.forced_noise = -*state.pending_noise;

  GradientSample g = stochastic_gradient(env, state.policy, state.system_state, config.gamma, options, rng);
  if (antithetic) {
    state.pending_noise = state.pending_noise ? std::nullopt : std::optional<Vector>(g.noise);
  }

  CompressionReport report =
      config.incremental_compression
          ? state.compressor.compress(state.policy.mean(), g.center, config.eta * g.weight, config.budget())
          : komp(append(state.policy.mean(), g.center, config.eta * g.weight), config.budget());
  const std::size_t order = report.pruned.model_order();
  if (config.max_model_order_guard && order > *config.max_model_order_guard) {
    throw ModelOrderGuardError(order, *config.max_model_order_guard);
  }

  StepRecord rec;
  rec.k = state.iteration;
  rec.model_order = order;
  rec.horizon_T = g.horizon_T;
  rec.horizon_TQ = g.horizon_TQ;
  rec.q_hat = g.q_estimate;
  rec.wtilde_norm = g.weight.norm();
  rec.komp_residual = report.residual_norm;
  rec.eta = config.eta;
  rec.eps_K = config.budget();
  rec.removed = report.removed_count;
  rec.center = g.center;

  state.policy = state.policy.with_mean(std::move(report.pruned));
  state.system_state = std::move(g.end_state);
  state.env_steps += g.env_steps;
  ++state.iteration;

  rec.env_steps = state.env_steps;
  if (config.log_interval > 0 && rec.k % config.log_interval == 0) rec.state = state.system_state;
  return {std::move(state), std::move(rec)};
}

TrainingRun train(const Environment& env, const TrainerConfig& config, const KernelSpec& kernel,
                  const Vector& covariance, std::size_t num_iterations, const StepObserver& observer) {
  config.validate();
  Rng rng(config.seed);
  TrainingRun run{initial_trainer_state(env, kernel, covariance, rng), {}};
  run.history.reserve(num_iterations);
  for (std::size_t i = 0; i < num_iterations; ++i) {
    auto [next, rec] = train_step(std::move(run.final_state), env, config, rng);
    run.final_state = std::move(next);
    if (observer) observer(run.final_state, rec);
    run.history.push_back(std::move(rec));
  }
  return run;
}

}  // namespace kpg
