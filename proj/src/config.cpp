#include "kpg/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace kpg {

using nlohmann::json;

namespace {

/// JSON object reader that remembers which keys were consumed, so leftovers
/// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: " + where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("config: " + field(key) + " must be a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("config: " + field(key) + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("config: " + field(key) + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("config: " + field(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("config: " + field(key) + " must be a string");
    return v.get<std::string>();
  }

  Vector vector(const std::string& key) {
    if (!has(key)) throw ConfigError("config: " + field(key) + " is required");
    const json& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError("config: " + field(key) + " must be a non-empty array");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError("config: " + field(key) + " must contain numbers");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  std::array<double, 2> pair(const std::string& key, std::array<double, 2> fallback) {
    if (!has(key)) return fallback;
    const Vector v = vector(key);
    if (v.size() != 2) throw ConfigError("config: " + field(key) + " must have two entries");
    return {v[0], v[1]};
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("config: unknown key '" + field(item.key()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "top level" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

void require_positive_entries(const Vector& v, const std::string& field) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    require(v[i] > 0.0 && std::isfinite(v[i]), field + " entries must be positive");
  }
}

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json pair_json(const std::array<double, 2>& a) { return json::array({a[0], a[1]}); }

SurveillanceParams parse_surveillance(Section s) {
  SurveillanceParams p;
  p.goal = s.pair("goal", p.goal);
  p.charger = s.pair("charger", p.charger);
  p.start = s.pair("start", p.start);
  p.dt = s.number("dt", p.dt);
  p.charge_rate = s.number("charge_rate", p.charge_rate);
  p.charger_radius = s.number("charger_radius", p.charger_radius);
  p.low_threshold = s.number("low_threshold", p.low_threshold);
  p.high_threshold = s.number("high_threshold", p.high_threshold);
  p.battery_max = s.number("battery_max", p.battery_max);
  p.initial_battery = s.number("initial_battery", p.initial_battery);
  p.obstacle_center = s.pair("obstacle_center", p.obstacle_center);
  p.obstacle_axes = s.pair("obstacle_axes", p.obstacle_axes);
  p.c_position = s.number("c_position", p.c_position);
  p.c_velocity = s.number("c_velocity", p.c_velocity);
  p.c_action = s.number("c_action", p.c_action);
  p.barrier_weight = s.number("barrier_weight", p.barrier_weight);
  p.c_battery = s.number("c_battery", p.c_battery);
  p.barrier_floor = s.number("barrier_floor", p.barrier_floor);
  p.barrier_nonpositive = s.boolean("barrier_nonpositive", p.barrier_nonpositive);
  p.reward_bound = s.number("reward_bound", p.reward_bound);
  p.arena_half_width = s.number("arena_half_width", p.arena_half_width);
  p.max_accel = s.number("max_accel", p.max_accel);
  p.max_speed = s.number("max_speed", p.max_speed);
  s.finish();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return p;
}

json surveillance_json(const SurveillanceParams& p) {
  return json{{"goal", pair_json(p.goal)},
              {"charger", pair_json(p.charger)},
              {"start", pair_json(p.start)},
              {"dt", p.dt},
              {"charge_rate", p.charge_rate},
              {"charger_radius", p.charger_radius},
              {"low_threshold", p.low_threshold},
              {"high_threshold", p.high_threshold},
              {"battery_max", p.battery_max},
              {"initial_battery", p.initial_battery},
              {"obstacle_center", pair_json(p.obstacle_center)},
              {"obstacle_axes", pair_json(p.obstacle_axes)},
              {"c_position", p.c_position},
              {"c_velocity", p.c_velocity},
              {"c_action", p.c_action},
              {"barrier_weight", p.barrier_weight},
              {"c_battery", p.c_battery},
              {"barrier_floor", p.barrier_floor},
              {"barrier_nonpositive", p.barrier_nonpositive},
              {"reward_bound", p.reward_bound},
              {"arena_half_width", p.arena_half_width},
              {"max_accel", p.max_accel},
              {"max_speed", p.max_speed}};
}

bounds::ProblemConstants parse_constants(Section& s, std::size_t n, std::size_t p, double gamma,
                                         const Vector& bandwidth, const Vector& covariance) {
  bounds::ProblemConstants c;
  c.B_r = s.number("B_r", c.B_r);
  c.L_rs = s.number("L_rs", c.L_rs);
  c.L_ra = s.number("L_ra", c.L_ra);
  c.beta_rho = s.number("beta_rho", c.beta_rho);
  c.B_rho = s.number("B_rho", c.B_rho);
  c.L_p = s.number("L_p", c.L_p);
  c.L_ps = s.number("L_ps", c.L_ps);
  c.L_pa = s.number("L_pa", c.L_pa);
  c.state_measure = s.number("state_measure", c.state_measure);
  c.h_norm = s.number("h_norm", c.h_norm);
  c.epsilon = s.number("epsilon", c.epsilon);
  c.gamma = gamma;
  c.n = n;
  c.p = p;
  c.kernel_bandwidth = bandwidth;
  c.lambda_min_sigma = covariance.minCoeff();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

}  // namespace

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::chain:
      return "chain";
    case EnvKind::surveillance:
      return "surveillance";
    case EnvKind::constant:
      return "constant";
  }
  return "chain";
}

std::size_t ExperimentConfig::state_dim() const {
  switch (env.kind) {
    case EnvKind::chain:
      return 1;
    case EnvKind::surveillance:
      return 6;
    case EnvKind::constant:
      return env.constant_state_dim;
  }
  return 1;
}

std::size_t ExperimentConfig::action_dim() const {
  switch (env.kind) {
    case EnvKind::chain:
      return 1;
    case EnvKind::surveillance:
      return 2;
    case EnvKind::constant:
      return env.constant_action_dim;
  }
  return 1;
}

KernelSpec ExperimentConfig::kernel() const { return KernelSpec(state_dim(), action_dim(), kernel_bandwidth); }

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section top(j, "");

  {
    Section env = top.child("env");
    const std::string name = env.text("name", "");
    if (name == "chain") {
      c.env.kind = EnvKind::chain;
      Section chain = env.child("chain");
      const std::size_t start = chain.count("start", 0);
      require(start <= 10, "env.chain.start must lie in [0, 10]");
      c.env.chain_start = static_cast<int>(start);
      chain.finish();
    } else if (name == "surveillance") {
      c.env.kind = EnvKind::surveillance;
      c.env.surveillance = parse_surveillance(env.child("surveillance"));
    } else if (name == "constant") {
      c.env.kind = EnvKind::constant;
      Section k = env.child("constant");
      c.env.constant_state_dim = k.count("state_dim", 1);
      c.env.constant_action_dim = k.count("action_dim", 1);
      c.env.constant_reward = k.number("reward", 1.0);
      require(c.env.constant_state_dim > 0 && c.env.constant_action_dim > 0,
              "env.constant dimensions must be positive");
      k.finish();
    } else {
      throw ConfigError("config: env.name must be one of chain, surveillance, constant");
    }
    env.finish();
  }

  {
    Section t = top.child("trainer");
    c.trainer.gamma = t.number("gamma", c.trainer.gamma);
    require(c.trainer.gamma > 0.0 && c.trainer.gamma < 1.0, "trainer.gamma must lie in (0, 1)");
    c.trainer.eta = t.number("eta", c.trainer.eta);
    require(c.trainer.eta > 0.0 && std::isfinite(c.trainer.eta), "trainer.eta must be positive");
    c.trainer.compression_K = t.number("compression_K", c.trainer.compression_K);
    require(c.trainer.compression_K >= 0.0 && std::isfinite(c.trainer.compression_K),
            "trainer.compression_K must be non-negative");
    try {
      c.trainer.variance_mode = variance_mode_from_string(t.text("variance_mode", to_string(c.trainer.variance_mode)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: trainer.") + e.what());
    }
    c.trainer.seed = t.u64("seed", c.trainer.seed);
    c.trainer.legacy_q_scaling = t.boolean("legacy_q_scaling", c.trainer.legacy_q_scaling);
    c.trainer.coupled_rollouts = t.boolean("coupled_rollouts", c.trainer.coupled_rollouts);
    c.trainer.incremental_compression = t.boolean("incremental_compression", c.trainer.incremental_compression);
    if (t.has("max_model_order_guard")) {
      c.trainer.max_model_order_guard = t.count("max_model_order_guard", 0);
      require(*c.trainer.max_model_order_guard > 0, "trainer.max_model_order_guard must be positive");
    }
    t.finish();
  }

  {
    Section k = top.child("kernel");
    c.kernel_bandwidth = k.vector("bandwidth");
    require(static_cast<std::size_t>(c.kernel_bandwidth.size()) == c.state_dim(),
            "kernel.bandwidth must have one entry per state dimension (" + std::to_string(c.state_dim()) + ")");
    require_positive_entries(c.kernel_bandwidth, "kernel.bandwidth");
    k.finish();
  }

  {
    Section p = top.child("policy");
    c.policy_covariance = p.vector("covariance");
    require(static_cast<std::size_t>(c.policy_covariance.size()) == c.action_dim(),
            "policy.covariance must have one entry per action dimension (" + std::to_string(c.action_dim()) + ")");
    require_positive_entries(c.policy_covariance, "policy.covariance");
    p.finish();
  }

  {
    Section s = top.child("schedule");
    c.schedule.num_iterations = s.count("num_iterations", c.schedule.num_iterations);
    c.schedule.checkpoint_interval = s.count("checkpoint_interval", c.schedule.checkpoint_interval);
    require(c.schedule.checkpoint_interval > 0, "schedule.checkpoint_interval must be positive");
    c.schedule.log_interval = s.count("log_interval", c.schedule.log_interval);
    require(c.schedule.log_interval > 0, "schedule.log_interval must be positive");
    c.trainer.log_interval = c.schedule.log_interval;
    s.finish();
  }

  {
    Section d = top.child("diagnostics");
    auto& g = c.diagnostics;
    g.value_episodes = d.count("value_episodes", g.value_episodes);
    require(g.value_episodes > 0, "diagnostics.value_episodes must be positive");
    g.value_horizon = d.count("value_horizon", g.value_horizon);
    g.gradient_samples = d.count("gradient_samples", g.gradient_samples);
    require(g.gradient_samples > 0, "diagnostics.gradient_samples must be positive");
    g.bootstrap_replicates = d.count("bootstrap_replicates", g.bootstrap_replicates);
    require(g.bootstrap_replicates >= 2, "diagnostics.bootstrap_replicates must be at least 2");
    g.alignment_until = d.count("alignment_until", g.alignment_until);
    g.trace_steps = d.count("trace_steps", g.trace_steps);
    if (d.has("reference_state")) {
      g.reference_state = d.vector("reference_state");
      require(static_cast<std::size_t>(g.reference_state->size()) == c.state_dim(),
              "diagnostics.reference_state must have one entry per state dimension");
    }
    d.finish();
  }

  if (top.has("bounds")) {
    Section b = top.child("bounds");
    BoundsConfig bc;
    bc.constants = parse_constants(b, c.state_dim(), c.action_dim(), c.trainer.gamma, c.kernel_bandwidth,
                                   c.policy_covariance);
    if (b.has("K")) bc.K = b.number("K", 0.0);
    if (b.has("eta")) bc.eta = b.number("eta", 0.0);
    bc.gamma_factored = b.boolean("gamma_factored", false);
    b.finish();
    c.bounds = bc;
  }

  c.output_dir = top.text("output_dir", c.output_dir);
  require(!c.output_dir.empty(), "output_dir must not be empty");
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  // A run manifest carries its full config under "config".
  if (j.is_object() && j.contains("config") && j.contains("config_hash")) return parse_config(j.at("config"));
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json env{{"name", to_string(c.env.kind)}};
  switch (c.env.kind) {
    case EnvKind::chain:
      env["chain"] = {{"start", c.env.chain_start}};
      break;
    case EnvKind::surveillance:
      env["surveillance"] = surveillance_json(c.env.surveillance);
      break;
    case EnvKind::constant:
      env["constant"] = {{"state_dim", c.env.constant_state_dim},
                         {"action_dim", c.env.constant_action_dim},
                         {"reward", c.env.constant_reward}};
      break;
  }
  json trainer{{"gamma", c.trainer.gamma},
               {"eta", c.trainer.eta},
               {"compression_K", c.trainer.compression_K},
               {"variance_mode", to_string(c.trainer.variance_mode)},
               {"seed", c.trainer.seed},
               {"legacy_q_scaling", c.trainer.legacy_q_scaling},
               {"coupled_rollouts", c.trainer.coupled_rollouts},
               {"incremental_compression", c.trainer.incremental_compression}};
  if (c.trainer.max_model_order_guard) trainer["max_model_order_guard"] = *c.trainer.max_model_order_guard;

  const auto& d = c.diagnostics;
  json diag{{"value_episodes", d.value_episodes},
            {"value_horizon", d.value_horizon},
            {"gradient_samples", d.gradient_samples},
            {"bootstrap_replicates", d.bootstrap_replicates},
            {"alignment_until", d.alignment_until},
            {"trace_steps", d.trace_steps}};
  if (d.reference_state) diag["reference_state"] = vec_json(*d.reference_state);

  json out{{"env", env},
           {"trainer", trainer},
           {"kernel", {{"bandwidth", vec_json(c.kernel_bandwidth)}}},
           {"policy", {{"covariance", vec_json(c.policy_covariance)}}},
           {"schedule",
            {{"num_iterations", c.schedule.num_iterations},
             {"checkpoint_interval", c.schedule.checkpoint_interval},
             {"log_interval", c.schedule.log_interval}}},
           {"diagnostics", diag},
           {"output_dir", c.output_dir}};
  if (c.bounds) {
    const auto& k = c.bounds->constants;
    json b{{"B_r", k.B_r},       {"L_rs", k.L_rs}, {"L_ra", k.L_ra}, {"beta_rho", k.beta_rho},
           {"B_rho", k.B_rho},   {"L_p", k.L_p},   {"L_ps", k.L_ps}, {"L_pa", k.L_pa},
           {"state_measure", k.state_measure},     {"h_norm", k.h_norm},
           {"epsilon", k.epsilon}, {"gamma_factored", c.bounds->gamma_factored}};
    if (c.bounds->K) b["K"] = *c.bounds->K;
    if (c.bounds->eta) b["eta"] = *c.bounds->eta;
    out["bounds"] = b;
  }
  return out;
}

std::string config_hash(const ExperimentConfig& c) {
  // Where the outputs go does not change what is computed.
  json j = to_json(c);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::unique_ptr<Environment> make_environment(const EnvConfig& c) {
  switch (c.kind) {
    case EnvKind::chain:
      return std::make_unique<ChainMdp>(c.chain_start);
    case EnvKind::surveillance:
      return std::make_unique<SurveillanceEnv>(c.surveillance);
    case EnvKind::constant:
      return std::make_unique<ConstantRewardEnv>(c.constant_state_dim, c.constant_action_dim, c.constant_reward);
  }
  throw ConfigError("config: unknown environment");
}

}  // namespace kpg
