#include "kpg/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kpg/log.hpp"

namespace kpg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stream ids of the diagnostics, all derived from the run seed. The trainer
// draws from the seeded engine itself, never from these.
constexpr std::uint64_t kValueStream = 1'000'000;
constexpr std::uint64_t kAlignmentStream = 2'000'000;
constexpr std::uint64_t kTraceStream = 3'000'000;
constexpr std::uint64_t kEvalStream = 4'000'000;
constexpr std::uint64_t kReplayStream = 5'000'000;

std::string num(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::string> state_names(const ExperimentConfig& c) {
  if (c.env.kind == EnvKind::surveillance) return {"x1", "x2", "v1", "v2", "b", "d"};
  if (c.env.kind == EnvKind::chain) return {"s"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c.state_dim(); ++i) names.push_back("s" + std::to_string(i + 1));
  return names;
}

void write_state(std::ostream& out, const Vector& s) {
  for (Eigen::Index i = 0; i < s.size(); ++i) out << ',' << num(s[i]);
}

GradientOptions gradient_options(const TrainerConfig& t) {
  GradientOptions o;
  // Antithetic pairing only makes sense along the training sequence.
  o.mode = t.variance_mode == VarianceMode::symmetric_q ? VarianceMode::symmetric_q : VarianceMode::plain;
  o.legacy_q_scaling = t.legacy_q_scaling;
  o.coupled_rollouts = t.coupled_rollouts;
  return o;
}

void write_trace(std::ostream& out, const ExperimentConfig& c, const std::vector<Transition>& trace) {
  out << 't';
  for (const auto& n : state_names(c)) out << ',' << n;
  out << ",r\n";
  for (const auto& tr : trace) {
    out << tr.t;
    write_state(out, tr.s);
    out << ',' << num(tr.r) << '\n';
  }
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("CSV column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open '" + p.string() + "'");
  Csv csv;
  std::string line;
  if (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) csv.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

}  // namespace

ExperimentConfig apply_overrides(ExperimentConfig config, const RunOverrides& o) {
  if (o.seed) config.trainer.seed = *o.seed;
  if (o.iterations) config.schedule.num_iterations = *o.iterations;
  if (o.out) config.output_dir = *o.out;
  return config;
}

TrainingResult run_training(const ExperimentConfig& config) {
  const auto env = make_environment(config.env);
  const std::size_t n_iter = config.schedule.num_iterations;
  const std::size_t every = config.schedule.checkpoint_interval;
  config.trainer.validate();

  // Same sequence of draws as `train`, with checkpoints taken on the way.
  Rng rng(config.trainer.seed);
  TrainerState state = initial_trainer_state(*env, config.kernel(), config.policy_covariance, rng);
  TrainingResult result;
  result.initial_state = state.system_state;
  result.history.reserve(n_iter);
  result.checkpoints.push_back({0, state.policy.mean(), state.system_state});
  for (std::size_t i = 0; i < n_iter; ++i) {
    auto [next, rec] = train_step(std::move(state), *env, config.trainer, rng);
    state = std::move(next);
    result.history.push_back(std::move(rec));
    const std::size_t k = i + 1;
    if (k % every == 0 || k == n_iter) result.checkpoints.push_back({k, state.policy.mean(), state.system_state});
    if (k % 1000 == 0) {
      log::info("iteration " + std::to_string(k) + ", model order " + std::to_string(state.model_order()));
    }
  }
  result.compression_fallbacks = state.compressor.fallbacks();
  result.reference_state = reference_state(config, result.history, result.initial_state);
  return result;
}

Vector reference_state(const ExperimentConfig& config, const std::vector<StepRecord>& history,
                       const Vector& initial_state) {
  if (config.diagnostics.reference_state) return *config.diagnostics.reference_state;
  if (config.env.kind == EnvKind::surveillance) {
    const double low = config.env.surveillance.low_threshold;
    for (const auto& r : history) {
      if (r.state && (*r.state)[SurveillanceEnv::kB] < low) return *r.state;
    }
  }
  return initial_state;
}

std::vector<ValueEstimate> value_curve(const ExperimentConfig& config, const TrainingResult& run) {
  const auto env = make_environment(config.env);
  const Rng base(config.trainer.seed);
  std::vector<ValueEstimate> out;
  for (const auto& c : run.checkpoints) {
    const GaussianPolicy policy(c.policy, config.policy_covariance);
    out.push_back(mc_value(*env, policy, run.reference_state, config.trainer.gamma, config.diagnostics.value_episodes,
                           config.diagnostics.value_horizon, base.substream(kValueStream + c.k), c.k));
  }
  return out;
}

std::vector<AlignmentPoint> alignment_curve(const ExperimentConfig& config, const TrainingResult& run) {
  const auto env = make_environment(config.env);
  const Rng base(config.trainer.seed);
  const GradientOptions opts = gradient_options(config.trainer);
  const std::size_t n = config.diagnostics.gradient_samples;
  std::vector<AlignmentPoint> out;
  for (const auto& c : run.checkpoints) {
    if (c.k == 0 || c.k > config.diagnostics.alignment_until) continue;
    const GaussianPolicy policy(c.policy, config.policy_covariance);
    const Rng stream = base.substream(kAlignmentStream + c.k);
    const auto at_s0 = mc_gradient(*env, policy, run.reference_state, config.trainer.gamma, n, opts, stream.substream(0));
    const auto at_sk = mc_gradient(*env, policy, c.state, config.trainer.gamma, n, opts, stream.substream(1));
    Rng boot = stream.substream(2);
    out.push_back({c.k, alignment_bootstrap(at_s0, at_sk, config.diagnostics.bootstrap_replicates, boot)});
  }
  return out;
}

json snapshot_json(const Checkpoint& c, const Vector& covariance) {
  return json{{"k", c.k},
              {"policy", to_json(c.policy)},
              {"covariance", std::vector<double>(covariance.data(), covariance.data() + covariance.size())},
              {"state", std::vector<double>(c.state.data(), c.state.data() + c.state.size())}};
}

GaussianPolicy policy_from_snapshot(const json& j) {
  try {
    const auto cov = j.at("covariance").get<std::vector<double>>();
    return GaussianPolicy(expansion_from_json(j.at("policy")),
                          Eigen::Map<const Vector>(cov.data(), static_cast<Eigen::Index>(cov.size())));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("policy snapshot: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy snapshot: ") + e.what());
  }
}

void write_training_outputs(const ExperimentConfig& config, const TrainingResult& run, const fs::path& dir) {
  fs::create_directories(dir / "snapshots");

  {
    auto out = open_out(dir / "steps.csv");
    out << "k,M_k,T,T_Q,q_hat,wtilde_norm,komp_residual,eta,eps_K\n";
    for (const auto& r : run.history) {
      out << r.k << ',' << r.model_order << ',' << r.horizon_T << ',' << r.horizon_TQ << ',' << num(r.q_hat) << ','
          << num(r.wtilde_norm) << ',' << num(r.komp_residual) << ',' << num(r.eta) << ',' << num(r.eps_K) << '\n';
    }
  }
  {
    auto out = open_out(dir / "model_order.csv");
    out << "k,M_k\n";
    for (const auto& r : run.history) out << r.k << ',' << r.model_order << '\n';
  }
  {
    auto out = open_out(dir / "trajectory.csv");
    out << 'k';
    for (const auto& n : state_names(config)) out << ',' << n;
    out << '\n';
    for (const auto& r : run.history) {
      if (!r.state) continue;
      out << r.k;
      write_state(out, *r.state);
      out << '\n';
    }
  }
  for (const auto& c : run.checkpoints) {
    auto out = open_out(dir / "snapshots" / ("policy_" + std::to_string(c.k) + ".json"));
    out << snapshot_json(c, config.policy_covariance).dump(1) << '\n';
  }
  {
    auto out = open_out(dir / "value_curve.csv");
    out << "k,mean,stderr\n";
    for (const auto& v : value_curve(config, run)) {
      out << v.snapshot << ',' << num(v.mean) << ',' << num(v.std_error) << '\n';
    }
  }
  {
    auto out = open_out(dir / "alignment.csv");
    out << "k,inner_product,ci_lo,ci_hi\n";
    for (const auto& a : alignment_curve(config, run)) {
      out << a.k << ',' << num(a.interval.estimate) << ',' << num(a.interval.lo) << ',' << num(a.interval.hi) << '\n';
    }
  }
  {
    const auto env = make_environment(config.env);
    const GaussianPolicy final_policy(run.checkpoints.back().policy, config.policy_covariance);
    Rng rng = Rng(config.trainer.seed).substream(kTraceStream);
    auto out = open_out(dir / "trace.csv");
    write_trace(out, config, policy_rollout_trace(*env, final_policy, run.initial_state,
                                                  config.diagnostics.trace_steps, rng));
  }
  {
    json summary{{"iterations", run.history.size()},
                 {"compression_fallbacks", run.compression_fallbacks},
                 {"reference_state", std::vector<double>(run.reference_state.data(),
                                                         run.reference_state.data() + run.reference_state.size())}};
    std::size_t max_m = 0;
    for (const auto& r : run.history) max_m = std::max(max_m, r.model_order);
    summary["max_model_order"] = max_m;
    summary["final_model_order"] = run.history.empty() ? 0 : run.history.back().model_order;
    if (config.env.kind == EnvKind::surveillance) {
      const auto& p = config.env.surveillance;
      std::vector<double> battery;
      std::vector<Eigen::Vector2d> pos;
      for (const auto& r : run.history) {
        if (!r.state) continue;
        battery.push_back((*r.state)[SurveillanceEnv::kB]);
        pos.push_back(r.state->head<2>());
      }
      const auto visits = count_alternating_visits(pos, {p.goal[0], p.goal[1]}, {p.charger[0], p.charger[1]}, 1.0);
      summary["hysteresis_cycles"] = count_hysteresis_cycles(battery, p.low_threshold, p.high_threshold);
      summary["goal_visits"] = visits.goal;
      summary["charger_visits"] = visits.charger;
      summary["alternations"] = visits.alternations;
    }
    auto out = open_out(dir / "summary.json");
    out << summary.dump(1) << '\n';
  }
  {
    json manifest{{"config", to_json(config)},
                  {"config_hash", config_hash(config)},
                  {"seed", config.trainer.seed},
                  {"version", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)}};
    auto out = open_out(dir / "manifest.json");
    out << manifest.dump(1) << '\n';
  }
}

int cmd_train(const std::string& config_path, const RunOverrides& o, std::ostream& out) {
  const ExperimentConfig config = apply_overrides(load_config(config_path), o);
  const fs::path dir = config.output_dir;
  out << "training " << to_string(config.env.kind) << " for " << config.schedule.num_iterations
      << " iterations (seed " << config.trainer.seed << ", config " << config_hash(config) << ")\n";
  const TrainingResult run = run_training(config);
  write_training_outputs(config, run, dir);
  std::size_t max_m = 0;
  for (const auto& r : run.history) max_m = std::max(max_m, r.model_order);
  out << "final model order " << (run.history.empty() ? 0 : run.history.back().model_order) << ", max " << max_m
      << "\noutputs written to " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& policy_path, const std::string& config_path, const std::optional<Vector>& state_override,
             const RunOverrides& o, std::ostream& out) {
  const ExperimentConfig config = apply_overrides(load_config(config_path), o);
  const GaussianPolicy policy = policy_from_snapshot(read_json(policy_path));
  if (!(policy.mean().spec() == config.kernel()) || policy.covariance().size() != config.policy_covariance.size()) {
    throw ConfigError("policy snapshot does not match the kernel/action dimensions of the config");
  }
  const auto env = make_environment(config.env);
  const Rng base = Rng(config.trainer.seed).substream(kEvalStream);
  Vector s;
  if (state_override) {
    s = *state_override;
  } else if (config.diagnostics.reference_state) {
    s = *config.diagnostics.reference_state;
  } else {
    Rng r = base.substream(0);
    s = env->initial_state(r);
  }
  if (static_cast<std::size_t>(s.size()) != config.state_dim()) {
    throw ConfigError("evaluation state needs " + std::to_string(config.state_dim()) + " entries");
  }
  const auto v = mc_value(*env, policy, s, config.trainer.gamma, config.diagnostics.value_episodes,
                          config.diagnostics.value_horizon, base.substream(1));
  out << "U_hat = " << num(v.mean) << " +- " << num(v.std_error) << " (N=" << v.n_episodes << ", T=" << v.horizon
      << ")\n";
  if (o.out) {
    const fs::path dir = *o.out;
    fs::create_directories(dir);
    Rng r = base.substream(2);
    auto f = open_out(dir / "eval_trace.csv");
    write_trace(f, config, policy_rollout_trace(*env, policy, s, config.diagnostics.trace_steps, r));
    auto g = open_out(dir / "eval_value.csv");
    g << "mean,stderr,n,T\n" << num(v.mean) << ',' << num(v.std_error) << ',' << v.n_episodes << ',' << v.horizon << '\n';
    out << "trace written to " << (dir / "eval_trace.csv").string() << '\n';
  }
  return 0;
}

int cmd_bounds(const std::string& config_path, std::ostream& out) {
  const ExperimentConfig config = load_config(config_path);
  if (!config.bounds) throw ConfigError("config: the bounds section is required for this command");
  const auto& b = *config.bounds;
  const double K = b.K.value_or(config.trainer.compression_K);
  const double eta = b.eta.value_or(config.trainer.eta);
  bounds::Report r;
  try {
    r = bounds::evaluate(b.constants, K, eta, b.gamma_factored);
  } catch (const bounds::InfeasibleConfiguration&) {
    out << "K        " << num(K) << "\nverdict  infeasible (K > K_max)\n";
    return 0;
  }
  auto row = [&](const char* name, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-10s %.12g\n", name, v);
    out << buf;
  };
  row("L1", r.smooth.L1);
  row("L2", r.smooth.L2);
  row("sigma", r.sigma);
  row("C1", r.drift.C1);
  row("C2", r.drift.C2);
  row("B_grad", r.B_grad);
  row("K", r.K);
  row("K_max", r.K_max);
  row("eta", r.eta);
  row("eta_max", r.eta_max);
  row("B_D", r.lip.B_D);
  row("L_h", r.lip.L_h);
  row("L_Qs", r.lip.L_Qs);
  row("L_Qa", r.lip.L_Qa);
  row("L_D", r.lip.L_D);
  row("B", r.lip.B);
  row("L", r.lip.L);
  row("Z", r.Z);
  row("kernel_lhs", r.kernel.lhs);
  row("kernel_rhs", r.kernel.rhs);
  out << "kernel     " << (r.kernel.satisfied ? "satisfied" : "violated") << '\n';
  out << "verdict    " << r.verdict << '\n';
  return 0;
}

int cmd_replay_figures(const std::string& run_dir, const RunOverrides& o, std::ostream& out) {
  const fs::path dir = run_dir;
  const ExperimentConfig config = apply_overrides(load_config((dir / "manifest.json").string()), RunOverrides{});
  const fs::path fig = o.out ? fs::path(*o.out) : dir / "figures";
  fs::create_directories(fig / "episodes");
  const auto env = make_environment(config.env);
  const Rng base(config.trainer.seed);

  const Csv traj = read_csv(dir / "trajectory.csv");
  std::size_t files = 0;
  if (config.env.kind == EnvKind::surveillance) {
    const auto& p = config.env.surveillance;
    const std::size_t ck = traj.column("k"), cx1 = traj.column("x1"), cx2 = traj.column("x2"), cb = traj.column("b");
    // Stages: 1 start -> goal, 2 to the charger, 3 back to the goal, 4 to the
    // charger again; later loops repeat stages 3 and 4.
    auto f = open_out(fig / "trajectory_stages.csv");
    auto g = open_out(fig / "step_response.csv");
    auto h = open_out(fig / "hysteresis.csv");
    f << "k,x1,x2,stage\n";
    g << "k,x2,b,goal_x2,charger_x2,low,high\n";
    h << "b,x2\n";
    int stage = 1;
    for (const auto& row : traj.rows) {
      const double b = row[cb];
      if ((stage == 1 || stage == 3) && b < p.low_threshold) stage = stage == 1 ? 2 : 4;
      else if ((stage == 2 || stage == 4) && b >= p.high_threshold) stage = 3;
      f << static_cast<std::size_t>(row[ck]) << ',' << num(row[cx1]) << ',' << num(row[cx2]) << ',' << stage << '\n';
      g << static_cast<std::size_t>(row[ck]) << ',' << num(row[cx2]) << ',' << num(b) << ',' << num(p.goal[1]) << ','
        << num(p.charger[1]) << ',' << num(p.low_threshold) << ',' << num(p.high_threshold) << '\n';
      h << num(b) << ',' << num(row[cx2]) << '\n';
    }
    files += 3;
  } else {
    fs::copy_file(dir / "trajectory.csv", fig / "trajectory.csv", fs::copy_options::overwrite_existing);
    ++files;
  }
  fs::copy_file(dir / "value_curve.csv", fig / "value_curve.csv", fs::copy_options::overwrite_existing);
  ++files;

  // Episodic rollouts of every stored snapshot from the reference state.
  json summary = read_json(dir / "summary.json");
  const auto ref = summary.at("reference_state").get<std::vector<double>>();
  const Vector s0 = Eigen::Map<const Vector>(ref.data(), static_cast<Eigen::Index>(ref.size()));
  std::vector<std::pair<std::size_t, fs::path>> snaps;
  for (const auto& entry : fs::directory_iterator(dir / "snapshots")) {
    const std::string name = entry.path().stem().string();
    if (name.rfind("policy_", 0) != 0) continue;
    snaps.emplace_back(std::stoul(name.substr(7)), entry.path());
  }
  std::sort(snaps.begin(), snaps.end());
  for (const auto& [k, path] : snaps) {
    const GaussianPolicy policy = policy_from_snapshot(read_json(path));
    Rng rng = base.substream(kReplayStream + k);
    auto f = open_out(fig / "episodes" / ("policy_" + std::to_string(k) + ".csv"));
    write_trace(f, config, policy_rollout_trace(*env, policy, s0, config.diagnostics.value_horizon, rng));
    ++files;
  }
  out << files << " figure datasets written to " << fig.string() << '\n';
  return 0;
}

}  // namespace kpg
