// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.
//   kpg_acceptance [--only N] [--configs DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "kpg/bounds.hpp"
#include "kpg/experiment.hpp"

using namespace kpg;
namespace fs = std::filesystem;

namespace {

#ifndef KPG_CONFIG_DIR
#define KPG_CONFIG_DIR "configs"
#endif

fs::path g_configs = KPG_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Stats {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sq += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double se() const {
    const double dn = static_cast<double>(n), m = mean();
    return std::sqrt(std::max(sq - dn * m * m, 0.0) / (dn - 1.0) / dn);
  }
};

GaussianPolicy frozen_chain_policy() {
  Matrix c(3, 1), w(3, 1);
  c << 1.0, 4.0, 8.0;
  w << 0.3, -0.5, 0.4;
  return GaussianPolicy(FunctionExpansion(KernelSpec::isotropic(1, 1, 2.0), c, w), Vector::Ones(1));
}

ExperimentConfig surveillance_config(std::size_t iterations) {
  ExperimentConfig c = load_config((g_configs / "surveillance.json").string());
  c.schedule.num_iterations = iterations;
  return c;
}

// 1. Q estimator unbiasedness on the chain.
Outcome q_unbiased() {
  const ChainMdp env;
  const auto pol = frozen_chain_policy();
  const double gamma = 0.9;
  struct Case {
    std::uint64_t seed;
    int s;
    double a;
  };
  const Case cases[] = {{1, 0, 1.0}, {2, 3, -1.0}, {3, 5, 0.5}, {4, 8, -2.0}, {5, 9, 1.0}};
  Outcome out{true, ""};
  for (const auto& c : cases) {
    Rng rng(c.seed);
    Stats st;
    Vector a = Vector::Constant(1, c.a);
    for (int i = 0; i < 100000; ++i) st.add(estimate_q(env, pol, ChainMdp::state(c.s), a, gamma, rng).q);
    const double exact = chain_exact_q(pol, c.s, c.a, gamma);
    const double z = std::abs(st.mean() - exact) / st.se();
    out.pass = out.pass && z <= 4.0;
    out.detail += fmt::format("(s={},a={:+g}) |d|/se={:.2f} ", c.s, c.a, z);
  }
  return out;
}

// 2. Gradient unbiasedness against central differences of the exact value.
Outcome gradient_unbiased() {
  const ChainMdp env;
  const auto pol = frozen_chain_policy();
  const double gamma = 0.9, step = 1e-4;
  const int s0 = 0;
  const auto& h = pol.mean();
  const std::size_t m = h.model_order();

  std::vector<double> fd(m);
  for (std::size_t i = 0; i < m; ++i) {
    Matrix wp = h.weights(), wm = h.weights();
    wp(static_cast<Eigen::Index>(i), 0) += step;
    wm(static_cast<Eigen::Index>(i), 0) -= step;
    const auto up = pol.with_mean(FunctionExpansion(h.spec(), h.centers(), wp));
    const auto down = pol.with_mean(FunctionExpansion(h.spec(), h.centers(), wm));
    fd[i] = (chain_exact_value(up, s0, gamma) - chain_exact_value(down, s0, gamma)) / (2.0 * step);
  }

  Outcome out{true, ""};
  for (VarianceMode mode : {VarianceMode::plain, VarianceMode::symmetric_q}) {
    GradientOptions o;
    o.mode = mode;
    const Rng base(mode == VarianceMode::plain ? 21 : 22);
    std::vector<Stats> st(m);
    for (std::size_t k = 0; k < 200000; ++k) {
      Rng rng = base.substream(k);
      const auto g = stochastic_gradient(env, pol, ChainMdp::state(s0), gamma, o, rng);
      // d U / d w_i = <grad U, kappa(c_i, .)>_H = kappa(s_T, c_i) w~.
      for (std::size_t i = 0; i < m; ++i) st[i].add(kernel_eval(h.spec(), g.center, h.center(i)) * g.weight[0]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double z = std::abs(st[i].mean() - fd[i]) / st[i].se();
      out.pass = out.pass && z <= 4.0;
      out.detail += fmt::format("{}[{}] mc={:.4f} fd={:.4f} z={:.2f} ", to_string(mode), i, st[i].mean(), fd[i], z);
    }
  }
  return out;
}

// Dense least-squares reprojection error of dropping center j, solved with a
// complete orthogonal decomposition in extended precision on the same Gram.
double dense_loo(const FunctionExpansion& h, std::size_t j) {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMatrix K = gram(h.spec(), h.centers(), h.centers()).cast<long double>();
  const Eigen::Index m = K.rows();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i != static_cast<Eigen::Index>(j)) keep.push_back(i);
  }
  const LMatrix Kss = K(keep, keep);
  const LMatrix Ksa = K(keep, Eigen::all);
  const LMatrix w = h.weights().cast<long double>();
  const LMatrix u = Kss.completeOrthogonalDecomposition().solve(Ksa * w);
  const long double err = (w.transpose() * K * w).trace() - 2.0L * (u.transpose() * Ksa * w).trace() +
                          (u.transpose() * Kss * u).trace();
  return static_cast<double>(std::max(err, 0.0L));
}

double condition_number(const FunctionExpansion& h) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(gram(h.spec(), h.centers(), h.centers()));
  return es.eigenvalues().maxCoeff() / std::max(es.eigenvalues().minCoeff(), 1e-300);
}

// 3. KOMP correctness on random instances.
Outcome komp_correct() {
  // Dictionaries whose Gram condition number exceeds 1e10 are redrawn: there
  // the round-off in the Gram entries alone moves e_j by more than 1e-8.
  Rng rng(31);
  std::size_t bad_residual = 0, bad_loo = 0, bad_dup = 0, redrawn = 0;
  double worst_loo = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = 1 + rng.next_u64() % 10, n = 1 + rng.next_u64() % 4, p = 1 + rng.next_u64() % 3;
    const double bw = 0.2 + 2.0 * rng.uniform_open();
    Matrix c(m, n), w(m, p);
    for (;;) {
      for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
      if (condition_number(FunctionExpansion(KernelSpec::isotropic(n, p, bw), c, Matrix::Zero(m, p))) <= 1e10) break;
      ++redrawn;
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    const FunctionExpansion h(KernelSpec::isotropic(n, p, bw), c, w);

    const double eps = 0.5 * rng.uniform_open();
    const auto rep = komp(h, eps);
    const double dist = rkhs_norm(concatenate(h, rep.pruned.scaled(-1.0)));
    if (rep.residual_norm > eps + 1e-8 || dist > eps + 1e-8) ++bad_residual;

    if (m >= 2) {
      for (std::size_t j = 0; j < m; ++j) {
        const double oracle = dense_loo(h, j);
        const double rel = std::abs(leave_one_out_error(h, j).error - oracle) / std::max(1.0, std::abs(oracle));
        worst_loo = std::max(worst_loo, rel);
        if (rel > 1e-8) ++bad_loo;
      }
    }

    const std::size_t j = rng.next_u64() % m;
    const auto dup = append(h, h.center(j), rng.normal_vector(p));
    const auto dr = komp(dup, 0.0);
    bool distinct = true;
    for (std::size_t a = 0; a < dr.pruned.model_order(); ++a) {
      for (std::size_t b = a + 1; b < dr.pruned.model_order(); ++b) {
        if (dr.pruned.center(a) == dr.pruned.center(b)) distinct = false;
      }
    }
    if (dr.removed_count < 1 || dr.residual_norm > 1e-6 || !distinct) ++bad_dup;
  }
  return {bad_residual == 0 && bad_loo == 0 && bad_dup == 0,
          fmt::format("residual violations {}, LOO mismatches {} (worst rel {:.2e}), duplicate failures {}, "
                      "ill-conditioned dictionaries redrawn {}",
                      bad_residual, bad_loo, worst_loo, bad_dup, redrawn)};
}

// 4. Compression residual within K eta over a 5k surveillance run.
Outcome bias_bound() {
  const auto c = surveillance_config(5000);
  const auto run = run_training(c);
  const double budget = c.trainer.compression_K * c.trainer.eta;
  std::size_t violations = 0;
  double worst = 0.0;
  for (const auto& r : run.history) {
    if (!(r.komp_residual <= budget) || r.eps_K != budget) ++violations;
    worst = std::max(worst, r.komp_residual);
  }
  return {violations == 0 && run.history.size() == 5000,
          fmt::format("{} steps, max residual {:.6g} vs K*eta {:.6g}, violations {}", run.history.size(), worst,
                      budget, violations)};
}

// 5. Model order stays bounded: second half max within 10% of the first half.
Outcome model_order_bounded() {
  auto c = surveillance_config(20000);
  c.trainer.compression_K = 0.5;
  c.trainer.eta = 0.05;
  const auto run = run_training(c);
  std::size_t first = 0, last = 0;
  for (const auto& r : run.history) {
    std::size_t& slot = r.k < 10000 ? first : last;
    slot = std::max(slot, r.model_order);
  }
  return {run.history.size() == 20000 && static_cast<double>(last) <= 1.1 * static_cast<double>(first),
          fmt::format("max M first 10k {}, last 10k {}, final {}", first, last, run.history.back().model_order)};
}

// 6. Gradients conditioned at later states are ascent directions at s0.
Outcome ascent_direction() {
  ExperimentConfig c = load_config((g_configs / "chain.json").string());
  const auto run = run_training(c);
  const std::size_t mid = c.schedule.num_iterations / 2;
  const Checkpoint* cp = nullptr;
  for (const auto& k : run.checkpoints) {
    if (k.k <= mid) cp = &k;
  }
  const GaussianPolicy pol(cp->policy, c.policy_covariance);
  const ChainMdp env;
  GradientOptions o;
  o.mode = c.trainer.variance_mode == VarianceMode::symmetric_q ? VarianceMode::symmetric_q : VarianceMode::plain;
  const Rng base(c.trainer.seed + 600);
  const std::size_t N = 10000;
  const auto g0 = mc_gradient(env, pol, ChainMdp::state(0), c.trainer.gamma, N, o, base.substream(0));
  Outcome out{true, fmt::format("policy k={} ", cp->k)};
  for (int sk : {2, 5, 8}) {
    const auto gk = mc_gradient(env, pol, ChainMdp::state(sk), c.trainer.gamma, N, o, base.substream(sk));
    Rng boot = base.substream(100 + sk);
    const auto ci = alignment_bootstrap(g0, gk, 1000, boot, 0.95);
    out.pass = out.pass && ci.lo > 0.0;
    out.detail += fmt::format("s_k={}: {:.4g} [{:.4g}, {:.4g}] ", sk, ci.estimate, ci.lo, ci.hi);
  }
  return out;
}

// 7. Battery hysteresis cycles and alternating goal/charger visits.
Outcome cyclic_behavior() {
  auto c = surveillance_config(50000);
  c.schedule.log_interval = 1;
  c.trainer.log_interval = 1;
  const auto run = run_training(c);
  const auto& p = c.env.surveillance;
  std::vector<double> battery;
  std::vector<Eigen::Vector2d> pos;
  battery.reserve(run.history.size());
  pos.reserve(run.history.size());
  for (const auto& r : run.history) {
    battery.push_back((*r.state)[SurveillanceEnv::kB]);
    pos.push_back(r.state->head<2>());
  }
  const std::size_t cycles = count_hysteresis_cycles(battery, p.low_threshold, p.high_threshold);
  const auto v = count_alternating_visits(pos, Eigen::Vector2d(p.goal[0], p.goal[1]),
                                          Eigen::Vector2d(p.charger[0], p.charger[1]), 1.0);
  return {cycles >= 3 && v.goal >= 3 && v.charger >= 3,
          fmt::format("hysteresis cycles {}, goal visits {}, charger visits {}, alternations {}", cycles, v.goal,
                      v.charger, v.alternations)};
}

// 8. Value at the reference state does not drop between the first and last checkpoint.
Outcome value_trend() {
  const auto c = surveillance_config(20000);
  const auto run = run_training(c);
  const auto env = make_environment(c.env);
  const Rng base = Rng(c.trainer.seed).substream(800);
  const auto& first = run.checkpoints.front();
  const auto& last = run.checkpoints.back();
  const auto u0 = mc_value(*env, GaussianPolicy(first.policy, c.policy_covariance), run.reference_state,
                           c.trainer.gamma, 100, 100, base.substream(0));
  const auto u1 = mc_value(*env, GaussianPolicy(last.policy, c.policy_covariance), run.reference_state,
                           c.trainer.gamma, 100, 100, base.substream(1));
  const double se = std::hypot(u0.std_error, u1.std_error);
  const double delta = u1.mean - u0.mean;
  return {delta >= -2.0 * se, fmt::format("U(k={}) = {:.4g} +- {:.3g}, U(k={}) = {:.4g} +- {:.3g}, delta {:.4g}",
                                          first.k, u0.mean, u0.std_error, last.k, u1.mean, u1.std_error, delta)};
}

// 9. Closed-form constants against hand-derived values.
Outcome bounds_examples() {
  using namespace bounds;
  std::vector<std::string> failed;
  std::size_t checks = 0;
  auto expect = [&](const std::string& what, double got, double want) {
    ++checks;
    const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
    if (!(rel <= 1e-12 || (want == 0.0 && got == 0.0))) failed.push_back(fmt::format("{} ({} vs {})", what, got, want));
  };
  const double pi = std::numbers::pi;

  ProblemConstants pc;
  pc.B_r = 1.0;
  pc.gamma = 0.9;
  pc.p = 1;
  pc.n = 1;
  pc.lambda_min_sigma = 1.0;
  pc.kernel_bandwidth = Vector::Ones(1);
  expect("L1", smoothness(pc).L1, 200.0);
  expect("L2", smoothness(pc).L2, 2.0 / 1e-3);
  {
    auto q = pc;
    q.B_r = 2.0;
    expect("L1 doubles with B_r", smoothness(q).L1, 400.0);
    q = pc;
    q.gamma = 0.0;
    q.p = 3;
    expect("L1 at gamma 0", smoothness(q).L1, 4.0);
  }

  {
    auto q = pc;
    q.p = 2;
    expect("sigma p=2", moment_sigma(q), std::cbrt(2.7) / 0.01 * std::pow(8.0, 0.25));
    q.gamma = 0.0;
    expect("sigma at gamma 0", moment_sigma(q), 0.0);
  }

  const double L1 = 200.0, L2 = 7.0;
  expect("C1 example", drift_constants(L1, L2, 1.0, 1.0).C1, 800.0);
  expect("C1 at K=0", drift_constants(L1, L2, 3.0, 0.0).C1, L1 * 9.0);
  expect("C2 at K=0", drift_constants(L1, L2, 3.0, 0.0).C2, L2 * 27.0);
  expect("C1 square", drift_constants(L1, L2, 2.5, 0.5).C1, L1 * 9.0);

  const double B = gradient_norm_bound(pc);
  expect("B_grad", B, 100.0);
  {
    auto q = pc;
    q.gamma = 0.0;
    q.p = 4;
    q.B_r = 3.0;
    expect("B_grad at gamma 0", gradient_norm_bound(q), 6.0);
  }

  auto pk = pc;
  pk.beta_rho = 0.5;
  pk.B_rho = 1.0;
  pk.epsilon = 1.0;
  const double K_max = max_compression_K(pk, B);
  expect("K_max", K_max, 0.0025);
  const double eta_at_max = max_step(10.0, 2.0, pk, B, K_max);
  ++checks;
  if (eta_at_max != 0.0) failed.push_back(fmt::format("eta_max at K_max is {}", eta_at_max));
  expect("eta_max C2->0", max_step(10.0, 1e-300, pk, B, 0.001), (0.25 - 0.1) / 10.0);

  {
    auto q = pc;
    q.n = 2;
    q.p = 2;
    q.kernel_bandwidth = Vector::Constant(2, 1e-2);
    const double Z = kernel_normalizer(q.kernel_bandwidth);
    expect("Z", Z, 2.0 * pi * 1e-2);
    const auto kc = kernel_condition(q, 1.0, 1.0, Z);
    expect("kernel lhs", kc.lhs, 2.0 * 2.0 * 1e-2 * 2.0 * pi * 1e-2);
    expect("kernel rhs", kc.rhs, 0.5);
    ++checks;
    if (!kc.satisfied) failed.push_back("kernel condition not satisfied");
  }

  {
    auto q = pc;
    q.L_rs = 0.2;
    q.L_ps = 0.5;
    q.state_measure = 3.0;
    const auto l = lipschitz_D(q);
    expect("B_D", l.B_D, std::sqrt(2.0) / (0.1 * std::sqrt(pi)));
    expect("L_D with h=0", l.L_D, l.L_Qs);
    expect("L_Qs", l.L_Qs, 0.2 + 3.0 * 0.5 / 0.1);
  }

  return {failed.empty(), fmt::format("{} checks, {} failed{}{}", checks, failed.size(), failed.empty() ? "" : ": ",
                                      failed.empty() ? "" : failed.front())};
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 10. Repeated runs from one manifest give byte-identical CSVs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "kpg_acceptance_determinism";
  fs::remove_all(root);
  Outcome out{true, ""};
  std::ostringstream sink;
  for (auto [name, iters] : {std::pair{"chain", std::size_t{2000}}, std::pair{"surveillance", std::size_t{1000}}}) {
    RunOverrides o;
    o.iterations = iters;
    o.out = (root / name / "seed").string();
    cmd_train((g_configs / (std::string(name) + ".json")).string(), o, sink);
    const std::string manifest = (root / name / "seed" / "manifest.json").string();
    RunOverrides a, b;
    a.out = (root / name / "a").string();
    b.out = (root / name / "b").string();
    cmd_train(manifest, a, sink);
    cmd_train(manifest, b, sink);
    const auto files = csv_files(root / name / "a");
    std::size_t differing = 0;
    for (const auto& f : files) {
      const std::string x = slurp(root / name / "a" / f);
      if (x != slurp(root / name / "b" / f) || x != slurp(root / name / "seed" / f)) ++differing;
    }
    out.pass = out.pass && differing == 0 && !files.empty() && files == csv_files(root / name / "b");
    out.detail += fmt::format("{}: {} CSV files, {} differ ", name, files.size(), differing);
  }
  fs::remove_all(root);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  std::string configs;
  app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--configs", configs, "Directory holding chain.json and surveillance.json");
  CLI11_PARSE(app, argc, argv);
  if (!configs.empty()) g_configs = configs;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Q estimator unbiased", q_unbiased},
      {"gradient estimator unbiased", gradient_unbiased},
      {"KOMP correctness", komp_correct},
      {"compression residual within K*eta", bias_bound},
      {"model order bounded", model_order_bounded},
      {"ascent direction", ascent_direction},
      {"cyclic surveillance behavior", cyclic_behavior},
      {"value trend non-decreasing", value_trend},
      {"bounds constants", bounds_examples},
      {"determinism", determinism},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && r.pass;
    std::printf("criterion %zu %s: %s (%.1fs) %s\n", i + 1, criteria[i].first.c_str(), r.pass ? "PASS" : "FAIL",
                secs, r.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
