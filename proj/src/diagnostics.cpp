#include "kpg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "kpg/log.hpp"

namespace kpg {

ValueEstimate mc_value(const Environment& env, const GaussianPolicy& policy, const Vector& s, double gamma,
                       std::size_t n_episodes, std::size_t horizon, const Rng& rng, std::size_t snapshot) {
  if (n_episodes == 0) throw std::invalid_argument("mc_value: N must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("mc_value: gamma must lie in (0, 1)");
  if (std::pow(gamma, static_cast<double>(horizon)) > 1e-3) {
    log::warn("mc_value: gamma^T = " + std::to_string(std::pow(gamma, static_cast<double>(horizon))) +
              " > 1e-3, truncation bias may exceed the noise");
  }
  std::vector<double> returns(n_episodes);
  for (std::size_t i = 0; i < n_episodes; ++i) {
    Rng r = rng.substream(i);
    Vector state = s;
    double discount = 1.0;
    double total = 0.0;
    for (std::size_t t = 0; t <= horizon; ++t) {
      const Vector a = sample_action(policy, state, r);
      StepResult step = env.step(state, a, r);
      total += discount * step.reward;
      discount *= gamma;
      state = std::move(step.next_state);
    }
    returns[i] = total;
  }
  // Two-pass mean / variance in index order.
  double mean = 0.0;
  for (double v : returns) mean += v;
  mean /= static_cast<double>(n_episodes);
  double ss = 0.0;
  for (double v : returns) ss += (v - mean) * (v - mean);
  const double var = n_episodes > 1 ? ss / static_cast<double>(n_episodes - 1) : 0.0;

  ValueEstimate out;
  out.mean = mean;
  out.std_error = std::sqrt(var / static_cast<double>(n_episodes));
  out.n_episodes = n_episodes;
  out.horizon = horizon;
  out.gamma = gamma;
  out.state = s;
  out.snapshot = snapshot;
  return out;
}

GradientEstimateBundle mc_gradient(const Environment& env, const GaussianPolicy& policy, const Vector& s,
                                   double gamma, std::size_t n_samples, const GradientOptions& options,
                                   const Rng& rng) {
  if (n_samples == 0) throw std::invalid_argument("mc_gradient: N must be positive");
  const auto N = static_cast<Eigen::Index>(n_samples);
  GradientEstimateBundle b{FunctionExpansion(policy.mean().spec()),
                           Matrix(N, static_cast<Eigen::Index>(policy.state_dim())),
                           Matrix(N, static_cast<Eigen::Index>(policy.action_dim())), n_samples, s};
  for (Eigen::Index i = 0; i < N; ++i) {
    Rng r = rng.substream(static_cast<std::uint64_t>(i));
    const GradientSample g = stochastic_gradient(env, policy, s, gamma, options, r);
    b.centers.row(i) = g.center.transpose();
    b.weights.row(i) = g.weight.transpose();
  }
  b.mean = merge_duplicate_centers(
      FunctionExpansion(policy.mean().spec(), b.centers, b.weights / static_cast<double>(n_samples)));
  return b;
}

double ascent_alignment(const GradientEstimateBundle& at_s0, const GradientEstimateBundle& at_sk) {
  return inner_product(at_s0.mean, at_sk.mean);
}

namespace {

struct Grouped {
  Matrix centers;                  // distinct centers
  std::vector<Eigen::Index> group; // sample -> distinct center
};

Grouped group_centers(const Matrix& centers) {
  std::map<std::vector<double>, Eigen::Index> seen;
  Grouped g;
  g.group.resize(static_cast<std::size_t>(centers.rows()));
  std::vector<Eigen::Index> firsts;
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(centers.cols()));
    for (Eigen::Index c = 0; c < centers.cols(); ++c) key[static_cast<std::size_t>(c)] = centers(i, c);
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(firsts.size()));
    if (inserted) firsts.push_back(i);
    g.group[static_cast<std::size_t>(i)] = it->second;
  }
  g.centers = centers(firsts, Eigen::all);
  return g;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

AlignmentInterval alignment_bootstrap(const GradientEstimateBundle& a, const GradientEstimateBundle& b,
                                      std::size_t replicates, Rng& rng, double level) {
  if (!(a.mean.spec() == b.mean.spec())) throw std::invalid_argument("alignment_bootstrap: kernel mismatch");
  if (replicates < 2) throw std::invalid_argument("alignment_bootstrap: need at least two replicates");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("alignment_bootstrap: level must lie in (0, 1)");

  const Grouped ga = group_centers(a.centers);
  const Grouped gb = group_centers(b.centers);
  if (static_cast<double>(ga.centers.rows()) * static_cast<double>(gb.centers.rows()) > 4e7) {
    throw std::invalid_argument("alignment_bootstrap: too many distinct centers");
  }
  const Matrix cross = gram(a.mean.spec(), ga.centers, gb.centers);
  const auto na = static_cast<std::size_t>(a.centers.rows());
  const auto nb = static_cast<std::size_t>(b.centers.rows());

  // Weighted resample: summed weights per distinct center, then the bilinear form.
  auto resample = [&rng](const Matrix& weights, const Grouped& g, std::size_t n, bool identity) {
    Matrix sum = Matrix::Zero(g.centers.rows(), weights.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pick = identity ? i : static_cast<std::size_t>(rng.next_u64() % n);
      sum.row(g.group[pick]) += weights.row(static_cast<Eigen::Index>(pick));
    }
    return Matrix(sum / static_cast<double>(n));
  };

  AlignmentInterval out;
  {
    const Matrix wa = resample(a.weights, ga, na, true);
    const Matrix wb = resample(b.weights, gb, nb, true);
    out.estimate = (wa.transpose() * cross * wb).trace();
  }
  std::vector<double> stats(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const Matrix wa = resample(a.weights, ga, na, false);
    const Matrix wb = resample(b.weights, gb, nb, false);
    stats[r] = (wa.transpose() * cross * wb).trace();
  }
  const double tail = (1.0 - level) / 2.0;
  out.lo = quantile(stats, tail);
  out.hi = quantile(stats, 1.0 - tail);
  return out;
}

std::vector<Transition> policy_rollout_trace(const Environment& env, const GaussianPolicy& policy,
                                             const Vector& s0, std::size_t num_steps, Rng& rng, bool greedy) {
  std::vector<Transition> trace;
  trace.reserve(num_steps);
  Vector s = s0;
  for (std::size_t t = 0; t < num_steps; ++t) {
    Vector a = greedy ? policy.mean_action(s) : sample_action(policy, s, rng);
    StepResult step = env.step(s, a, rng);
    trace.push_back({s, std::move(a), step.reward, step.next_state, t});
    s = std::move(step.next_state);
  }
  return trace;
}

std::size_t count_hysteresis_cycles(const std::vector<double>& battery, double low, double high) {
  // 0: waiting for the first low, 1: low seen, waiting for high, 2: high seen, waiting for low.
  int phase = 0;
  std::size_t cycles = 0;
  for (double b : battery) {
    if (phase == 0 && b < low) {
      phase = 1;
    } else if (phase == 1 && b >= high) {
      phase = 2;
    } else if (phase == 2 && b < low) {
      ++cycles;
      phase = 1;
    }
  }
  return cycles;
}

VisitCounts count_alternating_visits(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& goal,
                                     const Eigen::Vector2d& charger, double radius) {
  VisitCounts out;
  int last = -1;  // 0 goal, 1 charger
  for (const auto& x : positions) {
    int here = -1;
    if ((x - goal).norm() <= radius) here = 0;
    else if ((x - charger).norm() <= radius) here = 1;
    if (here < 0 || here == last) continue;
    if (last >= 0) ++out.alternations;
    (here == 0 ? out.goal : out.charger) += 1;
    last = here;
  }
  return out;
}

}  // namespace kpg
