#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kpg/pg.hpp"

namespace kpg {

struct ValueEstimate {
  double mean = 0.0;
  double std_error = 0.0;  ///< sample standard deviation / sqrt(N)
  std::size_t n_episodes = 0;
  std::size_t horizon = 0;
  double gamma = 0.0;
  Vector state;
  std::size_t snapshot = 0;
};

/// Average of N discounted returns sum_{t=0}^{T} gamma^t r_t from `s`.
/// Episode i draws from `rng.substream(i)`, so the result does not depend on
/// evaluation order. Warns when gamma^T > 1e-3.
ValueEstimate mc_value(const Environment& env, const GaussianPolicy& policy, const Vector& s, double gamma,
                       std::size_t n_episodes, std::size_t horizon, const Rng& rng, std::size_t snapshot = 0);

/// Mean of N gradient samples conditioned at one state.
struct GradientEstimateBundle {
  FunctionExpansion mean;  ///< duplicate centers merged, so model order <= N
  Matrix centers;          ///< N x n raw sample centers
  Matrix weights;          ///< N x p raw sample weights (unscaled)
  std::size_t n = 0;
  Vector state;
};

GradientEstimateBundle mc_gradient(const Environment& env, const GaussianPolicy& policy, const Vector& s,
                                   double gamma, std::size_t n_samples, const GradientOptions& options,
                                   const Rng& rng);

/// <g(s0), g(sk)>_H of two bundle means.
double ascent_alignment(const GradientEstimateBundle& at_s0, const GradientEstimateBundle& at_sk);

struct AlignmentInterval {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap for ascent_alignment, resampling the samples of both
/// bundles independently. Samples sharing a center are grouped, which keeps
/// the chain case cheap; throws if the grouped cross Gram would be huge.
AlignmentInterval alignment_bootstrap(const GradientEstimateBundle& a, const GradientEstimateBundle& b,
                                      std::size_t replicates, Rng& rng, double level = 0.95);

/// Rollout of a frozen policy. With `greedy` the mean action is used.
std::vector<Transition> policy_rollout_trace(const Environment& env, const GaussianPolicy& policy,
                                             const Vector& s0, std::size_t num_steps, Rng& rng,
                                             bool greedy = false);

/// Number of completed low -> high -> low battery loops: the level has to fall
/// below `low`, then reach `high`, then fall below `low` again.
std::size_t count_hysteresis_cycles(const std::vector<double>& battery, double low, double high);

struct VisitCounts {
  std::size_t goal = 0;
  std::size_t charger = 0;
  std::size_t alternations = 0;  ///< changes between the two neighborhoods
};

/// Visits to two neighborhoods, with repeated visits to the same one
/// (without the other in between) collapsed into one.
VisitCounts count_alternating_visits(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& goal,
                                     const Eigen::Vector2d& charger, double radius);

}  // namespace kpg
