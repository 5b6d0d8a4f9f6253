#pragma once

#include <cstddef>
#include <string>

#include "kpg/rkhs.hpp"
#include "kpg/rng.hpp"

namespace kpg {

struct StepResult {
  Vector next_state;
  double reward = 0.0;
};

/// Continuing-task MDP with bounded reward.
///
/// `step` is a pure function of (s, a) and the random stream: environments
/// keep no trajectory state, so one instance may be shared by any number of
/// concurrent rollouts and a rollout can restart from any recorded state.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  /// B_r with |r(s, a)| <= B_r everywhere.
  virtual double reward_bound() const = 0;

  virtual Vector initial_state(Rng& rng) const = 0;
  virtual StepResult step(const Vector& s, const Vector& a, Rng& rng) const = 0;
};

/// Gaussian policy N(h(s), Sigma) with RKHS mean h and diagonal covariance.
class GaussianPolicy {
 public:
  GaussianPolicy(FunctionExpansion mean, Vector covariance);

  const FunctionExpansion& mean() const noexcept { return mean_; }
  const Vector& covariance() const noexcept { return covariance_; }
  std::size_t state_dim() const noexcept { return mean_.spec().state_dim(); }
  std::size_t action_dim() const noexcept { return mean_.spec().action_dim(); }

  /// Same covariance, new mean.
  GaussianPolicy with_mean(FunctionExpansion mean) const;

  Vector mean_action(const Vector& s) const { return evaluate(mean_, s); }

  /// a = h(s) + Sigma^{1/2} z for a given standard-normal vector z.
  Vector action_from_noise(const Vector& s, const Vector& z) const;

 private:
  FunctionExpansion mean_;
  Vector covariance_;
  Vector stddev_;
};

/// a ~ N(h(s), Sigma).
Vector sample_action(const GaussianPolicy& policy, const Vector& s, Rng& rng);

/// Sigma^{-1} (a - h(s)), the Gaussian score with respect to the mean.
Vector score_factor(const GaussianPolicy& policy, const Vector& s, const Vector& a);

/// 2 h(s) - a, the reflection of a through the policy mean.
Vector mirror_action(const GaussianPolicy& policy, const Vector& s, const Vector& a);

struct Transition {
  Vector s;
  Vector a;
  double r = 0.0;
  Vector s_next;
  std::size_t t = 0;
};

}  // namespace kpg
