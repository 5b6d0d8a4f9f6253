#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "kpg/mdp.hpp"

namespace kpg {

/// Eleven-state chain on {0, ..., 10}, embedded in R.
///
/// The continuous action is reduced to its sign (0 counts as +1). State 0
/// only moves up, state 10 is absorbing and pays reward 1 on every step.
class ChainMdp final : public Environment {
 public:
  static constexpr int kLast = 10;
  static constexpr int kNumStates = kLast + 1;

  explicit ChainMdp(int start = 0);

  std::string name() const override { return "chain"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  double reward_bound() const override { return 1.0; }

  Vector initial_state(Rng& rng) const override;
  StepResult step(const Vector& s, const Vector& a, Rng& rng) const override;

  static int index(const Vector& s);
  static Vector state(int i);
  /// Deterministic successor of state i under a move of +1 (up) or -1.
  static int successor(int i, bool up);
  static double reward(int i) { return i == kLast ? 1.0 : 0.0; }

 private:
  int start_;
};

/// Exact discounted values U(s) for all 11 chain states, given the
/// probability of an upward move in each state.
Vector chain_exact_values(const Vector& p_up, double gamma);

/// p_up(s) = Phi(h(s) / sigma) for a one-dimensional Gaussian policy.
Vector chain_up_probabilities(const GaussianPolicy& policy);

double chain_exact_value(const GaussianPolicy& policy, int s0, double gamma);

/// Q(s, a) = r(s) + gamma U(next(s, sign a)).
double chain_exact_q(const GaussianPolicy& policy, int s, double a, double gamma);

/// Every step pays `reward`; the state never changes.
class ConstantRewardEnv final : public Environment {
 public:
  ConstantRewardEnv(std::size_t state_dim, std::size_t action_dim, double reward);

  std::string name() const override { return "constant"; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  double reward_bound() const override { return std::abs(reward_); }

  Vector initial_state(Rng& rng) const override;
  StepResult step(const Vector& s, const Vector& a, Rng& rng) const override;

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  double reward_;
};

struct SurveillanceParams {
  std::array<double, 2> goal{-1.0, -5.0};
  std::array<double, 2> charger{-1.0, 5.0};
  std::array<double, 2> start{3.0, 0.0};
  double dt = 0.1;
  double charge_rate = 1.0;  ///< Delta B per step
  double charger_radius = 0.5;
  double low_threshold = 40.0;
  double high_threshold = 90.0;
  double battery_max = 100.0;
  double initial_battery = 100.0;
  std::array<double, 2> obstacle_center{-1.0, 0.0};
  std::array<double, 2> obstacle_axes{1.8, 0.9};  ///< full axis lengths
  double c_position = 1.0;
  double c_velocity = 0.1;
  double c_action = 0.01;
  double barrier_weight = 0.5;
  /// Weight of the low-battery term -c_b * max(0, low_threshold - b); 0 disables.
  double c_battery = 0.0;
  double barrier_floor = 1e-3;
  /// Clip the barrier term at 0 so that it only ever penalizes.
  bool barrier_nonpositive = false;
  double reward_bound = 50.0;
  /// Positions are clamped to [-arena, arena]^2, stopping the outward velocity; 0 disables.
  double arena_half_width = 10.0;
  /// Per-coordinate acceleration clamp; 0 disables.
  double max_accel = 0.0;
  /// Speed clamp on ||v||; 0 disables.
  double max_speed = 0.0;

  void validate() const;
};

/// Point mass with a battery that drains away from the charger and charges
/// near it. The state is (x1, x2, v1, v2, b, d), the action an acceleration.
class SurveillanceEnv final : public Environment {
 public:
  enum Index : Eigen::Index { kX1 = 0, kX2, kV1, kV2, kB, kD };

  explicit SurveillanceEnv(SurveillanceParams params = {});

  std::string name() const override { return "surveillance"; }
  std::size_t state_dim() const override { return 6; }
  std::size_t action_dim() const override { return 2; }
  double reward_bound() const override { return params_.reward_bound; }

  Vector initial_state(Rng& rng) const override;
  StepResult step(const Vector& s, const Vector& a, Rng& rng) const override;

  const SurveillanceParams& params() const noexcept { return params_; }

  /// True when the battery mode points at the charger.
  bool seeks_charger(const Vector& s) const;
  Eigen::Vector2d target(const Vector& s) const;
  double barrier(const Eigen::Vector2d& x) const;
  double reward(const Vector& s, const Eigen::Vector2d& a) const;

 private:
  SurveillanceParams params_;
};

}  // namespace kpg
