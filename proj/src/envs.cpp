#include "kpg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace kpg {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Eigen::Vector2d vec2(const std::array<double, 2>& a) { return {a[0], a[1]}; }

}  // namespace

// ---- chain ----------------------------------------------------------------

ChainMdp::ChainMdp(int start) : start_(start) {
  if (start < 0 || start > kLast) throw std::invalid_argument("env.chain.start must lie in [0, 10]");
}

int ChainMdp::index(const Vector& s) {
  if (s.size() != 1) throw std::invalid_argument("chain state must be one-dimensional");
  const double r = std::round(s[0]);
  if (!(r >= 0.0 && r <= kLast)) throw std::invalid_argument("chain state outside [0, 10]");
  return static_cast<int>(r);
}

Vector ChainMdp::state(int i) { return Vector::Constant(1, static_cast<double>(i)); }

int ChainMdp::successor(int i, bool up) {
  if (i == kLast) return kLast;
  if (i == 0) return up ? 1 : 0;
  return up ? i + 1 : i - 1;
}

Vector ChainMdp::initial_state(Rng&) const { return state(start_); }

StepResult ChainMdp::step(const Vector& s, const Vector& a, Rng&) const {
  if (a.size() != 1) throw std::invalid_argument("chain action must be one-dimensional");
  const int i = index(s);
  return {state(successor(i, a[0] >= 0.0)), reward(i)};
}

Vector chain_up_probabilities(const GaussianPolicy& policy) {
  if (policy.state_dim() != 1 || policy.action_dim() != 1) {
    throw std::invalid_argument("chain policies are one-dimensional");
  }
  const double sd = std::sqrt(policy.covariance()[0]);
  Vector p(ChainMdp::kNumStates);
  for (int i = 0; i < ChainMdp::kNumStates; ++i) p[i] = normal_cdf(policy.mean_action(ChainMdp::state(i))[0] / sd);
  return p;
}

Vector chain_exact_values(const Vector& p_up, double gamma) {
  if (p_up.size() != ChainMdp::kNumStates) throw std::invalid_argument("p_up needs 11 entries");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  const int n = ChainMdp::kNumStates;
  Matrix P = Matrix::Zero(n, n);
  Vector r(n);
  for (int i = 0; i < n; ++i) {
    P(i, ChainMdp::successor(i, true)) += p_up[i];
    P(i, ChainMdp::successor(i, false)) += 1.0 - p_up[i];
    r[i] = ChainMdp::reward(i);
  }
  const Matrix A = Matrix::Identity(n, n) - gamma * P;
  return A.partialPivLu().solve(r);
}

double chain_exact_value(const GaussianPolicy& policy, int s0, double gamma) {
  if (s0 < 0 || s0 > ChainMdp::kLast) throw std::invalid_argument("chain state outside [0, 10]");
  return chain_exact_values(chain_up_probabilities(policy), gamma)[s0];
}

double chain_exact_q(const GaussianPolicy& policy, int s, double a, double gamma) {
  if (s < 0 || s > ChainMdp::kLast) throw std::invalid_argument("chain state outside [0, 10]");
  const Vector u = chain_exact_values(chain_up_probabilities(policy), gamma);
  return ChainMdp::reward(s) + gamma * u[ChainMdp::successor(s, a >= 0.0)];
}

// ---- constant reward ------------------------------------------------------

ConstantRewardEnv::ConstantRewardEnv(std::size_t state_dim, std::size_t action_dim, double reward)
    : state_dim_(state_dim), action_dim_(action_dim), reward_(reward) {
  if (state_dim == 0 || action_dim == 0) throw std::invalid_argument("dimensions must be positive");
}

Vector ConstantRewardEnv::initial_state(Rng&) const {
  return Vector::Zero(static_cast<Eigen::Index>(state_dim_));
}

StepResult ConstantRewardEnv::step(const Vector& s, const Vector&, Rng&) const { return {s, reward_}; }

// ---- surveillance ---------------------------------------------------------

void SurveillanceParams::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("env.surveillance.") + field + " must be positive");
    }
  };
  auto non_negative = [](double v, const char* field) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("env.surveillance.") + field + " must be non-negative");
    }
  };
  positive(dt, "dt");
  positive(charge_rate, "charge_rate");
  positive(charger_radius, "charger_radius");
  positive(battery_max, "battery_max");
  positive(obstacle_axes[0], "obstacle_axes");
  positive(obstacle_axes[1], "obstacle_axes");
  positive(barrier_floor, "barrier_floor");
  positive(reward_bound, "reward_bound");
  non_negative(c_position, "c_position");
  non_negative(c_velocity, "c_velocity");
  non_negative(c_action, "c_action");
  non_negative(barrier_weight, "barrier_weight");
  non_negative(c_battery, "c_battery");
  non_negative(arena_half_width, "arena_half_width");
  non_negative(max_accel, "max_accel");
  non_negative(max_speed, "max_speed");
  if (!(low_threshold >= 0.0 && low_threshold < high_threshold && high_threshold <= battery_max)) {
    throw std::invalid_argument("env.surveillance thresholds need 0 <= low < high <= battery_max");
  }
  if (!(initial_battery >= 0.0 && initial_battery <= battery_max)) {
    throw std::invalid_argument("env.surveillance.initial_battery must lie in [0, battery_max]");
  }
}

SurveillanceEnv::SurveillanceEnv(SurveillanceParams params) : params_(params) { params_.validate(); }

Vector SurveillanceEnv::initial_state(Rng&) const {
  Vector s(6);
  s << params_.start[0], params_.start[1], 0.0, 0.0, params_.initial_battery, -params_.charge_rate;
  return s;
}

bool SurveillanceEnv::seeks_charger(const Vector& s) const {
  const double b = s[kB];
  const double d = s[kD];
  return (b < params_.low_threshold && d < 0.0) || (b < params_.high_threshold && d >= 0.0);
}

Eigen::Vector2d SurveillanceEnv::target(const Vector& s) const {
  return seeks_charger(s) ? vec2(params_.charger) : vec2(params_.goal);
}

double SurveillanceEnv::barrier(const Eigen::Vector2d& x) const {
  const double u = (x[0] - params_.obstacle_center[0]) / (params_.obstacle_axes[0] / 2.0);
  const double v = (x[1] - params_.obstacle_center[1]) / (params_.obstacle_axes[1] / 2.0);
  const double q = std::max(u * u + v * v - 1.0, params_.barrier_floor);
  const double value = params_.barrier_weight * std::log(q);
  return params_.barrier_nonpositive ? std::min(value, 0.0) : value;
}

double SurveillanceEnv::reward(const Vector& s, const Eigen::Vector2d& a) const {
  const Eigen::Vector2d x = s.segment<2>(kX1);
  const Eigen::Vector2d v = s.segment<2>(kV1);
  const double r = -params_.c_position * (x - target(s)).squaredNorm() - params_.c_velocity * v.squaredNorm() -
                   params_.c_action * a.squaredNorm() + barrier(x) -
                   params_.c_battery * std::max(0.0, params_.low_threshold - s[kB]);
  return std::clamp(r, -params_.reward_bound, params_.reward_bound);
}

StepResult SurveillanceEnv::step(const Vector& s, const Vector& a_in, Rng&) const {
  if (s.size() != 6) throw std::invalid_argument("surveillance state must have 6 entries");
  if (a_in.size() != 2) throw std::invalid_argument("surveillance action must have 2 entries");
  Eigen::Vector2d a = a_in;
  if (params_.max_accel > 0.0) a = a.cwiseMax(-params_.max_accel).cwiseMin(params_.max_accel);

  const Eigen::Vector2d x = s.segment<2>(kX1);
  const Eigen::Vector2d v = s.segment<2>(kV1);
  Eigen::Vector2d x_next = x + params_.dt * v;
  Eigen::Vector2d v_next = v + params_.dt * a;
  if (params_.max_speed > 0.0 && v_next.norm() > params_.max_speed) v_next *= params_.max_speed / v_next.norm();
  if (params_.arena_half_width > 0.0) {
    const double w = params_.arena_half_width;
    for (int i = 0; i < 2; ++i) {
      if (x_next[i] > w || x_next[i] < -w) {
        x_next[i] = std::clamp(x_next[i], -w, w);
        if (x_next[i] * v_next[i] > 0.0) v_next[i] = 0.0;
      }
    }
  }

  const bool charging = (x - vec2(params_.charger)).norm() <= params_.charger_radius;
  const double b = s[kB];
  const double b_next = std::clamp(b + (charging ? params_.charge_rate : -params_.charge_rate), 0.0,
                                   params_.battery_max);

  StepResult out;
  out.next_state.resize(6);
  out.next_state << x_next, v_next, b_next, b_next - b;
  out.reward = reward(s, a);
  return out;
}

}  // namespace kpg
