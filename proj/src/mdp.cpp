#include "kpg/mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace kpg {

namespace {

void require_dim(const Vector& v, std::size_t expected, const char* what) {
  if (static_cast<std::size_t>(v.size()) != expected) {
    throw std::invalid_argument(std::string(what) + " has wrong dimension");
  }
}

}  // namespace

GaussianPolicy::GaussianPolicy(FunctionExpansion mean, Vector covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  require_dim(covariance_, mean_.spec().action_dim(), "policy covariance");
  for (Eigen::Index i = 0; i < covariance_.size(); ++i) {
    if (!(covariance_[i] > 0.0) || !std::isfinite(covariance_[i])) {
      throw std::invalid_argument("policy covariance entries must be positive and finite");
    }
  }
  stddev_ = covariance_.cwiseSqrt();
}

GaussianPolicy GaussianPolicy::with_mean(FunctionExpansion mean) const {
  if (!(mean.spec() == mean_.spec())) throw std::invalid_argument("policy mean kernel mismatch");
  return GaussianPolicy(std::move(mean), covariance_);
}

Vector GaussianPolicy::action_from_noise(const Vector& s, const Vector& z) const {
  require_dim(z, action_dim(), "policy noise");
  return mean_action(s) + stddev_.cwiseProduct(z);
}

Vector sample_action(const GaussianPolicy& policy, const Vector& s, Rng& rng) {
  return policy.action_from_noise(s, rng.normal_vector(static_cast<Eigen::Index>(policy.action_dim())));
}

Vector score_factor(const GaussianPolicy& policy, const Vector& s, const Vector& a) {
  require_dim(a, policy.action_dim(), "action");
  return (a - policy.mean_action(s)).cwiseQuotient(policy.covariance());
}

Vector mirror_action(const GaussianPolicy& policy, const Vector& s, const Vector& a) {
  require_dim(a, policy.action_dim(), "action");
  return 2.0 * policy.mean_action(s) - a;
}

}  // namespace kpg
