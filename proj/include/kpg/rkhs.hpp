#pragma once

#include <cstddef>

#include <Eigen/Core>
#include <json.hpp>

namespace kpg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Diagonal Gaussian kernel on R^n, shared by all p action coordinates.
///
/// The matrix-valued kernel is kappa(s, s') * I_p, so only the scalar factor
/// is ever computed. `bandwidth` holds the diagonal of Sigma_H (variances,
/// not standard deviations).
class KernelSpec {
 public:
  KernelSpec(std::size_t state_dim, std::size_t action_dim, Vector bandwidth);

  static KernelSpec isotropic(std::size_t state_dim, std::size_t action_dim, double bandwidth);

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t action_dim() const noexcept { return action_dim_; }
  const Vector& bandwidth() const noexcept { return bandwidth_; }

  /// Scaled squared distance (s - t)^T Sigma_H^{-1} (s - t), no dimension checks.
  template <typename A, typename B>
  double quadratic_form(const Eigen::MatrixBase<A>& s, const Eigen::MatrixBase<B>& t) const {
    return ((s - t).array().square() * inv_bandwidth_.array()).sum();
  }

  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    return a.state_dim_ == b.state_dim_ && a.action_dim_ == b.action_dim_ &&
           a.bandwidth_ == b.bandwidth_;
  }

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  Vector bandwidth_;
  Vector inv_bandwidth_;
};

/// kappa(s, s') = exp(-(s - s')^T Sigma_H^{-1} (s - s') / 2).
double kernel_eval(const KernelSpec& spec, const Vector& s, const Vector& t);

/// Element of the vector-valued RKHS: h(.) = sum_j kappa(c_j, .) w_j.
///
/// Centers are stored row-wise (M x n), weights row-wise (M x p). Values are
/// immutable; every modifying operation returns a new expansion.
class FunctionExpansion {
 public:
  explicit FunctionExpansion(KernelSpec spec);
  FunctionExpansion(KernelSpec spec, Matrix centers, Matrix weights);

  const KernelSpec& spec() const noexcept { return spec_; }
  const Matrix& centers() const noexcept { return centers_; }
  const Matrix& weights() const noexcept { return weights_; }
  std::size_t model_order() const noexcept { return static_cast<std::size_t>(centers_.rows()); }
  bool empty() const noexcept { return model_order() == 0; }

  Vector center(std::size_t j) const { return centers_.row(static_cast<Eigen::Index>(j)).transpose(); }
  Vector weight(std::size_t j) const { return weights_.row(static_cast<Eigen::Index>(j)).transpose(); }

  /// Same dictionary, every weight multiplied by `factor`.
  FunctionExpansion scaled(double factor) const;

 private:
  KernelSpec spec_;
  Matrix centers_;
  Matrix weights_;
};

/// h(s) in R^p.
Vector evaluate(const FunctionExpansion& h, const Vector& s);

/// Scalar Gram matrix between two row-wise center lists (|D1| x |D2|).
Matrix gram(const KernelSpec& spec, const Matrix& d1, const Matrix& d2);

double inner_product(const FunctionExpansion& h, const FunctionExpansion& g);

/// ||h||_H, with round-off below zero clamped.
double rkhs_norm(const FunctionExpansion& h);

/// h + kappa(center, .) weight, model order grows by one.
FunctionExpansion append(const FunctionExpansion& h, const Vector& center, const Vector& weight);

/// Dictionary concatenation h (+) g, representing the sum of both functions.
FunctionExpansion concatenate(const FunctionExpansion& h, const FunctionExpansion& g);

/// Merges exactly coincident centers by summing their weights. Same function, fewer atoms.
FunctionExpansion merge_duplicate_centers(const FunctionExpansion& h);

nlohmann::json to_json(const FunctionExpansion& h);
FunctionExpansion expansion_from_json(const nlohmann::json& j);

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

}  // namespace kpg
