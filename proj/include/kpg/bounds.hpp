#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "kpg/rkhs.hpp"

namespace kpg::bounds {

/// Constants of the convergence analysis. Lipschitz constants and `h_norm`
/// may be zero; everything else must be strictly positive.
struct ProblemConstants {
  double B_r = 1.0;   ///< reward bound
  double L_rs = 0.0;  ///< reward Lipschitz constant in s
  double L_ra = 0.0;  ///< reward Lipschitz constant in a
  double beta_rho = 1.0;  ///< lower bound of the occupancy density
  double B_rho = 1.0;     ///< upper bound of the occupancy density
  double L_p = 0.0;
  double L_ps = 0.0;
  double L_pa = 0.0;
  double gamma = 0.9;
  std::size_t p = 1;  ///< action dimension
  std::size_t n = 1;  ///< state dimension
  double lambda_min_sigma = 1.0;  ///< smallest eigenvalue of the policy covariance
  Vector kernel_bandwidth;        ///< diagonal of Sigma_H
  double state_measure = 1.0;     ///< |S|
  double h_norm = 0.0;
  double epsilon = 1.0;

  void validate() const;
  double lambda_min_kernel() const { return kernel_bandwidth.minCoeff(); }
  double det_kernel() const { return kernel_bandwidth.prod(); }
  double kernel_norm() const { return kernel_bandwidth.maxCoeff(); }
  double density_ratio() const { return beta_rho / B_rho; }
};

class InfeasibleConfiguration : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Smoothness {
  double L1;
  double L2;
};
Smoothness smoothness(const ProblemConstants& pc);

double moment_sigma(const ProblemConstants& pc);

struct Drift {
  double C1;
  double C2;
};
Drift drift_constants(double L1, double L2, double sigma, double K);

double gradient_norm_bound(const ProblemConstants& pc);

double max_compression_K(const ProblemConstants& pc, double B_grad);

/// Largest admissible step size for compression constant K.
/// Returns 0 at K == K_max and throws InfeasibleConfiguration for K > K_max.
double max_step(double C1, double C2, const ProblemConstants& pc, double B_grad, double K);

/// Z = sqrt(det(2 pi Sigma_H)).
double kernel_normalizer(const Vector& bandwidth);

struct KernelCondition {
  double lhs;
  double rhs;
  bool satisfied;
};
KernelCondition kernel_condition(const ProblemConstants& pc, double L, double B, double Z);

struct LipschitzD {
  double B_D;
  double L_h;
  double L_Qs;
  double L_Qa;
  double L_D;
  double B;
  double L;
};
/// With `gamma_factored` the L_Qs / L_Qa terms carry an extra factor gamma.
LipschitzD lipschitz_D(const ProblemConstants& pc, bool gamma_factored = false);

/// Everything above for one (K, eta) pair.
struct Report {
  Smoothness smooth;
  double sigma;
  Drift drift;
  double B_grad;
  double K;
  double eta;
  double K_max;
  double eta_max;  ///< 0 when K >= K_max
  LipschitzD lip;
  double Z;
  KernelCondition kernel;
  bool feasible;
  std::string verdict;
};
Report evaluate(const ProblemConstants& pc, double K, double eta, bool gamma_factored = false);

}  // namespace kpg::bounds
