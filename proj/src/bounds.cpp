#include "kpg/bounds.hpp"

#include <cmath>
#include <numbers>

namespace kpg::bounds {

namespace {

// Gamma(a) / Gamma(b). Direct quotient while both stay finite.
double gamma_ratio(double a, double b) {
  if (a < 150.0 && b < 150.0) return std::tgamma(a) / std::tgamma(b);
  return std::exp(std::lgamma(a) - std::lgamma(b));
}

void positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("bounds.") + field + " must be positive");
}

void non_negative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("bounds.") + field + " must be non-negative");
  }
}

}  // namespace

void ProblemConstants::validate() const {
  positive(B_r, "B_r");
  positive(beta_rho, "beta_rho");
  positive(B_rho, "B_rho");
  if (beta_rho > B_rho) throw std::invalid_argument("bounds.beta_rho must not exceed bounds.B_rho");
  non_negative(L_rs, "L_rs");
  non_negative(L_ra, "L_ra");
  non_negative(L_p, "L_p");
  non_negative(L_ps, "L_ps");
  non_negative(L_pa, "L_pa");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("bounds.gamma must lie in (0, 1)");
  if (p == 0) throw std::invalid_argument("bounds.p must be positive");
  if (n == 0) throw std::invalid_argument("bounds.n must be positive");
  positive(lambda_min_sigma, "lambda_min_sigma");
  if (static_cast<std::size_t>(kernel_bandwidth.size()) != n) {
    throw std::invalid_argument("bounds.kernel_bandwidth must have n entries");
  }
  for (Eigen::Index i = 0; i < kernel_bandwidth.size(); ++i) positive(kernel_bandwidth[i], "kernel_bandwidth");
  positive(state_measure, "state_measure");
  non_negative(h_norm, "h_norm");
  positive(epsilon, "epsilon");
}

Smoothness smoothness(const ProblemConstants& pc) {
  const double g = pc.gamma;
  const auto p = static_cast<double>(pc.p);
  const double lam = pc.lambda_min_sigma;
  const double L1 = pc.B_r * (1.0 - g + p * (1.0 + g)) / (lam * (1.0 - g) * (1.0 - g));
  const double L2 = pc.B_r * (1.0 + p) * std::sqrt(p) / (std::pow(lam, 1.5) * std::pow(1.0 - g, 3));
  return {L1, L2};
}

double moment_sigma(const ProblemConstants& pc) {
  const double g = pc.gamma;
  const auto p = static_cast<double>(pc.p);
  const double root = std::sqrt(pc.lambda_min_sigma);
  const double moment = 4.0 * gamma_ratio(2.0 + p / 2.0, p / 2.0);
  return std::cbrt(3.0 * g) / (root * (1.0 - g) * (1.0 - g)) * std::pow(moment, 0.25);
}

Drift drift_constants(double L1, double L2, double sigma, double K) {
  const double s = sigma + K;
  return {L1 * s * s, L2 * s * s * s};
}

double gradient_norm_bound(const ProblemConstants& pc) {
  const double g = pc.gamma;
  return std::sqrt(static_cast<double>(pc.p)) * pc.B_r / ((1.0 - g) * (1.0 - g) * std::sqrt(pc.lambda_min_sigma));
}

double max_compression_K(const ProblemConstants& pc, double B_grad) {
  return pc.epsilon / (2.0 * B_grad) * pc.density_ratio();
}

double max_step(double C1, double C2, const ProblemConstants& pc, double B_grad, double K) {
  const double K_max = max_compression_K(pc, B_grad);
  if (K > K_max) {
    throw InfeasibleConfiguration("compression constant K = " + std::to_string(K) + " exceeds K_max = " +
                                  std::to_string(K_max));
  }
  const double slack = pc.epsilon * pc.density_ratio() / 2.0 - B_grad * K;
  if (K == K_max || slack <= 0.0) return 0.0;
  // Root of C2 eta^2 + C1 eta = slack, written without the cancellation of
  // (sqrt(C1^2 + 4 C2 slack) - C1) / (2 C2).
  return 2.0 * slack / (std::sqrt(C1 * C1 + 4.0 * C2 * slack) + C1);
}

double kernel_normalizer(const Vector& bandwidth) {
  return std::sqrt((2.0 * std::numbers::pi * bandwidth.array()).prod());
}

KernelCondition kernel_condition(const ProblemConstants& pc, double L, double B, double Z) {
  const double ratio = pc.density_ratio();
  const double lhs = std::sqrt(static_cast<double>(pc.n * pc.p)) * (1.0 + ratio) * pc.kernel_norm() * Z * L * B *
                     pc.state_measure;
  const double rhs = pc.epsilon / 2.0 * ratio;
  return {lhs, rhs, lhs < rhs};
}

LipschitzD lipschitz_D(const ProblemConstants& pc, bool gamma_factored) {
  const double g = pc.gamma;
  const auto p = static_cast<double>(pc.p);
  LipschitzD out{};
  out.B_D = std::sqrt(2.0) * pc.B_r / (1.0 - g) * gamma_ratio((p + 1.0) / 2.0, p / 2.0);
  out.L_h = pc.h_norm / std::sqrt(pc.lambda_min_kernel());
  const double factor = (gamma_factored ? g : 1.0) * pc.B_r * pc.state_measure / (1.0 - g);
  out.L_Qs = pc.L_rs + factor * pc.L_ps;
  out.L_Qa = pc.L_ra + factor * pc.L_pa;
  out.L_D = out.L_Qs + out.L_Qa * out.L_h;
  out.B = pc.B_rho * out.B_D;
  out.L = out.B_D * pc.L_p + pc.B_rho * out.L_D;
  return out;
}

Report evaluate(const ProblemConstants& pc, double K, double eta, bool gamma_factored) {
  pc.validate();
  if (!(K >= 0.0)) throw std::invalid_argument("bounds: K must be non-negative");
  Report r{};
  r.K = K;
  r.eta = eta;
  r.smooth = smoothness(pc);
  r.sigma = moment_sigma(pc);
  r.drift = drift_constants(r.smooth.L1, r.smooth.L2, r.sigma, K);
  r.B_grad = gradient_norm_bound(pc);
  r.K_max = max_compression_K(pc, r.B_grad);
  r.lip = lipschitz_D(pc, gamma_factored);
  r.Z = kernel_normalizer(pc.kernel_bandwidth);
  r.kernel = kernel_condition(pc, r.lip.L, r.lip.B, r.Z);

  std::string why;
  if (K >= r.K_max) {
    r.eta_max = 0.0;
    why = "K >= K_max";
  } else {
    r.eta_max = max_step(r.drift.C1, r.drift.C2, pc, r.B_grad, K);
    if (!(eta > 0.0 && eta <= r.eta_max)) why = "eta outside (0, eta_max]";
  }
  if (!r.kernel.satisfied) why += why.empty() ? "kernel width condition violated" : "; kernel width condition violated";
  r.feasible = why.empty();
  r.verdict = r.feasible ? "feasible" : "infeasible (" + why + ")";
  return r;
}

}  // namespace kpg::bounds
