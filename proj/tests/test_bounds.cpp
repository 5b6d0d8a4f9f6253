#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kpg/bounds.hpp"

using namespace kpg;
using namespace kpg::bounds;

namespace {

ProblemConstants base(std::size_t n = 1, std::size_t p = 1) {
  ProblemConstants pc;
  pc.B_r = 1.0;
  pc.gamma = 0.9;
  pc.n = n;
  pc.p = p;
  pc.lambda_min_sigma = 1.0;
  pc.kernel_bandwidth = Vector::Constant(static_cast<Eigen::Index>(n), 1.0);
  return pc;
}

// Gamma at positive integers and half-integers, built from the recursion.
double half_integer_gamma(double x) {
  double g = std::abs(x - std::round(x)) < 1e-12 ? 1.0 : std::sqrt(std::numbers::pi);
  for (double y = std::abs(x - std::round(x)) < 1e-12 ? 1.0 : 0.5; y < x - 1e-12; y += 1.0) g *= y;
  return g;
}

bool close(double a, double b, double rel = 1e-12) { return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("gamma oracle sanity") {
  CHECK(close(half_integer_gamma(0.5), std::sqrt(std::numbers::pi)));
  CHECK(close(half_integer_gamma(3.0), 2.0));
  CHECK(close(half_integer_gamma(2.5), 0.75 * std::sqrt(std::numbers::pi)));
}

TEST_CASE("smoothness constants") {
  auto pc = base();
  const auto s = smoothness(pc);
  CHECK(close(s.L1, 200.0));
  CHECK(close(s.L2, 2.0 / std::pow(0.1, 3)));
  pc.B_r = 2.0;
  CHECK(close(smoothness(pc).L1, 400.0));
  pc.B_r = 1.0;
  pc.p = 3;
  pc.gamma = 1e-300;
  CHECK(close(smoothness(pc).L1, 4.0, 1e-12));
}

TEST_CASE("moment sigma") {
  auto pc = base(1, 2);
  const double expected = std::cbrt(2.7) / 0.01 * std::pow(8.0, 0.25);
  CHECK(close(moment_sigma(pc), expected));
  CHECK(moment_sigma(pc) == doctest::Approx(234.19).epsilon(1e-4));
  for (std::size_t p : {1u, 3u, 4u, 7u}) {
    pc.p = p;
    const double ratio = half_integer_gamma(2.0 + p / 2.0) / half_integer_gamma(p / 2.0);
    CHECK(close(moment_sigma(pc), std::cbrt(2.7) / 0.01 * std::pow(4.0 * ratio, 0.25)));
  }
  pc.lambda_min_sigma = 4.0;
  pc.p = 2;
  CHECK(close(moment_sigma(pc), expected / 2.0));
}

TEST_CASE("drift constants") {
  const auto d = drift_constants(200.0, 3.0, 1.0, 1.0);
  CHECK(close(d.C1, 800.0));
  CHECK(close(d.C2, 3.0 * 8.0));
  const auto z = drift_constants(2.0, 5.0, 3.0, 0.0);
  CHECK(close(z.C1, 18.0));
  CHECK(close(z.C2, 135.0));
}

TEST_CASE("gradient bound and compression limit") {
  auto pc = base();
  CHECK(close(gradient_norm_bound(pc), 100.0));
  pc.beta_rho = 0.5;
  CHECK(close(max_compression_K(pc, 100.0), 0.0025));
  pc.p = 4;
  CHECK(close(gradient_norm_bound(pc), 200.0));
}

TEST_CASE("step size limit") {
  auto pc = base();
  pc.beta_rho = 0.5;
  const double B = 100.0, K_max = max_compression_K(pc, B);
  CHECK(max_step(10.0, 2.0, pc, B, K_max) == 0.0);
  CHECK_THROWS_AS(max_step(10.0, 2.0, pc, B, 2.0 * K_max), InfeasibleConfiguration);

  const double C1 = 10.0, C2 = 2.0, K = 0.001;
  const double slack = 0.25 - B * K;
  const double textbook = (std::sqrt(C1 * C1 + 4.0 * C2 * slack) - C1) / (2.0 * C2);
  CHECK(close(max_step(C1, C2, pc, B, K), textbook, 1e-12));
  CHECK(close(max_step(C1, 1e-14, pc, B, K), slack / C1, 1e-9));

  double prev = max_step(C1, C2, pc, B, 0.0);
  for (int i = 1; i <= 50; ++i) {
    const double eta = max_step(C1, C2, pc, B, K_max * i / 50.0);
    CHECK(eta < prev);
    prev = eta;
  }
}

TEST_CASE("kernel condition") {
  auto pc = base(2, 2);
  pc.kernel_bandwidth = Vector::Constant(2, 1e-2);
  const double Z = kernel_normalizer(pc.kernel_bandwidth);
  CHECK(close(Z, 2.0 * std::numbers::pi * 1e-2));
  const auto kc = kernel_condition(pc, 1.0, 1.0, Z);
  CHECK(close(kc.lhs, 2.0 * 2.0 * 1e-2 * 2.0 * std::numbers::pi * 1e-2));
  CHECK(close(kc.rhs, 0.5));
  CHECK(kc.satisfied);
  pc.kernel_bandwidth = Vector::Constant(2, 1e-6);
  CHECK(kernel_condition(pc, 1.0, 1.0, kernel_normalizer(pc.kernel_bandwidth)).lhs < 1e-10);
}

TEST_CASE("Lipschitz constants of D") {
  auto pc = base();
  pc.L_rs = 0.3;
  pc.L_ra = 0.7;
  pc.L_p = 2.0;
  pc.L_ps = 0.5;
  pc.L_pa = 0.25;
  pc.B_rho = 3.0;
  pc.beta_rho = 1.0;
  pc.state_measure = 4.0;
  pc.h_norm = 0.0;
  auto l = lipschitz_D(pc);
  CHECK(close(l.B_D, std::sqrt(2.0) / (0.1 * std::sqrt(std::numbers::pi))));
  CHECK(l.B_D == doctest::Approx(7.9788).epsilon(1e-4));
  CHECK(close(l.L_Qs, 0.3 + 4.0 * 0.5 / 0.1));
  CHECK(close(l.L_Qa, 0.7 + 4.0 * 0.25 / 0.1));
  CHECK(close(l.L_D, l.L_Qs));
  CHECK(close(l.B, 3.0 * l.B_D));
  CHECK(close(l.L, l.B_D * 2.0 + 3.0 * l.L_D));

  pc.h_norm = 2.0;
  pc.kernel_bandwidth = Vector::Constant(1, 0.25);
  l = lipschitz_D(pc);
  CHECK(close(l.L_h, 4.0));
  CHECK(close(l.L_D, l.L_Qs + 4.0 * l.L_Qa));

  const auto f = lipschitz_D(pc, true);
  CHECK(close(f.L_Qs, 0.3 + 0.9 * 4.0 * 0.5 / 0.1));

  pc.p = 4;
  CHECK(close(lipschitz_D(pc).B_D, std::sqrt(2.0) / 0.1 * half_integer_gamma(2.5) / half_integer_gamma(2.0)));
}

TEST_CASE("evaluate produces positive constants and a verdict") {
  auto pc = base(2, 2);
  pc.L_rs = pc.L_ra = pc.L_p = pc.L_ps = pc.L_pa = 1.0;
  pc.h_norm = 1.0;
  pc.kernel_bandwidth = Vector::Constant(2, 1e-4);
  const double B = gradient_norm_bound(pc);
  const double K_max = max_compression_K(pc, B);
  const auto r = evaluate(pc, 0.5 * K_max, 1e-12);
  for (double v : {r.smooth.L1, r.smooth.L2, r.sigma, r.drift.C1, r.drift.C2, r.B_grad, r.K_max, r.eta_max,
                   r.lip.B_D, r.lip.L_h, r.lip.L_Qs, r.lip.L_Qa, r.lip.L_D, r.lip.B, r.lip.L, r.Z}) {
    CHECK(v > 0.0);
  }
  CHECK(r.feasible);
  CHECK(r.verdict == "feasible");

  const auto at_max = evaluate(pc, K_max, 1e-12);
  CHECK(at_max.eta_max == 0.0);
  CHECK(!at_max.feasible);
  CHECK(at_max.verdict.rfind("infeasible", 0) == 0);
}

TEST_CASE("constants validation") {
  auto pc = base();
  pc.beta_rho = 2.0;
  CHECK_THROWS(pc.validate());
  pc = base();
  pc.gamma = 1.0;
  CHECK_THROWS(pc.validate());
  pc = base();
  pc.kernel_bandwidth = Vector::Ones(3);
  CHECK_THROWS(pc.validate());
}
