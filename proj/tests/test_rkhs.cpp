#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "kpg/rkhs.hpp"
#include "kpg/rng.hpp"

using namespace kpg;

namespace {

FunctionExpansion random_expansion(Rng& rng, std::size_t m, std::size_t n, std::size_t p, double bw = 0.7) {
  Matrix c(m, n), w(m, p);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  return FunctionExpansion(KernelSpec::isotropic(n, p, bw), c, w);
}

}  // namespace

TEST_CASE("kernel value matches the closed form") {
  Vector bw(2);
  bw << 0.5, 2.0;
  KernelSpec k(2, 1, bw);
  Vector s(2), t(2);
  s << 1.0, -1.0;
  t << 0.0, 1.0;
  // (1/0.5 + 4/2) / 2 = 2
  CHECK(kernel_eval(k, s, t) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(kernel_eval(k, s, s) == 1.0);
}

TEST_CASE("kernel rejects non-positive bandwidths") {
  CHECK_THROWS(KernelSpec(1, 1, Vector::Zero(1)));
  CHECK_THROWS(KernelSpec::isotropic(2, 1, -1.0));
}

TEST_CASE("gram is symmetric positive semidefinite") {
  Rng rng(3);
  auto h = random_expansion(rng, 8, 3, 2);
  Matrix K = gram(h.spec(), h.centers(), h.centers());
  CHECK((K - K.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(K);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("inner product, norm and evaluation agree with the dense formulas") {
  Rng rng(4);
  auto h = random_expansion(rng, 5, 2, 3);
  auto g = random_expansion(rng, 4, 2, 3);
  Matrix Khg = gram(h.spec(), h.centers(), g.centers());
  const double ip = (h.weights().transpose() * Khg * g.weights()).trace();
  CHECK(inner_product(h, g) == doctest::Approx(ip).epsilon(1e-12));
  CHECK(inner_product(h, g) == doctest::Approx(inner_product(g, h)).epsilon(1e-12));
  CHECK(rkhs_norm(h) == doctest::Approx(std::sqrt(inner_product(h, h))).epsilon(1e-12));

  Vector s(2);
  s << 0.3, -0.2;
  Vector direct = Vector::Zero(3);
  for (std::size_t j = 0; j < h.model_order(); ++j) direct += kernel_eval(h.spec(), h.center(j), s) * h.weight(j);
  CHECK((evaluate(h, s) - direct).norm() < 1e-14);
}

TEST_CASE("reproducing property: <h, kappa(s,.) e_i> = h_i(s)") {
  Rng rng(5);
  auto h = random_expansion(rng, 6, 2, 2);
  Vector s(2);
  s << 0.1, 0.4;
  for (int i = 0; i < 2; ++i) {
    Matrix c = s.transpose();
    Matrix w = Matrix::Zero(1, 2);
    w(0, i) = 1.0;
    FunctionExpansion probe(h.spec(), c, w);
    CHECK(inner_product(h, probe) == doctest::Approx(evaluate(h, s)[i]).epsilon(1e-12));
  }
}

TEST_CASE("append, concatenate and merge represent the same functions") {
  Rng rng(6);
  auto h = random_expansion(rng, 4, 2, 1);
  auto g = random_expansion(rng, 3, 2, 1);
  Vector s(2);
  s << -0.5, 0.25;
  auto sum = concatenate(h, g);
  CHECK(sum.model_order() == 7);
  CHECK(evaluate(sum, s)[0] == doctest::Approx(evaluate(h, s)[0] + evaluate(g, s)[0]).epsilon(1e-12));

  Vector w(1);
  w << 2.0;
  auto dup = append(h, h.center(1), w);
  CHECK(dup.model_order() == 5);
  auto merged = merge_duplicate_centers(dup);
  CHECK(merged.model_order() == 4);
  CHECK(evaluate(merged, s)[0] == doctest::Approx(evaluate(dup, s)[0]).epsilon(1e-12));
  CHECK(rkhs_norm(merged) == doctest::Approx(rkhs_norm(dup)).epsilon(1e-10));

  CHECK(evaluate(h.scaled(-2.0), s)[0] == doctest::Approx(-2.0 * evaluate(h, s)[0]).epsilon(1e-14));
}

TEST_CASE("mismatched specs are rejected") {
  Rng rng(7);
  auto h = random_expansion(rng, 2, 2, 1, 1.0);
  auto g = random_expansion(rng, 2, 2, 1, 2.0);
  CHECK_THROWS(inner_product(h, g));
  CHECK_THROWS(concatenate(h, g));
}

TEST_CASE("json round trip is exact") {
  Rng rng(8);
  auto h = random_expansion(rng, 5, 3, 2);
  auto back = expansion_from_json(nlohmann::json::parse(to_json(h).dump()));
  CHECK(back.spec() == h.spec());
  CHECK(back.centers() == h.centers());
  CHECK(back.weights() == h.weights());
}

TEST_CASE("empty expansion evaluates to zero") {
  FunctionExpansion h(KernelSpec::isotropic(2, 3, 1.0));
  CHECK(h.empty());
  CHECK(evaluate(h, Vector::Ones(2)).norm() == 0.0);
  CHECK(rkhs_norm(h) == 0.0);
}

TEST_CASE("substreams are deterministic and distinct") {
  Rng a(11), b(11);
  CHECK(a.substream(3).next_u64() == b.substream(3).next_u64());
  CHECK(a.substream(3).next_u64() != a.substream(4).next_u64());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform_open();
    CHECK((u > 0.0 && u < 1.0));
  }
}
