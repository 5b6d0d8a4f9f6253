#include "kpg/rkhs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpg {

namespace {

void require_dim(const Vector& v, std::size_t expected, const char* what) {
  if (static_cast<std::size_t>(v.size()) != expected) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(expected) +
                                ", got " + std::to_string(v.size()));
  }
}

void require_same_spec(const FunctionExpansion& h, const FunctionExpansion& g) {
  if (!(h.spec() == g.spec())) throw std::invalid_argument("function expansions use different kernels");
}

}  // namespace

KernelSpec::KernelSpec(std::size_t state_dim, std::size_t action_dim, Vector bandwidth)
    : state_dim_(state_dim), action_dim_(action_dim), bandwidth_(std::move(bandwidth)) {
  if (state_dim_ == 0 || action_dim_ == 0) throw std::invalid_argument("kernel dimensions must be positive");
  require_dim(bandwidth_, state_dim_, "kernel bandwidth");
  for (Eigen::Index i = 0; i < bandwidth_.size(); ++i) {
    if (!(bandwidth_[i] > 0.0) || !std::isfinite(bandwidth_[i])) {
      throw std::invalid_argument("kernel bandwidth entries must be positive and finite");
    }
  }
  inv_bandwidth_ = bandwidth_.cwiseInverse();
}

KernelSpec KernelSpec::isotropic(std::size_t state_dim, std::size_t action_dim, double bandwidth) {
  return KernelSpec(state_dim, action_dim, Vector::Constant(static_cast<Eigen::Index>(state_dim), bandwidth));
}

double kernel_eval(const KernelSpec& spec, const Vector& s, const Vector& t) {
  require_dim(s, spec.state_dim(), "kernel argument");
  require_dim(t, spec.state_dim(), "kernel argument");
  return std::exp(-0.5 * spec.quadratic_form(s, t));
}

FunctionExpansion::FunctionExpansion(KernelSpec spec)
    : spec_(std::move(spec)),
      centers_(0, static_cast<Eigen::Index>(spec_.state_dim())),
      weights_(0, static_cast<Eigen::Index>(spec_.action_dim())) {}

FunctionExpansion::FunctionExpansion(KernelSpec spec, Matrix centers, Matrix weights)
    : spec_(std::move(spec)), centers_(std::move(centers)), weights_(std::move(weights)) {
  if (centers_.rows() != weights_.rows()) {
    throw std::invalid_argument("expansion needs as many weights as centers");
  }
  if (centers_.rows() == 0) {
    centers_.resize(0, static_cast<Eigen::Index>(spec_.state_dim()));
    weights_.resize(0, static_cast<Eigen::Index>(spec_.action_dim()));
    return;
  }
  if (static_cast<std::size_t>(centers_.cols()) != spec_.state_dim()) {
    throw std::invalid_argument("center dimension does not match kernel state dimension");
  }
  if (static_cast<std::size_t>(weights_.cols()) != spec_.action_dim()) {
    throw std::invalid_argument("weight dimension does not match kernel action dimension");
  }
}

FunctionExpansion FunctionExpansion::scaled(double factor) const {
  return FunctionExpansion(spec_, centers_, weights_ * factor);
}

Vector evaluate(const FunctionExpansion& h, const Vector& s) {
  const KernelSpec& spec = h.spec();
  require_dim(s, spec.state_dim(), "evaluation point");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(spec.action_dim()));
  const Matrix& c = h.centers();
  for (Eigen::Index j = 0; j < c.rows(); ++j) {
    const double k = std::exp(-0.5 * spec.quadratic_form(c.row(j).transpose(), s));
    out.noalias() += k * h.weights().row(j).transpose();
  }
  return out;
}

Matrix gram(const KernelSpec& spec, const Matrix& d1, const Matrix& d2) {
  const auto n = static_cast<Eigen::Index>(spec.state_dim());
  if ((d1.rows() > 0 && d1.cols() != n) || (d2.rows() > 0 && d2.cols() != n)) {
    throw std::invalid_argument("gram: center dimension does not match kernel");
  }
  Matrix k(d1.rows(), d2.rows());
  const bool symmetric = &d1 == &d2;
  for (Eigen::Index i = 0; i < d1.rows(); ++i) {
    const Eigen::Index start = symmetric ? i : 0;
    for (Eigen::Index j = start; j < d2.rows(); ++j) {
      const double v = std::exp(-0.5 * spec.quadratic_form(d1.row(i).transpose(), d2.row(j).transpose()));
      k(i, j) = v;
      if (symmetric) k(j, i) = v;
    }
  }
  return k;
}

double inner_product(const FunctionExpansion& h, const FunctionExpansion& g) {
  require_same_spec(h, g);
  if (h.empty() || g.empty()) return 0.0;
  const Matrix k = gram(h.spec(), h.centers(), g.centers());
  return (h.weights().transpose() * k * g.weights()).trace();
}

double rkhs_norm(const FunctionExpansion& h) {
  return std::sqrt(std::max(0.0, inner_product(h, h)));
}

FunctionExpansion append(const FunctionExpansion& h, const Vector& center, const Vector& weight) {
  require_dim(center, h.spec().state_dim(), "appended center");
  require_dim(weight, h.spec().action_dim(), "appended weight");
  const Eigen::Index m = h.centers().rows();
  Matrix c(m + 1, h.centers().cols());
  Matrix w(m + 1, h.weights().cols());
  c.topRows(m) = h.centers();
  w.topRows(m) = h.weights();
  c.row(m) = center.transpose();
  w.row(m) = weight.transpose();
  return FunctionExpansion(h.spec(), std::move(c), std::move(w));
}

FunctionExpansion concatenate(const FunctionExpansion& h, const FunctionExpansion& g) {
  require_same_spec(h, g);
  const Eigen::Index m = h.centers().rows();
  const Eigen::Index q = g.centers().rows();
  Matrix c(m + q, static_cast<Eigen::Index>(h.spec().state_dim()));
  Matrix w(m + q, static_cast<Eigen::Index>(h.spec().action_dim()));
  c.topRows(m) = h.centers();
  c.bottomRows(q) = g.centers();
  w.topRows(m) = h.weights();
  w.bottomRows(q) = g.weights();
  return FunctionExpansion(h.spec(), std::move(c), std::move(w));
}

FunctionExpansion merge_duplicate_centers(const FunctionExpansion& h) {
  // Lexicographic order on the raw coordinates; first occurrence fixes the output order.
  auto less = [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  };
  std::map<Vector, Eigen::Index, decltype(less)> slot(less);
  std::vector<Eigen::Index> first_row;
  std::vector<Vector> summed;
  for (Eigen::Index j = 0; j < h.centers().rows(); ++j) {
    Vector c = h.centers().row(j).transpose();
    auto [it, inserted] = slot.emplace(c, static_cast<Eigen::Index>(summed.size()));
    if (inserted) {
      first_row.push_back(j);
      summed.push_back(h.weights().row(j).transpose());
    } else {
      summed[static_cast<std::size_t>(it->second)] += h.weights().row(j).transpose();
    }
  }
  const auto m = static_cast<Eigen::Index>(summed.size());
  Matrix c(m, h.centers().cols());
  Matrix w(m, h.weights().cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    c.row(i) = h.centers().row(first_row[static_cast<std::size_t>(i)]);
    w.row(i) = summed[static_cast<std::size_t>(i)].transpose();
  }
  return FunctionExpansion(h.spec(), std::move(c), std::move(w));
}

nlohmann::json to_json(const KernelSpec& spec) {
  nlohmann::json bw = nlohmann::json::array();
  for (Eigen::Index i = 0; i < spec.bandwidth().size(); ++i) bw.push_back(spec.bandwidth()[i]);
  return {{"state_dim", spec.state_dim()}, {"action_dim", spec.action_dim()}, {"bandwidth", bw}};
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  const auto n = j.at("state_dim").get<std::size_t>();
  const auto p = j.at("action_dim").get<std::size_t>();
  const auto bw = j.at("bandwidth").get<std::vector<double>>();
  return KernelSpec(n, p, Eigen::Map<const Vector>(bw.data(), static_cast<Eigen::Index>(bw.size())));
}

nlohmann::json to_json(const FunctionExpansion& h) {
  nlohmann::json out = to_json(h.spec());
  nlohmann::json centers = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  for (Eigen::Index j = 0; j < h.centers().rows(); ++j) {
    centers.push_back(std::vector<double>(h.centers().row(j).begin(), h.centers().row(j).end()));
    weights.push_back(std::vector<double>(h.weights().row(j).begin(), h.weights().row(j).end()));
  }
  out["centers"] = std::move(centers);
  out["weights"] = std::move(weights);
  return out;
}

FunctionExpansion expansion_from_json(const nlohmann::json& j) {
  KernelSpec spec = kernel_spec_from_json(j);
  const auto& cj = j.at("centers");
  const auto& wj = j.at("weights");
  if (cj.size() != wj.size()) throw std::invalid_argument("expansion json: centers/weights length mismatch");
  const auto m = static_cast<Eigen::Index>(cj.size());
  const auto n = static_cast<Eigen::Index>(spec.state_dim());
  const auto p = static_cast<Eigen::Index>(spec.action_dim());
  Matrix c(m, n);
  Matrix w(m, p);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto ci = cj[static_cast<std::size_t>(i)].get<std::vector<double>>();
    const auto wi = wj[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(ci.size()) != n || static_cast<Eigen::Index>(wi.size()) != p) {
      throw std::invalid_argument("expansion json: row has wrong dimension");
    }
    for (Eigen::Index k = 0; k < n; ++k) c(i, k) = ci[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 0; k < p; ++k) w(i, k) = wi[static_cast<std::size_t>(k)];
  }
  return FunctionExpansion(std::move(spec), std::move(c), std::move(w));
}

}  // namespace kpg
