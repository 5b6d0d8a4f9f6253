#include "kpg/komp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace kpg {

namespace {

using Index = Eigen::Index;
// The sweeps run in extended precision: dictionaries along a trajectory are
// often badly conditioned and the errors are differences of nearby numbers.
using Real = long double;
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

constexpr double kMaxCondition = 1e16;
// Removal errors at or below this (relative to max(1, ||h~||^2)) count as
// exact redundancy, so duplicates go even with a zero budget.
constexpr Real kRedundancyFloor = 1e-16L;

std::vector<Index> without(const std::vector<Index>& idx, std::size_t pos) {
  std::vector<Index> out;
  out.reserve(idx.size() - 1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i != pos) out.push_back(idx[i]);
  }
  return out;
}

template <class M>
M drop_row(const M& m, Index r) {
  M out(m.rows() - 1, m.cols());
  out.topRows(r) = m.topRows(r);
  out.bottomRows(m.rows() - r - 1) = m.bottomRows(m.rows() - r - 1);
  return out;
}

/// Leave-one-out projections of h~ onto subsets of its own dictionary.
///
/// `gram_full` and `cross_full` are K(D~, D~) and K(D~, D~) w~ for the
/// original input; `active` is the current dictionary (a subset of D~) whose
/// projection error is `current_error`. When K(D, D) is well conditioned all
/// errors come from one inverse via the rank-one downdate
/// e_j = e_D + ||u_j||^2 / [K^-1]_jj; otherwise each candidate is solved with
/// an SVD pseudo-inverse.
class LeaveOneOutSweep {
 public:
  LeaveOneOutSweep(const RMatrix& gram_full, const RMatrix& cross_full, Real norm2, std::vector<Index> active,
                   Real current_error)
      : gram_full_(gram_full),
        cross_full_(cross_full),
        norm2_(norm2),
        active_(std::move(active)),
        current_error_(current_error) {
    const auto m = static_cast<Index>(active_.size());
    errors_.assign(active_.size(), 0.0L);
    if (m == 1) {
      errors_[0] = norm2_;
      return;
    }
    const RMatrix kss = gram_full_(active_, active_);
    Eigen::LLT<RMatrix> llt(kss);
    if (llt.info() == Eigen::Success && llt.rcond() * kMaxCondition >= 1.0L) {
      direct_ = true;
      inverse_ = llt.solve(RMatrix::Identity(m, m));
      projected_ = inverse_ * cross_full_(active_, Eigen::all);
      for (Index j = 0; j < m; ++j) {
        errors_[static_cast<std::size_t>(j)] =
            current_error_ + projected_.row(j).squaredNorm() / inverse_(j, j);
      }
      return;
    }
    for (std::size_t j = 0; j < active_.size(); ++j) {
      errors_[j] = pseudo_inverse_projection(j).first;
    }
  }

  const std::vector<Real>& errors() const { return errors_; }

  RMatrix weights_without(std::size_t pos) const {
    if (active_.size() == 1) return RMatrix(0, cross_full_.cols());
    if (direct_) {
      const auto j = static_cast<Index>(pos);
      const RMatrix shift = drop_row<RMatrix>(inverse_.col(j), j) * (projected_.row(j) / inverse_(j, j));
      return drop_row(projected_, j) - shift;
    }
    return pseudo_inverse_projection(pos).second;
  }

 private:
  std::pair<Real, RMatrix> pseudo_inverse_projection(std::size_t pos) const {
    const std::vector<Index> rest = without(active_, pos);
    const RMatrix k = gram_full_(rest, rest);
    const RMatrix b = cross_full_(rest, Eigen::all);
    Eigen::JacobiSVD<RMatrix> svd(k, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1.0L / kMaxCondition);
    RMatrix u = svd.solve(b);
    const Real e = norm2_ - 2.0L * u.cwiseProduct(b).sum() + (u.transpose() * k * u).trace();
    return {std::max(Real(0), e), std::move(u)};
  }

  const RMatrix& gram_full_;
  const RMatrix& cross_full_;
  Real norm2_;
  std::vector<Index> active_;
  Real current_error_;
  bool direct_ = false;
  RMatrix inverse_;
  RMatrix projected_;
  std::vector<Real> errors_;
};

bool removable(Real candidate, double budget, Real floor) {
  return std::sqrt(candidate) < budget || candidate <= floor;
}

RMatrix drop_row_col(const RMatrix& m, Index j) {
  const Index n = m.rows();
  RMatrix out(n - 1, n - 1);
  out.topLeftCorner(j, j) = m.topLeftCorner(j, j);
  out.topRightCorner(j, n - j - 1) = m.topRightCorner(j, n - j - 1);
  out.bottomLeftCorner(n - j - 1, j) = m.bottomLeftCorner(n - j - 1, j);
  out.bottomRightCorner(n - j - 1, n - j - 1) = m.bottomRightCorner(n - j - 1, n - j - 1);
  return out;
}

std::vector<Index> all_indices(Index m) {
  std::vector<Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

}  // namespace

LeaveOneOut leave_one_out_error(const FunctionExpansion& h, std::size_t j) {
  if (j >= h.model_order()) throw std::out_of_range("leave_one_out_error: index out of range");
  const RMatrix k = gram(h.spec(), h.centers(), h.centers()).cast<Real>();
  const RMatrix cross = k * h.weights().cast<Real>();
  const Real norm2 = std::max(Real(0), h.weights().cast<Real>().cwiseProduct(cross).sum());
  LeaveOneOutSweep sweep(k, cross, norm2, all_indices(k.rows()), 0.0L);
  return {static_cast<double>(sweep.errors()[j]), sweep.weights_without(j).cast<double>()};
}

CompressionReport komp(const FunctionExpansion& input, double budget) {
  if (!(budget >= 0.0)) throw std::invalid_argument("komp: budget must be non-negative");
  CompressionReport report{input, 0, 0.0, 0.0};
  if (input.empty()) return report;

  const RMatrix k = gram(input.spec(), input.centers(), input.centers()).cast<Real>();
  const RMatrix cross = k * input.weights().cast<Real>();
  const Real norm2 = std::max(Real(0), input.weights().cast<Real>().cwiseProduct(cross).sum());
  const Real floor = kRedundancyFloor * std::max(Real(1), norm2);

  // Exact duplicates cost nothing to remove. By the lowest-index rule the
  // earlier copy goes and its weight moves to the last copy.
  std::vector<Index> active;
  RMatrix weights;
  {
    const Matrix& c = input.centers();
    std::vector<Index> last(static_cast<std::size_t>(c.rows()));
    for (Index i = 0; i < c.rows(); ++i) {
      last[static_cast<std::size_t>(i)] = i;
      for (Index j = c.rows() - 1; j > i; --j) {
        if (c.row(j) == c.row(i)) {
          last[static_cast<std::size_t>(i)] = j;
          break;
        }
      }
    }
    RMatrix merged = input.weights().cast<Real>();
    for (Index i = 0; i < c.rows(); ++i) {
      const Index to = last[static_cast<std::size_t>(i)];
      if (to == i) {
        active.push_back(i);
      } else {
        merged.row(to) += merged.row(i);
        ++report.removed_count;
      }
    }
    weights = merged(active, Eigen::all);
  }
  Real error = 0.0L;

  while (!active.empty()) {
    LeaveOneOutSweep sweep(k, cross, norm2, active, error);
    const auto& e = sweep.errors();
    const auto best = static_cast<std::size_t>(std::min_element(e.begin(), e.end()) - e.begin());
    const Real candidate = e[best];
    if (!removable(candidate, budget, floor)) {
      report.final_min_error = static_cast<double>(std::sqrt(candidate));
      break;
    }
    weights = sweep.weights_without(best);
    active = without(active, best);
    error = candidate;
    ++report.removed_count;
  }

  if (report.removed_count > 0) {
    Matrix centers = input.centers()(active, Eigen::all);
    report.pruned = FunctionExpansion(input.spec(), std::move(centers), weights.cast<double>());
  }
  report.residual_norm = static_cast<double>(std::sqrt(error));
  return report;
}

bool OnlineCompressor::matches(const FunctionExpansion& h) const {
  return valid_ && centers_.rows() == h.centers().rows() && centers_ == h.centers();
}

void OnlineCompressor::rebuild(const FunctionExpansion& h) {
  centers_ = h.centers();
  valid_ = false;
  const Index m = centers_.rows();
  gram_ = gram(h.spec(), centers_, centers_).cast<Real>();
  if (m == 0) {
    inverse_.resize(0, 0);
    valid_ = true;
    return;
  }
  Eigen::LLT<RMatrix> llt(gram_);
  if (llt.info() != Eigen::Success || llt.rcond() * kMaxCondition < 1.0L) return;
  inverse_ = llt.solve(RMatrix::Identity(m, m));
  valid_ = true;
}

CompressionReport OnlineCompressor::fallback(const FunctionExpansion& input, double budget) {
  ++fallbacks_;
  CompressionReport report = komp(input, budget);
  rebuild(report.pruned);
  return report;
}

CompressionReport OnlineCompressor::compress(const FunctionExpansion& h, const Vector& center, const Vector& weight,
                                             double budget) {
  if (!(budget >= 0.0)) throw std::invalid_argument("komp: budget must be non-negative");
  const FunctionExpansion input = append(h, center, weight);
  ++calls_;
  if (!matches(h) || (refresh_interval_ > 0 && calls_ % refresh_interval_ == 0)) rebuild(h);
  if (!valid_) return fallback(input, budget);
  // A repeated center makes the border singular; roundoff can hide that.
  for (Index i = 0; i < centers_.rows(); ++i) {
    if (centers_.row(i) == center.transpose()) return fallback(input, budget);
  }

  // Border K(D, D)^-1 with the new atom.
  const Index m = centers_.rows();
  const RVector k = gram(h.spec(), centers_, center.transpose()).cast<Real>();
  const RVector gk = inverse_ * k;
  const Real schur = 1.0L - k.dot(gk);
  if (!(schur * kMaxCondition > 1.0L)) return fallback(input, budget);

  RMatrix g(m + 1, m + 1);
  g.topLeftCorner(m, m) = inverse_ + gk * gk.transpose() / schur;
  g.topRightCorner(m, 1) = -gk / schur;
  g.bottomLeftCorner(1, m) = -gk.transpose() / schur;
  g(m, m) = 1.0 / schur;
  RMatrix kk(m + 1, m + 1);
  kk.topLeftCorner(m, m) = gram_;
  kk.topRightCorner(m, 1) = k;
  kk.bottomLeftCorner(1, m) = k.transpose();
  kk(m, m) = 1.0;

  RMatrix u = input.weights().cast<Real>();
  const Real norm2 = std::max(Real(0), u.cwiseProduct(kk * u).sum());
  const Real floor = kRedundancyFloor * std::max(Real(1), norm2);
  std::vector<Index> active = all_indices(m + 1);
  Real error = 0.0L;
  CompressionReport report{input, 0, 0.0, 0.0};

  while (!active.empty()) {
    Index best = 0;
    Real candidate = std::numeric_limits<Real>::infinity();
    for (Index j = 0; j < g.rows(); ++j) {
      if (!(g(j, j) > 0.0L)) return fallback(input, budget);
      const Real e = error + u.row(j).squaredNorm() / g(j, j);
      if (e < candidate) {
        candidate = e;
        best = j;
      }
    }
    if (!removable(candidate, budget, floor)) {
      report.final_min_error = static_cast<double>(std::sqrt(candidate));
      break;
    }
    const RVector col = drop_row<RMatrix>(g.col(best), best);
    const Real pivot = g(best, best);
    u = drop_row(u, best) - col * (u.row(best) / pivot);
    g = drop_row_col(g, best) - col * col.transpose() / pivot;
    kk = drop_row_col(kk, best);
    active = without(active, static_cast<std::size_t>(best));
    error = candidate;
    ++report.removed_count;
  }

  if (report.removed_count > 0) {
    report.pruned = FunctionExpansion(input.spec(), input.centers()(active, Eigen::all), u.cast<double>());
  }
  report.residual_norm = static_cast<double>(std::sqrt(error));
  centers_ = report.pruned.centers();
  gram_ = std::move(kk);
  inverse_ = std::move(g);
  valid_ = true;
  return report;
}

}  // namespace kpg
