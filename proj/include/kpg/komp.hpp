#pragma once

#include <cstddef>

#include "kpg/rkhs.hpp"

namespace kpg {

/// Squared RKHS error of dropping one dictionary element and the optimal
/// reweighting of the survivors.
struct LeaveOneOut {
  double error = 0.0;  ///< e_j = min ||h - h~||_H^2 over the reduced span, clamped at 0
  Matrix weights;      ///< (M-1) x p least-squares weights, survivors in original order
};

/// Projects `h` onto the span of its dictionary without element `j`.
LeaveOneOut leave_one_out_error(const FunctionExpansion& h, std::size_t j);

struct CompressionReport {
  FunctionExpansion pruned;
  std::size_t removed_count = 0;
  /// RKHS distance of the best rejected candidate (the one that stopped
  /// pruning), or 0 when the dictionary was emptied.
  double final_min_error = 0.0;
  /// ||h~ - pruned||_H.
  double residual_norm = 0.0;
};

/// Kernel orthogonal matching pursuit with a compression budget.
///
/// Repeatedly drops the dictionary element whose removal (followed by the
/// least-squares reprojection of the original input onto the survivors)
/// costs the least, as long as that cost in RKHS norm stays below `budget`.
/// Elements whose removal error is at round-off level are dropped even for a
/// zero budget. Ties go to the lowest index.
CompressionReport komp(const FunctionExpansion& input, double budget);

/// Same pruning for the online update h + kappa(center, .) weight, keeping
/// K(D, D)^-1 of the last output so that a step costs O(M^2) instead of
/// O(M^3). The inverse is bordered with the new atom, downdated on every
/// removal and rebuilt from scratch every `refresh_interval` calls, or when
/// the input does not match the cached dictionary. A numerically singular
/// Gram matrix or border falls back to `komp`.
class OnlineCompressor {
 public:
  explicit OnlineCompressor(std::size_t refresh_interval = 256) : refresh_interval_(refresh_interval) {}

  CompressionReport compress(const FunctionExpansion& h, const Vector& center, const Vector& weight, double budget);

  /// Number of calls handled by the full `komp` fallback.
  std::size_t fallbacks() const noexcept { return fallbacks_; }

 private:
  bool matches(const FunctionExpansion& h) const;
  void rebuild(const FunctionExpansion& h);
  CompressionReport fallback(const FunctionExpansion& input, double budget);

  std::size_t refresh_interval_;
  std::size_t calls_ = 0;
  std::size_t fallbacks_ = 0;
  bool valid_ = false;
  Matrix centers_;  ///< dictionary the cache belongs to
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> gram_;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> inverse_;
};

}  // namespace kpg
