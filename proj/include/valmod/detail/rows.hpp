#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "valmod/detail/numeric.hpp"
#include "valmod/series.hpp"

namespace valmod::detail {

/// Marker correlation for excluded cells (trivial matches, degenerate windows).
inline constexpr double kExcluded = -kInf;

/// Rows of the all-pairs correlation matrix are recomputed from scratch at
/// every multiple of this many anchors. Fixed so that the rounding of every
/// cell is independent of how work is split across threads.
inline constexpr std::size_t kRowBlock = 1024;

/// Everything needed to turn a sliding dot product into a correlation at
/// one subsequence length.
struct LengthContext {
  std::span<const double> x;
  std::size_t length = 0;
  std::size_t count = 0;
  bool exclude_degenerate = true;
  RollingStats stats;
  std::vector<double> inv_sigma;
  std::vector<std::size_t> degenerate_offsets;

  LengthContext(std::span<const double> values, const PrefixSums &prefix,
                std::size_t len, bool exclude)
      : x(values), length(len), count(values.size() - len + 1),
        exclude_degenerate(exclude), stats(prefix.stats(values, len)) {
    inv_sigma.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (stats.degenerate[i]) {
        inv_sigma[i] = 0.0;
        degenerate_offsets.push_back(i);
      } else {
        inv_sigma[i] = 1.0 / stats.stddev[i];
      }
    }
  }

  bool degenerate(std::size_t i) const noexcept {
    return stats.degenerate[i] != 0;
  }

  /// Correlation convention for pairs involving a constant window.
  double degenerate_correlation(bool a_const, bool b_const) const noexcept {
    if (exclude_degenerate)
      return kExcluded;
    return (a_const && b_const) ? 1.0 : 0.5;
  }

  double correlation(std::size_t i, std::size_t j, double qt) const noexcept {
    const bool di = degenerate(i), dj = degenerate(j);
    if (di || dj)
      return degenerate_correlation(di, dj);
    const double invl = 1.0 / static_cast<double>(length);
    const double c = (qt * invl - stats.mean[i] * stats.mean[j]) *
                     (inv_sigma[i] * inv_sigma[j]);
    return std::min(1.0, std::max(-1.0, c));
  }

  /// Correlations of anchor i against candidates [jb, je) given their dot
  /// products. Degenerate conventions are applied; exclusion zones are not.
  void correlations(std::size_t i, const double *qt, double *out,
                    std::size_t jb, std::size_t je) const noexcept {
    const double invl = 1.0 / static_cast<double>(length);
    const double mi = stats.mean[i];
    const double si = inv_sigma[i];
    const double *mu = stats.mean.data();
    const double *inv = inv_sigma.data();
    for (std::size_t j = jb; j < je; ++j) {
      double c = (qt[j] * invl - mi * mu[j]) * (si * inv[j]);
      c = c > 1.0 ? 1.0 : c;
      c = c < -1.0 ? -1.0 : c;
      out[j] = c;
    }
    if (degenerate(i)) {
      for (std::size_t j = jb; j < je; ++j)
        out[j] = degenerate_correlation(true, degenerate(j));
      return;
    }
    auto it = std::lower_bound(degenerate_offsets.begin(),
                               degenerate_offsets.end(), jb);
    for (; it != degenerate_offsets.end() && *it < je; ++it)
      out[*it] = degenerate_correlation(false, true);
  }

  double distance(std::size_t i, std::size_t j, double qt) const noexcept {
    return distance_from_correlation(correlation(i, j, qt), length);
  }
};

/// qt[j] = sum_t x[i+t] x[j+t] for j in [jb, je), summed in t order.
inline void fresh_dot_row(std::span<const double> x, std::size_t len,
                          std::size_t i, double *qt, std::size_t jb,
                          std::size_t je) noexcept {
  std::fill(qt + jb, qt + je, 0.0);
  const double *xs = x.data();
  for (std::size_t t = 0; t < len; ++t) {
    const double a = xs[i + t];
    const double *col = xs + t;
    for (std::size_t j = jb; j < je; ++j)
      qt[j] += a * col[j];
  }
}

/// Row i from row i-1: qn[j] = qo[j-1] - x[i-1]x[j-1] + x[i+l-1]x[j+l-1].
inline void advance_dot_row(std::span<const double> x, std::size_t len,
                            std::size_t i, const double *__restrict qo,
                            double *__restrict qn, std::size_t jb,
                            std::size_t je) noexcept {
  const double *xs = x.data();
  const double drop = xs[i - 1];
  const double add = xs[i + len - 1];
  const double *tail = xs + len - 1;
  for (std::size_t j = jb; j < je; ++j)
    qn[j] = qo[j - 1] - drop * xs[j - 1] + add * tail[j];
}

/// Walks full dot-product rows (all candidates) for increasing anchors.
/// Row contents depend only on the anchor, its block, and the previous
/// anchor visited within the same block.
class DotRowWalker {
public:
  DotRowWalker(std::span<const double> x, std::size_t len)
      : x_(x), len_(len), count_(x.size() - len + 1), a_(count_), b_(count_) {}

  /// Positions the walker on `anchor`, reusing the current row when the
  /// anchor lies a few steps ahead in the same block.
  std::span<const double> seek(std::size_t anchor) {
    const bool same_block =
        has_row_ && anchor / kRowBlock == current_ / kRowBlock;
    if (same_block && anchor > current_ && anchor - current_ <= max_steps()) {
      while (current_ < anchor) {
        ++current_;
        double *dst = cur_ == &a_ ? b_.data() : a_.data();
        dst[0] = dot(x_.data() + current_, x_.data(), len_);
        advance_dot_row(x_, len_, current_, cur_->data(), dst, 1, count_);
        cur_ = cur_ == &a_ ? &b_ : &a_;
      }
    } else if (!has_row_ || anchor != current_) {
      fresh_dot_row(x_, len_, anchor, a_.data(), 0, count_);
      cur_ = &a_;
      current_ = anchor;
      has_row_ = true;
    }
    return *cur_;
  }

private:
  std::size_t max_steps() const noexcept {
    return std::max<std::size_t>(1, len_ / 4);
  }

  std::span<const double> x_;
  std::size_t len_, count_;
  std::vector<double> a_, b_;
  std::vector<double> *cur_ = &a_;
  std::size_t current_ = 0;
  bool has_row_ = false;
};

inline std::size_t exclusion_lo(std::size_t i, std::size_t radius) noexcept {
  return i + 1 > radius ? i + 1 - radius : 0;
}

/// Masks the trivial-match zone |j - i| < radius in a correlation row.
inline void mask_exclusion(double *c, std::size_t count, std::size_t i,
                           std::size_t radius) noexcept {
  const std::size_t lo = exclusion_lo(i, radius);
  const std::size_t hi = std::min(count, i + radius);
  for (std::size_t j = lo; j < hi; ++j)
    c[j] = kExcluded;
}

/// Best (largest correlation, then smallest offset) of a row segment.
inline void row_argmax(const double *c, std::size_t jb, std::size_t je,
                       double &best, std::int64_t &best_j) noexcept {
  for (std::size_t j = jb; j < je; ++j) {
    if (c[j] > best) {
      best = c[j];
      best_j = static_cast<std::int64_t>(j);
    }
  }
}

/// Total order used for nearest-neighbour selection everywhere.
inline bool better_match(double c, std::int64_t j, double best_c,
                         std::int64_t best_j) noexcept {
  if (c != best_c)
    return c > best_c;
  return best_j < 0 || (j >= 0 && j < best_j);
}

} // namespace valmod::detail
