#pragma once

// Lower bound on the z-normalized distance between two subsequences after
// both are extended past a base length l_b.
//
// For an anchor A and a candidate C of length l >= l_b, the z-normalized
// distance satisfies d^2 = 2l(1 - rho) >= min_{a >= 0, b} ||z(A) - (aC + b)||^2.
// Restricting that least-squares fit to the first l_b points can only lower
// it, and the restricted optimum is l_b (1 - q+^2) sigma_A(l_b)^2 /
// sigma_A(l)^2 with q+ = max(q, 0) and q the correlation over the base
// window. Hence
//
//   lb(l) = sqrt(l_b (1 - q+^2)) * sigma_A(l_b) / sigma_A(l).
//
// The first factor is fixed per entry and the second is shared by every
// entry of one anchor, so sorting an anchor's entries by lb gives the same
// permutation at every length.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "valmod/detail/numeric.hpp"
#include "valmod/errors.hpp"
#include "valmod/series.hpp"

namespace valmod {

struct LbEntry {
  std::size_t anchor = 0;
  std::size_t candidate = 0;
  std::size_t base_length = 0;
  /// Length the dot product, distance and bound currently refer to.
  std::size_t length = 0;
  /// Pearson correlation of the two windows at the base length.
  double base_correlation = 0.0;
  double anchor_sigma_base = 0.0;
  /// sum_t x[anchor+t] * x[candidate+t] for t < length.
  double dot = 0.0;
  double distance = 0.0;
  double lower_bound = 0.0;
  /// A constant window at the base length; the bound is pinned to 0.
  bool degenerate = false;
  bool expired = false;
};

namespace detail {

/// Length-invariant factor sqrt(l_b (1 - q+^2)).
inline double lb_base_factor(std::size_t base_length, double q,
                             bool degenerate) noexcept {
  if (degenerate)
    return 0.0;
  const double qp = std::clamp(q, 0.0, 1.0);
  const double v = static_cast<double>(base_length) * (1.0 - qp * qp);
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

inline double lb_scale(double sigma_base, double sigma_now) noexcept {
  return sigma_now > 0.0 ? sigma_base / sigma_now : 0.0;
}

inline double lb_value(const LbEntry &e, double sigma_now) noexcept {
  return lb_base_factor(e.base_length, e.base_correlation, e.degenerate) *
         lb_scale(e.anchor_sigma_base, sigma_now);
}

/// Exact distance from the running dot product and the stats at e.length.
inline double entry_distance(const LbEntry &e, const RollingStats &stats,
                             bool exclude_degenerate) noexcept {
  const std::size_t a = e.anchor, c = e.candidate;
  const bool da = stats.degenerate[a] != 0, dc = stats.degenerate[c] != 0;
  double q;
  if (da || dc) {
    if (exclude_degenerate)
      return kInf;
    q = (da && dc) ? 1.0 : 0.5;
  } else {
    const double l = static_cast<double>(e.length);
    q = (e.dot / l - stats.mean[a] * stats.mean[c]) /
        (stats.stddev[a] * stats.stddev[c]);
    q = std::clamp(q, -1.0, 1.0);
  }
  return distance_from_correlation(q, e.length);
}

/// Builds an entry when the base dot product is already known.
inline LbEntry make_entry(std::size_t anchor, std::size_t candidate,
                          std::size_t base_length, double correlation,
                          double anchor_sigma, double dot, double distance,
                          bool degenerate) noexcept {
  LbEntry e;
  e.anchor = anchor;
  e.candidate = candidate;
  e.base_length = base_length;
  e.length = base_length;
  e.base_correlation = degenerate ? 0.0 : correlation;
  e.anchor_sigma_base = anchor_sigma;
  e.dot = dot;
  e.distance = distance;
  e.degenerate = degenerate;
  e.lower_bound = lb_base_factor(base_length, e.base_correlation, degenerate);
  return e;
}

} // namespace detail

/// Starts a bound from the exact distance d at the base length.
/// The base correlation is recovered as q = 1 - d^2 / (2 l_b).
inline LbEntry lb_init(const SeriesRecord &series, const RollingStats &stats,
                       std::size_t anchor, std::size_t candidate,
                       double distance) {
  const std::size_t len = stats.window;
  if (anchor >= stats.size() || candidate >= stats.size())
    throw ParameterError("lb_init: offset out of range");
  const std::size_t gap =
      anchor > candidate ? anchor - candidate : candidate - anchor;
  if (gap == 0)
    throw ParameterError("lb_init: anchor and candidate coincide");
  const auto x = series.values();
  const double dot = detail::dot(x.data() + anchor, x.data() + candidate, len);
  const bool degenerate = stats.degenerate[anchor] || stats.degenerate[candidate];
  const double q =
      1.0 - distance * distance / (2.0 * static_cast<double>(len));
  return detail::make_entry(anchor, candidate, len, q, stats.stddev[anchor],
                            dot, distance, degenerate);
}

/// Extends an entry by one point. `stats` must be built for entry.length + 1
/// over the same values the running dot product was accumulated on. Entries
/// whose windows would run past the end of the series become expired.
inline void lb_update(LbEntry &e, std::span<const double> values,
                      const RollingStats &stats,
                      bool exclude_degenerate = true) {
  if (e.expired)
    return;
  const std::size_t next = e.length + 1;
  if (stats.window != next)
    throw ParameterError("lb_update: statistics built for length " +
                         std::to_string(stats.window) + ", expected " +
                         std::to_string(next));
  if (e.anchor + next > values.size() || e.candidate + next > values.size()) {
    e.expired = true;
    return;
  }
  e.dot += values[e.anchor + e.length] * values[e.candidate + e.length];
  e.length = next;
  e.distance = detail::entry_distance(e, stats, exclude_degenerate);
  e.lower_bound = detail::lb_value(e, stats.stddev[e.anchor]);
}

inline void lb_update(LbEntry &e, const SeriesRecord &series,
                      const RollingStats &stats,
                      bool exclude_degenerate = true) {
  lb_update(e, series.values(), stats, exclude_degenerate);
}

/// Positions of the live entries of one anchor ordered by lower bound, ties
/// broken by candidate offset. Sorting uses the length-invariant factor, so
/// the permutation is the same at every length.
inline std::vector<std::size_t> lb_rank(std::span<const LbEntry> entries) {
  std::vector<std::size_t> order;
  order.reserve(entries.size());
  for (std::size_t t = 0; t < entries.size(); ++t) {
    if (entries[t].expired)
      continue;
    if (entries[t].anchor != entries.front().anchor ||
        entries[t].base_length != entries.front().base_length)
      throw ParameterError("lb_rank: entries must share anchor and base length");
    order.push_back(t);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &ea = entries[a], &eb = entries[b];
    const double ka =
        detail::lb_base_factor(ea.base_length, ea.base_correlation, ea.degenerate);
    const double kb =
        detail::lb_base_factor(eb.base_length, eb.base_correlation, eb.degenerate);
    if (ka != kb)
      return ka < kb;
    return ea.candidate < eb.candidate;
  });
  return order;
}

/// Debug rows "anchor,candidate,length,lb,distance" for admissibility checks.
inline void write_lb_rows(std::ostream &out, std::span<const LbEntry> entries,
                          bool header = false) {
  if (header)
    out << "anchor,candidate,length,lb,distance\n";
  for (const auto &e : entries) {
    if (e.expired)
      continue;
    out << e.anchor << ',' << e.candidate << ',' << e.length << ','
        << detail::format_double(e.lower_bound) << ','
        << detail::format_double(e.distance) << '\n';
  }
}

} // namespace valmod
