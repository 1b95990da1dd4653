#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "valmod/detail/numeric.hpp"
#include "valmod/distance.hpp"
#include "valmod/errors.hpp"
#include "valmod/motif_pair.hpp"
#include "valmod/series.hpp"

namespace valmod {

struct MotifSetOptions {
  ExclusionPolicy exclusion;
  bool exclude_degenerate = true;
};

inline constexpr double kDefaultRadiusFactor = 2.0;
/// Keeps r > 0 for seed pairs at distance zero.
inline constexpr double kRadiusFloor = 1e-9;

struct MotifSetMember {
  std::size_t offset = 0;
  /// Distance to the nearer seed; seeds carry the pair distance.
  double distance = 0.0;

  friend bool operator==(const MotifSetMember &, const MotifSetMember &) = default;
};

struct MotifSet {
  MotifPair seed;
  double radius_factor = kDefaultRadiusFactor;
  double radius = 0.0;
  std::size_t exclusion = 0;
  /// Sorted by distance, then offset. Pairwise at least `exclusion` apart.
  std::vector<MotifSetMember> members;
};

namespace detail {

inline std::vector<double> znormalized(std::span<const double> w) {
  double m, sd;
  window_moments(w, m, sd);
  std::vector<double> z(w.size(), 0.0);
  if (sd > 0.0) {
    const double inv = 1.0 / sd;
    for (std::size_t t = 0; t < w.size(); ++t)
      z[t] = (w[t] - m) * inv;
  }
  return z;
}

inline double squared_gap(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d = a[t] - b[t];
    acc += d * d;
  }
  return acc;
}

} // namespace detail

/// Every window of the seed's length within r = factor * max(d, floor) of
/// either seed, admitted greedily by distance with trivial-match suppression.
inline MotifSet expand(const SeriesRecord &series, const MotifPair &pair,
                       double radius_factor = kDefaultRadiusFactor,
                       const MotifSetOptions &opts = {}) {
  const std::size_t len = pair.length;
  const std::size_t n = series.size();
  if (!(radius_factor > 0.0) || !std::isfinite(radius_factor))
    throw ParameterError("radius factor must be a positive number");
  if (len < 2 || len > n || pair.left >= pair.right || pair.right + len > n)
    throw ParameterError("motif pair (" + std::to_string(pair.left) + ", " +
                         std::to_string(pair.right) + ") of length " +
                         std::to_string(len) + " invalid for series of length " +
                         std::to_string(n));
  const std::size_t excl = opts.exclusion.at(len);
  detail::check_exclusion(excl);

  MotifSet set;
  set.seed = pair;
  set.radius_factor = radius_factor;
  set.radius = radius_factor * std::max(pair.distance, kRadiusFloor);
  set.exclusion = excl;

  const auto za = detail::znormalized(series.window(pair.left, len));
  const auto zb = detail::znormalized(series.window(pair.right, len));
  const std::size_t count = n - len + 1;

  std::vector<MotifSetMember> candidates;
  for (std::size_t c = 0; c < count; ++c) {
    if (c == pair.left || c == pair.right)
      continue;
    const auto w = series.window(c, len);
    if (opts.exclude_degenerate && detail::all_equal(w))
      continue;
    const auto zc = detail::znormalized(w);
    const double d = std::sqrt(std::min(detail::squared_gap(zc, za),
                                        detail::squared_gap(zc, zb)));
    if (d <= set.radius)
      candidates.push_back({c, d});
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto &l, const auto &r) {
    return l.distance != r.distance ? l.distance < r.distance : l.offset < r.offset;
  });

  std::set<std::size_t> taken{pair.left, pair.right};
  set.members = {{pair.left, pair.distance}, {pair.right, pair.distance}};
  for (const auto &cand : candidates) {
    auto hi = taken.lower_bound(cand.offset);
    if (hi != taken.end() && *hi - cand.offset < excl)
      continue;
    if (hi != taken.begin() && cand.offset - *std::prev(hi) < excl)
      continue;
    taken.insert(cand.offset);
    set.members.push_back(cand);
  }
  std::sort(set.members.begin(), set.members.end(), [](const auto &l, const auto &r) {
    return l.distance != r.distance ? l.distance < r.distance : l.offset < r.offset;
  });
  return set;
}

} // namespace valmod
