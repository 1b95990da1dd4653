#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

namespace valmod {

/// d * sqrt(1/l): makes distances of different subsequence lengths comparable.
inline double length_normalized(double distance, std::size_t length) noexcept {
  return distance * std::sqrt(1.0 / static_cast<double>(length));
}

/// Two subsequences of equal length, canonicalized so left < right.
struct MotifPair {
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t length = 0;
  double distance = 0.0;
  double normalized = 0.0;

  static MotifPair make(std::size_t a, std::size_t b, std::size_t length,
                        double distance) {
    return MotifPair{std::min(a, b), std::max(a, b), length, distance,
                     length_normalized(distance, length)};
  }

  friend bool operator==(const MotifPair &, const MotifPair &) = default;
};

/// Ranking order: distance, then left offset, then right offset.
inline bool pair_rank_less(const MotifPair &a, const MotifPair &b) noexcept {
  return std::tie(a.distance, a.left, a.right) <
         std::tie(b.distance, b.left, b.right);
}

namespace detail {

/// Sorts candidates by rank order, drops repeated (left, right) pairs keeping
/// the first, and truncates to k.
inline std::vector<MotifPair> select_topk(std::vector<MotifPair> candidates,
                                          std::size_t k) {
  std::sort(candidates.begin(), candidates.end(), pair_rank_less);
  std::vector<MotifPair> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto &c : candidates) {
    if (out.size() == k)
      break;
    if (seen.emplace(c.left, c.right).second)
      out.push_back(c);
  }
  return out;
}

} // namespace detail
} // namespace valmod
