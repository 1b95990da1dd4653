#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <system_error>

namespace valmod::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Error-free transformation: a + b == s + e exactly.
inline void two_sum(double a, double b, double &s, double &e) noexcept {
  s = a + b;
  const double bb = s - a;
  e = (a - (s - bb)) + (b - bb);
}

inline bool all_equal(std::span<const double> w) noexcept {
  return std::adjacent_find(w.begin(), w.end(), std::not_equal_to<>{}) ==
         w.end();
}

/// Two-pass mean and population standard deviation of one window.
/// Constant windows report exactly zero deviation.
inline void window_moments(std::span<const double> w, double &mean,
                           double &sd) noexcept {
  double s = 0.0;
  for (double v : w)
    s += v;
  mean = s / static_cast<double>(w.size());
  if (all_equal(w)) {
    sd = 0.0;
    return;
  }
  double ss = 0.0;
  for (double v : w) {
    const double c = v - mean;
    ss += c * c;
  }
  sd = std::sqrt(ss / static_cast<double>(w.size()));
}

/// Z-normalized Euclidean distance computed directly from the raw values.
/// Identical inputs give exactly zero. Constant windows normalize to zeros.
inline double direct_distance(std::span<const double> a,
                              std::span<const double> b) noexcept {
  double ma, sa, mb, sb;
  window_moments(a, ma, sa);
  window_moments(b, mb, sb);
  const double ia = sa > 0.0 ? 1.0 / sa : 0.0;
  const double ib = sb > 0.0 ? 1.0 / sb : 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double za = sa > 0.0 ? (a[t] - ma) * ia : 0.0;
    const double zb = sb > 0.0 ? (b[t] - mb) * ib : 0.0;
    const double diff = za - zb;
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

inline double dot(const double *a, const double *b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    acc += a[t] * b[t];
  return acc;
}

/// Distance from a Pearson correlation: sqrt(2 l (1 - q)), clamped at zero.
inline double distance_from_correlation(double q, std::size_t length) noexcept {
  if (q == -kInf)
    return kInf;
  const double v = 2.0 * static_cast<double>(length) * (1.0 - q);
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

/// Shortest representation that parses back to the same double.
/// Infinities render as "inf"/"-inf", NaN as "nan".
inline std::string format_double(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  if (std::isnan(v))
    return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

} // namespace valmod::detail
