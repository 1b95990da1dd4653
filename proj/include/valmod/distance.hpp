#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valmod/detail/numeric.hpp"
#include "valmod/detail/parallel.hpp"
#include "valmod/detail/rows.hpp"
#include "valmod/errors.hpp"
#include "valmod/motif_pair.hpp"
#include "valmod/series.hpp"

namespace valmod {

/// Trivial-match exclusion: candidates with |j - i| < radius are ignored.
/// Defaults to ceil(l/2) at each length l.
struct ExclusionPolicy {
  std::optional<std::size_t> radius;

  std::size_t at(std::size_t length) const noexcept {
    return radius ? *radius : (length + 1) / 2;
  }
};

struct DistanceOptions {
  ExclusionPolicy exclusion;
  /// Constant windows cannot take part in any match when set.
  bool exclude_degenerate = true;
  /// 0 selects the hardware concurrency.
  unsigned workers = 0;
};

struct DistanceProfile {
  SubsequenceRef query;
  std::size_t exclusion = 0;
  /// +inf inside the exclusion zone and for excluded degenerate windows.
  std::vector<double> distances;

  std::size_t size() const noexcept { return distances.size(); }
};

struct MatrixProfile {
  std::size_t length = 0;
  std::size_t exclusion = 0;
  std::vector<double> mp;
  /// -1 where no admissible match exists.
  std::vector<std::int64_t> ip;

  std::size_t size() const noexcept { return mp.size(); }
};

/// Z-normalized Euclidean distance between two equal-length vectors.
inline double znorm_distance(std::span<const double> a,
                             std::span<const double> b) {
  if (a.size() != b.size())
    throw ParameterError("length mismatch: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  if (a.size() < 2)
    throw ParameterError("vectors need at least 2 points");
  return detail::direct_distance(a, b);
}

namespace detail {

inline std::vector<double> centered(std::span<const double> x) {
  double m = 0.0;
  for (double v : x)
    m += v;
  m /= static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t)
    out[t] = x[t] - m;
  return out;
}

inline void check_exclusion(std::size_t radius) {
  if (radius < 1)
    throw ParameterError("exclusion radius must be >= 1");
}

inline void check_profile_length(std::size_t n, std::size_t len) {
  if (len < 2 || len > n / 2)
    throw ParameterError("subsequence length " + std::to_string(len) +
                         " outside [2, |D|/2 = " + std::to_string(n / 2) + "]");
}

} // namespace detail

/// Successive distance profiles at one length. Consecutive query offsets
/// reuse the previous sliding dot products, so a sweep costs O(|D|) each.
class DistanceProfiler {
public:
  DistanceProfiler(const SeriesRecord &series, std::size_t length,
                   DistanceOptions opts = {})
      : opts_(opts), x_(detail::centered(checked(series, length).values())),
        prefix_(x_), ctx_(x_, prefix_, length, opts.exclude_degenerate),
        walker_(x_, length), row_(ctx_.count) {
    detail::check_exclusion(opts_.exclusion.at(length));
  }

  std::size_t length() const noexcept { return ctx_.length; }
  std::size_t count() const noexcept { return ctx_.count; }

  DistanceProfile profile(std::size_t offset) {
    if (offset >= ctx_.count)
      throw ParameterError("query offset " + std::to_string(offset) +
                           " out of range");
    const auto qt = walker_.seek(offset);
    const std::size_t radius = opts_.exclusion.at(ctx_.length);
    ctx_.correlations(offset, qt.data(), row_.data(), 0, ctx_.count);
    detail::mask_exclusion(row_.data(), ctx_.count, offset, radius);
    DistanceProfile dp{{offset, ctx_.length}, radius, {}};
    dp.distances.resize(ctx_.count);
    for (std::size_t j = 0; j < ctx_.count; ++j)
      dp.distances[j] = detail::distance_from_correlation(row_[j], ctx_.length);
    return dp;
  }

private:
  static const SeriesRecord &checked(const SeriesRecord &series,
                                     std::size_t length) {
    if (length < 2 || length > series.size())
      throw ParameterError("subsequence length " + std::to_string(length) +
                           " outside [2, " + std::to_string(series.size()) +
                           "]");
    return series;
  }

  DistanceOptions opts_;
  std::vector<double> x_;
  detail::PrefixSums prefix_;
  detail::LengthContext ctx_;
  detail::DotRowWalker walker_;
  std::vector<double> row_;
};

/// Distance profile of one query using caller-provided rolling statistics.
inline DistanceProfile distance_profile(const SeriesRecord &series,
                                        const RollingStats &stats,
                                        SubsequenceRef query,
                                        std::size_t exclusion,
                                        bool exclude_degenerate = true) {
  const std::size_t n = series.size();
  if (!query.valid_for(n) || query.length < 2)
    throw ParameterError("query subsequence out of range");
  if (stats.window != query.length || stats.size() != n - query.length + 1)
    throw ParameterError("rolling statistics built for a different length");
  detail::check_exclusion(exclusion);

  const std::size_t len = query.length;
  const std::size_t count = stats.size();
  const auto x = series.values();
  double shift = 0.0;
  for (double v : x)
    shift += v;
  shift /= static_cast<double>(n);
  const auto xc = detail::centered(x);

  std::vector<double> qt(count);
  detail::fresh_dot_row(xc, len, query.offset, qt.data(), 0, count);

  DistanceProfile dp{query, exclusion, std::vector<double>(count)};
  const std::size_t i = query.offset;
  const bool di = stats.degenerate[i] != 0;
  const double mi = stats.mean[i] - shift;
  const double invl = 1.0 / static_cast<double>(len);
  for (std::size_t j = 0; j < count; ++j) {
    const bool dj = stats.degenerate[j] != 0;
    double c;
    if (di || dj) {
      c = exclude_degenerate ? detail::kExcluded : (di && dj ? 1.0 : 0.5);
    } else {
      c = (qt[j] * invl - mi * (stats.mean[j] - shift)) /
          (stats.stddev[i] * stats.stddev[j]);
      c = std::min(1.0, std::max(-1.0, c));
    }
    dp.distances[j] = detail::distance_from_correlation(c, len);
  }
  const std::size_t lo = detail::exclusion_lo(i, exclusion);
  const std::size_t hi = std::min(count, i + exclusion);
  for (std::size_t j = lo; j < hi; ++j)
    dp.distances[j] = detail::kInf;
  return dp;
}

namespace detail {

/// Nearest-neighbour state per offset: best correlation and its offset.
struct NeighbourTable {
  std::vector<double> corr;
  std::vector<std::int64_t> index;

  explicit NeighbourTable(std::size_t count)
      : corr(count, kExcluded), index(count, -1) {}

  void offer(std::size_t i, double c, std::int64_t j) noexcept {
    if (better_match(c, j, corr[i], index[i]) && c != kExcluded) {
      corr[i] = c;
      index[i] = j;
    }
  }

  void merge(const NeighbourTable &other) noexcept {
    for (std::size_t i = 0; i < corr.size(); ++i)
      if (other.index[i] >= 0)
        offer(i, other.corr[i], other.index[i]);
  }
};

/// One upper-triangle row through the general path (any degeneracy).
/// `qn` must already hold the dot products of row i from jb on.
inline void matrix_profile_row(const LengthContext &ctx, std::size_t radius,
                               std::size_t i, const double *qn,
                               NeighbourTable &table, double *cbuf) {
  const std::size_t count = ctx.count;
  const std::size_t jb = i + radius;
  ctx.correlations(i, qn, cbuf, jb, count);
  const auto ii = static_cast<std::int64_t>(i);
  double *corr = table.corr.data();
  std::int64_t *index = table.index.data();
  for (std::size_t j = jb; j < count; ++j) {
    const bool take = cbuf[j] > corr[j];
    corr[j] = take ? cbuf[j] : corr[j];
    index[j] = take ? ii : index[j];
  }
  double best = kExcluded;
  std::int64_t best_j = -1;
  row_argmax(cbuf, jb, count, best, best_j);
  if (best_j >= 0)
    table.offer(i, best, best_j);
}

/// Rows [i0, i0 + rows) of a series without constant windows, swept one
/// column chunk at a time so the chunk's neighbour state stays in cache
/// across the whole group. `qo` holds row i0 - 1; the last row of the group
/// is written to `qn`.
template <std::size_t R>
void matrix_profile_group(const LengthContext &ctx, std::size_t radius,
                          std::size_t i0, std::size_t rows, const double *qo,
                          double *qn, NeighbourTable &table) {
  constexpr std::size_t kChunk = 256;
  const std::size_t count = ctx.count;
  const std::size_t len = ctx.length;
  if (i0 + radius >= count)
    return;
  const double invl = 1.0 / static_cast<double>(len);
  const double *xs = ctx.x.data();
  const double *mu = ctx.stats.mean.data();
  const double *inv = ctx.inv_sigma.data();
  double *corr = table.corr.data();
  std::int64_t *index = table.index.data();

  // cur[g][t + 1] holds column j0 + t of row i0 + g; cur[g][0] carries
  // column j0 - 1 over from the previous chunk.
  alignas(64) double cur[R][kChunk + 1];
  alignas(64) double local[kChunk];
  double best[R];
  std::int64_t best_j[R];
  for (std::size_t g = 0; g < R; ++g) {
    best[g] = kExcluded;
    best_j[g] = -1;
  }

  for (std::size_t j0 = i0 + radius; j0 < count; j0 += kChunk) {
    const std::size_t j1 = std::min(count, j0 + kChunk);
    const std::size_t m = j1 - j0;
    for (std::size_t g = 0; g < rows; ++g) {
      const std::size_t i = i0 + g;
      const std::size_t jb = i + radius;
      if (jb >= j1)
        break;
      const std::size_t t0 = jb > j0 ? jb - j0 : 0;
      const double *prev = g == 0 ? qo + j0 - 1 : cur[g - 1];
      double *out = cur[g] + 1;
      const double drop = xs[i - 1];
      const double add = xs[i + len - 1];
      const double *xprev = xs + j0 - 1;
      const double *xt = xs + j0 + len - 1;
      for (std::size_t t = t0; t < m; ++t)
        out[t] = prev[t] - drop * xprev[t] + add * xt[t];

      const double mi = mu[i];
      const double si = inv[i];
      const double *muj = mu + j0;
      const double *invj = inv + j0;
      double *cj = corr + j0;
      std::int64_t *ij = index + j0;
      const auto ii = static_cast<std::int64_t>(i);
      for (std::size_t t = t0; t < m; ++t) {
        double c = (out[t] * invl - mi * muj[t]) * (si * invj[t]);
        c = c > 1.0 ? 1.0 : c;
        c = c < -1.0 ? -1.0 : c;
        local[t] = c;
        const bool take = c > cj[t];
        cj[t] = take ? c : cj[t];
        ij[t] = take ? ii : ij[t];
      }
      double b = best[g];
      std::int64_t bj = best_j[g];
      for (std::size_t t = t0; t < m; ++t) {
        if (local[t] > b) {
          b = local[t];
          bj = static_cast<std::int64_t>(j0 + t);
        }
      }
      best[g] = b;
      best_j[g] = bj;
      if (g + 1 == rows)
        std::copy(out + t0, out + m, qn + j0 + t0);
    }
    for (std::size_t g = 0; g < rows; ++g)
      cur[g][0] = cur[g][m];
  }
  for (std::size_t g = 0; g < rows; ++g)
    if (best_j[g] >= 0)
      table.offer(i0 + g, best[g], best_j[g]);
}

/// Upper-triangle sweep over rows [r0, r1) updating both the row anchor and
/// every column it touches.
inline void matrix_profile_block(const LengthContext &ctx, std::size_t radius,
                                 std::size_t r0, std::size_t r1,
                                 NeighbourTable &table, std::vector<double> &qa,
                                 std::vector<double> &qb,
                                 std::vector<double> &cbuf) {
  constexpr std::size_t kGroup = 8;
  const std::size_t count = ctx.count;
  if (r0 + radius >= count)
    return;
  double *qo = qa.data();
  double *qn = qb.data();
  fresh_dot_row(ctx.x, ctx.length, r0, qn, r0 + radius, count);
  matrix_profile_row(ctx, radius, r0, qn, table, cbuf.data());
  std::swap(qo, qn);

  if (!ctx.degenerate_offsets.empty()) {
    for (std::size_t i = r0 + 1; i < r1 && i + radius < count; ++i) {
      advance_dot_row(ctx.x, ctx.length, i, qo, qn, i + radius, count);
      matrix_profile_row(ctx, radius, i, qn, table, cbuf.data());
      std::swap(qo, qn);
    }
    return;
  }
  for (std::size_t i0 = r0 + 1; i0 < r1; i0 += kGroup) {
    const std::size_t rows = std::min(kGroup, r1 - i0);
    matrix_profile_group<kGroup>(ctx, radius, i0, rows, qo, qn, table);
    std::swap(qo, qn);
  }
}

inline MatrixProfile finish_profile(const SeriesRecord &series,
                                    std::size_t len, std::size_t radius,
                                    const NeighbourTable &table) {
  MatrixProfile out;
  out.length = len;
  out.exclusion = radius;
  const std::size_t count = table.corr.size();
  out.mp.assign(count, kInf);
  out.ip.assign(count, -1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = table.index[i];
    if (j < 0)
      continue;
    const auto a = std::min<std::size_t>(i, static_cast<std::size_t>(j));
    const auto b = std::max<std::size_t>(i, static_cast<std::size_t>(j));
    out.ip[i] = j;
    out.mp[i] = direct_distance(series.window(a, len), series.window(b, len));
  }
  return out;
}

} // namespace detail

/// Fixed-length matrix profile and index profile. Nearest neighbours are
/// found from sliding dot products; the reported distance of every
/// (i, ip[i]) pair is then recomputed directly from the raw values.
inline MatrixProfile matrix_profile(const SeriesRecord &series, std::size_t len,
                                    const DistanceOptions &opts = {}) {
  detail::check_profile_length(series.size(), len);
  const std::size_t radius = opts.exclusion.at(len);
  detail::check_exclusion(radius);

  const auto x = detail::centered(series.values());
  const detail::PrefixSums prefix(x);
  const detail::LengthContext ctx(x, prefix, len, opts.exclude_degenerate);
  const std::size_t count = ctx.count;
  const std::size_t blocks = (count + detail::kRowBlock - 1) / detail::kRowBlock;
  const unsigned workers = std::min<unsigned>(
      detail::resolve_workers(opts.workers),
      static_cast<unsigned>(std::max<std::size_t>(blocks, 1)));

  std::vector<detail::NeighbourTable> tables(workers,
                                             detail::NeighbourTable(count));
  struct Scratch {
    std::vector<double> qa, qb, c;
  };
  std::vector<Scratch> scratch(workers);
  for (auto &s : scratch) {
    s.qa.resize(count);
    s.qb.resize(count);
    s.c.resize(count);
  }
  detail::parallel_for(blocks, workers, [&](std::size_t b, unsigned w) {
    const std::size_t r0 = b * detail::kRowBlock;
    const std::size_t r1 = std::min(count, r0 + detail::kRowBlock);
    detail::matrix_profile_block(ctx, radius, r0, r1, tables[w], scratch[w].qa,
                                 scratch[w].qb, scratch[w].c);
  });
  for (unsigned w = 1; w < workers; ++w)
    tables[0].merge(tables[w]);
  return detail::finish_profile(series, len, radius, tables[0]);
}

/// The k pairs with the smallest matrix-profile values, symmetric duplicates
/// removed. Fewer than k are returned when fewer distinct pairs exist.
inline std::vector<MotifPair> topk_pairs(const MatrixProfile &mp,
                                         std::size_t k) {
  if (k < 1)
    throw ParameterError("k must be >= 1");
  std::vector<MotifPair> candidates;
  candidates.reserve(mp.size());
  for (std::size_t i = 0; i < mp.size(); ++i)
    if (mp.ip[i] >= 0 && std::isfinite(mp.mp[i]))
      candidates.push_back(MotifPair::make(
          i, static_cast<std::size_t>(mp.ip[i]), mp.length, mp.mp[i]));
  return detail::select_topk(std::move(candidates), k);
}

} // namespace valmod
