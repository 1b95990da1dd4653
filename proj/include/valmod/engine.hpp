#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "valmod/detail/numeric.hpp"
#include "valmod/detail/parallel.hpp"
#include "valmod/detail/rows.hpp"
#include "valmod/distance.hpp"
#include "valmod/errors.hpp"
#include "valmod/lower_bound.hpp"
#include "valmod/motif_pair.hpp"
#include "valmod/series.hpp"
#include "valmod/valmap.hpp"

namespace valmod {

struct ValmodOptions {
  std::size_t lmin = 0;
  std::size_t lmax = 0;
  std::size_t k = 1;
  /// Entries kept per partial distance profile.
  std::size_t p = 50;
  ExclusionPolicy exclusion;
  bool exclude_degenerate = true;
  unsigned workers = 0;
  /// Called once per length before it is processed.
  std::function<void(std::size_t)> on_length;
};

/// Per-length bookkeeping of the pruning logic.
struct PruningStats {
  std::size_t length = 0;
  /// Partial profiles whose stored minimum is provably the true minimum.
  std::size_t profiles_valid = 0;
  /// Profiles recomputed from a full distance profile at this length.
  std::size_t profiles_recomputed = 0;
  /// Anchors that no longer fit in the series (cumulative).
  std::size_t profiles_retired = 0;
  /// Stored entries dropped at this length (window past the end or inside
  /// the widened exclusion zone).
  std::size_t entries_dropped = 0;
  /// Smallest maxLB over non-valid profiles before any recomputation.
  double min_lb_abs = detail::kInf;
  /// Smallest minDist over valid profiles before any recomputation.
  double smallest_min_dist = detail::kInf;
  /// The first length is always a full computation.
  bool base = false;

  bool certified_without_recompute() const noexcept {
    return !base && profiles_recomputed == 0;
  }
};

struct LengthResult {
  std::size_t length = 0;
  /// Exact distances, ranked by distance then offsets.
  std::vector<MotifPair> topk;
  PruningStats stats;
};

struct ValmodResult {
  std::vector<LengthResult> lengths;
  MatrixProfile base_profile;
  Valmap valmap;

  const LengthResult &at(std::size_t length) const {
    for (const auto &r : lengths)
      if (r.length == length)
        return r;
    throw ParameterError("length " + std::to_string(length) + " not in result");
  }
};

/// Exact top-k motif pairs at a single length via the full matrix profile.
inline LengthResult fixed_length_topk(const SeriesRecord &series,
                                      std::size_t length, std::size_t k,
                                      const DistanceOptions &opts = {}) {
  const auto mp = matrix_profile(series, length, opts);
  LengthResult r;
  r.length = length;
  r.topk = topk_pairs(mp, k);
  r.stats.length = length;
  r.stats.base = true;
  r.stats.profiles_recomputed = mp.size();
  return r;
}

namespace detail {

inline void check_valmod_options(std::size_t n, const ValmodOptions &o) {
  if (o.lmin < 2)
    throw ParameterError("lmin must be >= 2");
  if (o.lmin > o.lmax)
    throw ParameterError("lmin (" + std::to_string(o.lmin) +
                         ") must not exceed lmax (" + std::to_string(o.lmax) +
                         ")");
  if (n < 2 * o.lmax)
    throw ParameterError("series length " + std::to_string(n) +
                         " is shorter than 2*lmax = " +
                         std::to_string(2 * o.lmax));
  if (o.k < 1)
    throw ParameterError("k must be >= 1");
  if (o.k > o.p)
    throw ParameterError("k (" + std::to_string(o.k) + ") must not exceed p (" +
                         std::to_string(o.p) + ")");
  if (o.exclusion.radius && *o.exclusion.radius < 1)
    throw ParameterError("exclusion radius must be >= 1");
}

/// A partial distance profile: the p entries with the smallest lower bound
/// at its base length, carried to longer lengths.
struct PartialProfile {
  std::vector<LbEntry> entries;
  std::size_t base_length = 0;
  bool retired = false;

  // Per-length summary.
  double min_dist = kInf;
  std::int64_t argmin = -1;
  double max_lb = 0.0;
  bool valid = false;
  /// The true nearest neighbour is known at the current length.
  bool exact = false;
  /// Anchor window is constant and degenerate windows are excluded.
  bool excluded = false;
};

class ValmodRunner {
public:
  ValmodRunner(const SeriesRecord &series, const ValmodOptions &opts)
      : series_(series), opts_(opts), x_(centered(series.values())),
        prefix_(x_), n_(series.size()) {
    check_valmod_options(n_, opts_);
  }

  ValmodResult run() {
    ValmodResult result;
    const std::size_t count0 = n_ - opts_.lmin + 1;
    profiles_.assign(count0, PartialProfile{});

    // Base length: every profile is computed in full.
    if (opts_.on_length)
      opts_.on_length(opts_.lmin);
    {
      const LengthContext ctx(x_, prefix_, opts_.lmin, opts_.exclude_degenerate);
      std::vector<std::size_t> all(count0);
      for (std::size_t i = 0; i < count0; ++i)
        all[i] = i;
      rebuild(ctx, all);

      MatrixProfile mp;
      mp.length = opts_.lmin;
      mp.exclusion = opts_.exclusion.at(opts_.lmin);
      mp.mp.assign(count0, kInf);
      mp.ip.assign(count0, -1);
      for (std::size_t i = 0; i < count0; ++i) {
        mp.mp[i] = profiles_[i].min_dist;
        mp.ip[i] = profiles_[i].argmin;
      }
      LengthResult lr;
      lr.length = opts_.lmin;
      lr.topk = topk_pairs(mp, opts_.k);
      lr.stats.length = opts_.lmin;
      lr.stats.base = true;
      lr.stats.profiles_recomputed = count0;
      for (const auto &p : profiles_)
        lr.stats.profiles_valid += p.valid ? 1 : 0;
      result.base_profile = mp;
      result.valmap = valmap_init(mp, opts_.lmax);
      for (const auto &pair : lr.topk)
        valmap_update(result.valmap, pair);
      result.lengths.push_back(std::move(lr));
    }

    for (std::size_t len = opts_.lmin + 1; len <= opts_.lmax; ++len) {
      if (opts_.on_length)
        opts_.on_length(len);
      auto lr = step(len);
      for (const auto &pair : lr.topk)
        valmap_update(result.valmap, pair);
      result.lengths.push_back(std::move(lr));
    }
    return result;
  }

private:
  struct Candidate {
    double key;
    double clip;
    std::size_t j;
    bool operator<(const Candidate &o) const noexcept {
      return key != o.key ? key < o.key : j < o.j;
    }
  };

  struct Scratch {
    std::vector<double> corr;
    std::vector<Candidate> heap;
  };

  std::size_t radius(std::size_t len) const noexcept {
    return opts_.exclusion.at(len);
  }

  double refine(std::size_t a, std::size_t b, std::size_t len) const {
    const auto lo = std::min(a, b), hi = std::max(a, b);
    return direct_distance(series_.window(lo, len), series_.window(hi, len));
  }

  /// Full distance profiles for `anchors` (sorted) at ctx.length: records
  /// the exact nearest neighbour and rebases the stored entries.
  void rebuild(const LengthContext &ctx, std::span<const std::size_t> anchors) {
    if (anchors.empty())
      return;
    // Tasks are the runs of anchors that share a row block.
    std::vector<std::size_t> starts{0};
    for (std::size_t t = 1; t < anchors.size(); ++t)
      if (anchors[t] / kRowBlock != anchors[t - 1] / kRowBlock)
        starts.push_back(t);
    starts.push_back(anchors.size());

    const unsigned workers = std::min<unsigned>(
        resolve_workers(opts_.workers),
        static_cast<unsigned>(starts.size() - 1));
    std::vector<Scratch> scratch(workers);
    for (auto &s : scratch)
      s.corr.resize(ctx.count);

    parallel_for(starts.size() - 1, workers, [&](std::size_t task, unsigned w) {
      DotRowWalker walker(ctx.x, ctx.length);
      auto &s = scratch[w];
      for (std::size_t t = starts[task]; t < starts[task + 1]; ++t)
        rebuild_one(ctx, anchors[t], walker, s);
    });
  }

  void rebuild_one(const LengthContext &ctx, std::size_t a, DotRowWalker &walker,
                   Scratch &s) {
    const std::size_t len = ctx.length;
    const std::size_t count = ctx.count;
    const std::size_t p = opts_.p;
    const auto qt = walker.seek(a);
    double *c = s.corr.data();
    ctx.correlations(a, qt.data(), c, 0, count);
    mask_exclusion(c, count, a, radius(len));

    double best = kExcluded;
    std::int64_t best_j = -1;
    row_argmax(c, 0, count, best, best_j);

    auto &heap = s.heap;
    heap.clear();
    const bool anchor_deg = ctx.degenerate(a);
    for (std::size_t j = 0; j < count; ++j) {
      const double cj = c[j];
      if (cj == kExcluded)
        continue;
      const bool deg = anchor_deg || ctx.degenerate(j);
      const double clip = deg ? 2.0 : (cj > 0.0 ? cj : 0.0);
      if (heap.size() == p) {
        // A smaller or equal clipped correlation can never beat the worst
        // kept entry: its bound is >= and its offset is larger.
        if (clip <= heap.front().clip)
          continue;
        const double key = lb_base_factor(len, cj, deg);
        if (!(key < heap.front().key))
          continue;
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = Candidate{key, clip, j};
        std::push_heap(heap.begin(), heap.end());
      } else {
        heap.push_back(Candidate{lb_base_factor(len, cj, deg), clip, j});
        std::push_heap(heap.begin(), heap.end());
      }
    }
    std::sort(heap.begin(), heap.end(),
              [](const Candidate &l, const Candidate &r) { return l.j < r.j; });

    auto &prof = profiles_[a];
    prof.entries.clear();
    prof.entries.reserve(heap.size());
    const double sigma = ctx.stats.stddev[a];
    double max_lb = 0.0;
    for (const auto &cand : heap) {
      const std::size_t j = cand.j;
      const bool deg = anchor_deg || ctx.degenerate(j);
      auto e = make_entry(a, j, len, c[j], sigma, qt[j],
                          distance_from_correlation(c[j], len), deg);
      max_lb = std::max(max_lb, e.lower_bound);
      prof.entries.push_back(e);
    }
    prof.base_length = len;
    prof.max_lb = max_lb;
    prof.excluded = opts_.exclude_degenerate && anchor_deg;
    prof.exact = true;
    if (best_j >= 0) {
      prof.argmin = best_j;
      prof.min_dist = refine(a, static_cast<std::size_t>(best_j), len);
    } else {
      prof.argmin = -1;
      prof.min_dist = kInf;
    }
    prof.valid = prof.min_dist < prof.max_lb;
  }

  /// Advances every live partial profile to `len` and summarizes it.
  std::size_t advance(const RollingStats &stats, std::size_t len) {
    const std::size_t r = radius(len);
    const std::size_t count = profiles_.size();
    const std::size_t blocks = (count + kRowBlock - 1) / kRowBlock;
    std::vector<std::size_t> dropped(blocks, 0);
    parallel_for(blocks, opts_.workers, [&](std::size_t b, unsigned) {
      const std::size_t lo = b * kRowBlock;
      const std::size_t hi = std::min(count, lo + kRowBlock);
      for (std::size_t a = lo; a < hi; ++a)
        dropped[b] += advance_one(a, stats, len, r);
    });
    std::size_t total = 0;
    for (auto d : dropped)
      total += d;
    return total;
  }

  std::size_t advance_one(std::size_t a, const RollingStats &stats,
                          std::size_t len, std::size_t r) {
    auto &prof = profiles_[a];
    prof.exact = false;
    prof.valid = false;
    prof.min_dist = kInf;
    prof.argmin = -1;
    prof.max_lb = 0.0;
    if (prof.retired)
      return 0;
    if (a + len > n_) {
      prof.retired = true;
      const std::size_t d = prof.entries.size();
      prof.entries.clear();
      prof.entries.shrink_to_fit();
      return d;
    }
    auto &es = prof.entries;
    const std::size_t before = es.size();
    std::erase_if(es, [&](const LbEntry &e) {
      const std::size_t gap = e.candidate > a ? e.candidate - a : a - e.candidate;
      return e.candidate + len > n_ || gap < r;
    });
    const std::size_t dropped = before - es.size();

    for (auto &e : es) {
      lb_update(e, x_, stats, opts_.exclude_degenerate);
      prof.max_lb = std::max(prof.max_lb, e.lower_bound);
      if (e.distance < prof.min_dist ||
          (e.distance == prof.min_dist && prof.argmin >= 0 &&
           static_cast<std::int64_t>(e.candidate) < prof.argmin)) {
        prof.min_dist = e.distance;
        prof.argmin = static_cast<std::int64_t>(e.candidate);
      }
    }
    prof.excluded = opts_.exclude_degenerate && stats.degenerate[a];
    if (prof.excluded)
      return dropped;
    prof.valid = prof.argmin >= 0 && prof.min_dist < prof.max_lb;
    if (prof.valid) {
      prof.exact = true;
      prof.min_dist = refine(a, static_cast<std::size_t>(prof.argmin), len);
    }
    return dropped;
  }

  LengthResult step(std::size_t len) {
    const LengthContext ctx(x_, prefix_, len, opts_.exclude_degenerate);
    LengthResult lr;
    lr.length = len;
    lr.stats.length = len;
    lr.stats.entries_dropped = advance(ctx.stats, len);

    std::size_t live = n_ - len + 1;
    for (std::size_t a = 0; a < profiles_.size(); ++a) {
      const auto &p = profiles_[a];
      if (p.retired)
        continue;
      if (p.valid) {
        ++lr.stats.profiles_valid;
        lr.stats.smallest_min_dist = std::min(lr.stats.smallest_min_dist, p.min_dist);
      } else if (!p.excluded) {
        lr.stats.min_lb_abs = std::min(lr.stats.min_lb_abs, p.max_lb);
      }
    }
    lr.stats.profiles_retired = profiles_.size() - live;

    while (true) {
      double min_lb_abs = kInf;
      bool pending = false;
      for (std::size_t a = 0; a < live; ++a) {
        const auto &p = profiles_[a];
        if (!p.exact && !p.excluded) {
          min_lb_abs = std::min(min_lb_abs, p.max_lb);
          pending = true;
        }
      }
      std::vector<MotifPair> exact, certified;
      for (std::size_t a = 0; a < live; ++a) {
        const auto &p = profiles_[a];
        if (!p.exact || p.excluded || p.argmin < 0 || !std::isfinite(p.min_dist))
          continue;
        auto pair = MotifPair::make(a, static_cast<std::size_t>(p.argmin), len,
                                    p.min_dist);
        if (p.min_dist < min_lb_abs)
          certified.push_back(pair);
        exact.push_back(pair);
      }
      auto top = select_topk(std::move(certified), opts_.k);
      if (top.size() >= opts_.k || !pending) {
        lr.topk = std::move(top);
        break;
      }
      // Anything whose bound does not exceed the k-th best exact distance
      // might hide a better pair.
      const auto best_exact = select_topk(std::move(exact), opts_.k);
      const double tau =
          best_exact.size() >= opts_.k ? best_exact.back().distance : kInf;
      std::vector<std::size_t> redo;
      for (std::size_t a = 0; a < live; ++a) {
        const auto &p = profiles_[a];
        if (!p.exact && !p.excluded && p.max_lb <= tau)
          redo.push_back(a);
      }
      rebuild(ctx, redo);
      lr.stats.profiles_recomputed += redo.size();
    }
    return lr;
  }

  const SeriesRecord &series_;
  ValmodOptions opts_;
  std::vector<double> x_;
  PrefixSums prefix_;
  std::size_t n_;
  std::vector<PartialProfile> profiles_;
};

} // namespace detail

/// Exact top-k motif pairs for every length in [lmin, lmax] plus the VALMAP
/// built from them.
inline ValmodResult valmod_run(const SeriesRecord &series,
                               const ValmodOptions &opts) {
  return detail::ValmodRunner(series, opts).run();
}

} // namespace valmod
