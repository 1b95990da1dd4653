#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "valmod/distance.hpp"
#include "valmod/errors.hpp"
#include "valmod/motif_pair.hpp"

namespace valmod {

/// One recorded lowering of MPn[offset].
struct Checkpoint {
  std::size_t length = 0;
  std::size_t offset = 0;
  double old_dn = 0.0;
  double new_dn = 0.0;
  std::int64_t new_ip = -1;
  std::size_t new_lp = 0;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

/// Length-normalized matrix profile with its index and length profiles.
struct ValmapState {
  std::vector<double> mpn;
  std::vector<std::int64_t> ip;
  std::vector<std::size_t> lp;

  std::size_t size() const noexcept { return mpn.size(); }
  friend bool operator==(const ValmapState &, const ValmapState &) = default;
};

/// VALMAP plus the information needed to rewind it to any length.
struct Valmap {
  std::size_t lmin = 0;
  std::size_t lmax = 0;
  ValmapState initial;
  ValmapState current;
  std::vector<Checkpoint> checkpoints;

  std::size_t size() const noexcept { return current.size(); }
};

/// State of a Valmap with only the checkpoints up to `length` applied.
struct ValmapSnapshot {
  std::size_t length = 0;
  ValmapState state;
  std::vector<Checkpoint> checkpoints;
};

/// Normalized copy of the base matrix profile with a flat length profile.
inline Valmap valmap_init(const MatrixProfile &mp, std::size_t lmax = 0) {
  Valmap vm;
  vm.lmin = mp.length;
  vm.lmax = std::max(lmax, mp.length);
  auto &s = vm.initial;
  s.mpn.resize(mp.size());
  s.ip = mp.ip;
  s.lp.assign(mp.size(), mp.length);
  for (std::size_t i = 0; i < mp.size(); ++i)
    s.mpn[i] = length_normalized(mp.mp[i], mp.length);
  vm.current = vm.initial;
  return vm;
}

/// Applies one motif pair, keyed on its left offset. Only a strictly smaller
/// normalized distance replaces the stored one. Returns true on change.
inline bool valmap_update(Valmap &vm, const MotifPair &pair) {
  if (pair.left >= vm.size())
    throw std::logic_error("valmap_update: offset " +
                           std::to_string(pair.left) + " out of range");
  if (pair.length < vm.lmin || pair.length > vm.lmax)
    throw std::logic_error("valmap_update: length " +
                           std::to_string(pair.length) + " outside range");
  if (!vm.checkpoints.empty() && pair.length < vm.checkpoints.back().length)
    throw std::logic_error("valmap_update: pairs must arrive in length order");
  auto &s = vm.current;
  const std::size_t i = pair.left;
  if (!(pair.normalized < s.mpn[i]))
    return false;
  vm.checkpoints.push_back(Checkpoint{pair.length, i, s.mpn[i],
                                      pair.normalized,
                                      static_cast<std::int64_t>(pair.right),
                                      pair.length});
  s.mpn[i] = pair.normalized;
  s.ip[i] = static_cast<std::int64_t>(pair.right);
  s.lp[i] = pair.length;
  return true;
}

/// Replays the checkpoints with length <= `length` onto the initial state.
inline ValmapSnapshot valmap_at(const Valmap &vm, std::size_t length) {
  if (length < vm.lmin || length > vm.lmax)
    throw ParameterError("view length " + std::to_string(length) +
                         " outside [" + std::to_string(vm.lmin) + ", " +
                         std::to_string(vm.lmax) + "]");
  ValmapSnapshot snap;
  snap.length = length;
  snap.state = vm.initial;
  // Checkpoints are sorted by length.
  const auto end = std::upper_bound(
      vm.checkpoints.begin(), vm.checkpoints.end(), length,
      [](std::size_t l, const Checkpoint &c) { return l < c.length; });
  for (auto it = vm.checkpoints.begin(); it != end; ++it) {
    snap.state.mpn[it->offset] = it->new_dn;
    snap.state.ip[it->offset] = it->new_ip;
    snap.state.lp[it->offset] = it->new_lp;
  }
  snap.checkpoints.assign(vm.checkpoints.begin(), end);
  return snap;
}

} // namespace valmod
