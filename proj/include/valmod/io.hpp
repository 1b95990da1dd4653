#pragma once

// Delimited-text exports and JSON conversions shared by the CLI and the
// service. Numbers are written in shortest round-trip form; infinite
// distances appear as "inf" in text and as null in JSON.

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "valmod/detail/numeric.hpp"
#include "valmod/distance.hpp"
#include "valmod/engine.hpp"
#include "valmod/motif_pair.hpp"
#include "valmod/motif_set.hpp"
#include "valmod/valmap.hpp"

namespace valmod {

using json = nlohmann::json;

namespace detail {

inline json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

inline json index_or_null(std::int64_t v) {
  return v >= 0 ? json(v) : json(nullptr);
}

} // namespace detail

inline void write_matrix_profile(std::ostream &out, const MatrixProfile &mp) {
  out << "offset,mp,ip\n";
  for (std::size_t i = 0; i < mp.size(); ++i)
    out << i << ',' << detail::format_double(mp.mp[i]) << ',' << mp.ip[i]
        << '\n';
}

/// One row per pair: length, 1-based rank, offsets, distance, normalized.
inline void write_topk(std::ostream &out, std::span<const LengthResult> lengths) {
  out << "length,rank,left,right,distance,normalized\n";
  for (const auto &r : lengths) {
    std::size_t rank = 1;
    for (const auto &p : r.topk)
      out << r.length << ',' << rank++ << ',' << p.left << ',' << p.right << ','
          << detail::format_double(p.distance) << ','
          << detail::format_double(p.normalized) << '\n';
  }
}

inline void write_valmap(std::ostream &out, const ValmapState &s) {
  out << "offset,mpn,ip,lp\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << i << ',' << detail::format_double(s.mpn[i]) << ',' << s.ip[i] << ','
        << s.lp[i] << '\n';
}

inline void write_checkpoints(std::ostream &out,
                              std::span<const Checkpoint> checkpoints) {
  out << "length,offset,old_dn,new_dn,new_ip,new_lp\n";
  for (const auto &c : checkpoints)
    out << c.length << ',' << c.offset << ',' << detail::format_double(c.old_dn)
        << ',' << detail::format_double(c.new_dn) << ',' << c.new_ip << ','
        << c.new_lp << '\n';
}

inline void write_trace(std::ostream &out, std::span<const LengthResult> lengths) {
  out << "length,profiles_valid,profiles_recomputed,min_lb_abs,smallest_min_dist\n";
  for (const auto &r : lengths)
    out << r.length << ',' << r.stats.profiles_valid << ','
        << r.stats.profiles_recomputed << ','
        << detail::format_double(r.stats.min_lb_abs) << ','
        << detail::format_double(r.stats.smallest_min_dist) << '\n';
}

inline void write_motif_set(std::ostream &out, const MotifSet &set) {
  out << "offset,distance\n";
  for (const auto &m : set.members)
    out << m.offset << ',' << detail::format_double(m.distance) << '\n';
}

inline json to_json(const MotifPair &p) {
  return {{"left", p.left},
          {"right", p.right},
          {"length", p.length},
          {"distance", detail::number_or_null(p.distance)},
          {"normalized", detail::number_or_null(p.normalized)}};
}

inline json to_json(const Checkpoint &c) {
  return {{"length", c.length},
          {"offset", c.offset},
          {"old_dn", detail::number_or_null(c.old_dn)},
          {"new_dn", detail::number_or_null(c.new_dn)},
          {"new_ip", detail::index_or_null(c.new_ip)},
          {"new_lp", c.new_lp}};
}

inline json to_json(const ValmapSnapshot &snap, std::size_t lmin,
                    std::size_t lmax) {
  json mpn = json::array(), ip = json::array(), lp = json::array();
  for (std::size_t i = 0; i < snap.state.size(); ++i) {
    mpn.push_back(detail::number_or_null(snap.state.mpn[i]));
    ip.push_back(detail::index_or_null(snap.state.ip[i]));
    lp.push_back(snap.state.lp[i]);
  }
  json cps = json::array();
  for (const auto &c : snap.checkpoints)
    cps.push_back(to_json(c));
  return {{"length", snap.length},
          {"lmin", lmin},
          {"lmax", lmax},
          {"mpn", std::move(mpn)},
          {"ip", std::move(ip)},
          {"lp", std::move(lp)},
          {"checkpoints", std::move(cps)}};
}

inline json to_json(const MotifSet &set) {
  json members = json::array();
  for (const auto &m : set.members)
    members.push_back({{"offset", m.offset},
                       {"distance", detail::number_or_null(m.distance)}});
  return {{"seed", to_json(set.seed)},
          {"radius_factor", set.radius_factor},
          {"radius", set.radius},
          {"exclusion", set.exclusion},
          {"members", std::move(members)}};
}

} // namespace valmod
