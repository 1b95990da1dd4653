// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "oracle.hpp"
#include "valmod/commands.hpp"
#include "valmod/engine.hpp"
#include "valmod/io.hpp"
#include "valmod/lower_bound.hpp"
#include "valmod/service.hpp"
#include "valmod/synth.hpp"

using namespace valmod;
namespace fs = std::filesystem;

namespace {

constexpr double kDistanceTol = 1e-8;
constexpr double kLbTol = 1e-9;
constexpr double kNormalizedTol = 1e-12;
constexpr double kPlantedTol = 1e-9;
constexpr std::size_t kPlantedSlack = 2;
constexpr double kMpSeconds = 60.0;
constexpr double kValmodSeconds = 600.0;
constexpr double kCertifiedShare = 0.5;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const std::string &name, const std::function<Outcome()> &check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += o.pass ? 0 : 1;
  std::printf("%s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// The shared random corpus: 20 random walks with |D| in [256, 512].
std::vector<std::vector<double>> corpus() {
  std::vector<std::vector<double>> out;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(256, 512);
  for (std::uint64_t s = 0; s < 20; ++s)
    out.push_back(oracle::random_walk(size(rng), 1000 + s));
  return out;
}

ValmodOptions corpus_options() {
  ValmodOptions o;
  o.lmin = 8;
  o.lmax = 16;
  o.k = 3;
  o.p = 10;
  o.workers = 1;
  return o;
}

/// Emitted pairs of every run, for the normalized-distance rule.
std::vector<MotifPair> emitted;

void remember(const ValmodResult &r) {
  for (const auto &lr : r.lengths)
    emitted.insert(emitted.end(), lr.topk.begin(), lr.topk.end());
}

Outcome oracle_exactness() {
  std::size_t lengths = 0, mismatches = 0;
  double worst = 0.0;
  for (const auto &x : corpus()) {
    const auto o = corpus_options();
    const auto r = valmod_run(SeriesRecord(x), o);
    remember(r);
    for (std::size_t len = o.lmin; len <= o.lmax; ++len) {
      ++lengths;
      const auto ref = oracle::topk(
          oracle::matrix_profile(x, len, oracle::default_radius(len)), len, o.k);
      const auto &got = r.at(len).topk;
      bool same = got.size() == ref.size();
      for (std::size_t t = 0; same && t < ref.size(); ++t) {
        same = got[t].left == ref[t].left && got[t].right == ref[t].right &&
               got[t].length == len;
        worst = std::max(worst, std::abs(got[t].distance - ref[t].distance));
        same = same && std::abs(got[t].distance - ref[t].distance) <= kDistanceTol;
      }
      mismatches += same ? 0 : 1;
    }
  }
  std::ostringstream d;
  d << "20 series, " << lengths << " lengths, " << mismatches
    << " mismatches, max |dd| " << worst;
  return {mismatches == 0, d.str()};
}

/// Admissibility and rank invariance over every ordered non-trivial pair of
/// the corpus, extended 24 points past each base length.
struct LbSweep {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst = -oracle::kInf;
  std::size_t anchors = 0;
  std::size_t rank_breaks = 0;
};

LbSweep lb_sweep() {
  LbSweep out;
  for (const auto &x : corpus()) {
    const SeriesRecord s(x);
    const std::size_t n = x.size();
    // Long-double prefix sums for the reference distances.
    std::vector<long double> ps(n + 1, 0), pq(n + 1, 0);
    for (std::size_t t = 0; t < n; ++t) {
      ps[t + 1] = ps[t] + x[t];
      pq[t + 1] = pq[t] + static_cast<long double>(x[t]) * x[t];
    }
    auto moments = [&](std::size_t off, std::size_t len, long double &m,
                       long double &sd) {
      m = (ps[off + len] - ps[off]) / len;
      sd = std::sqrt(std::max<long double>(
          0, (pq[off + len] - pq[off]) / len - m * m));
    };
    for (std::size_t base : {8u, 12u}) {
      const auto stats = rolling_stats(s, base);
      const std::size_t radius = oracle::default_radius(base);
      const std::size_t count = n - base + 1;
      std::vector<LbEntry> entries;
      std::vector<long double> dots;
      std::vector<std::size_t> first; // start of each anchor's group
      for (std::size_t i = 0; i < count; ++i) {
        first.push_back(entries.size());
        for (std::size_t j = 0; j < count; ++j) {
          if (oracle::trivial(i, j, radius))
            continue;
          entries.push_back(
              lb_init(s, stats, i, j, oracle::distance(x, i, j, base)));
          long double dot = 0;
          for (std::size_t t = 0; t < base; ++t)
            dot += static_cast<long double>(x[i + t]) * x[j + t];
          dots.push_back(dot);
        }
      }
      first.push_back(entries.size());

      std::vector<std::vector<std::size_t>> base_rank;
      for (std::size_t a = 0; a + 1 < first.size(); ++a) {
        const std::span<const LbEntry> group(entries.data() + first[a],
                                             first[a + 1] - first[a]);
        base_rank.push_back(lb_rank(group));
      }
      out.anchors += base_rank.size();

      std::vector<char> broken(base_rank.size(), 0);
      for (std::size_t len = base + 1; len <= base + 24; ++len) {
        const auto st = rolling_stats(s, len);
        for (std::size_t e = 0; e < entries.size(); ++e) {
          auto &en = entries[e];
          lb_update(en, s, st);
          if (en.expired)
            continue;
          dots[e] += static_cast<long double>(x[en.anchor + len - 1]) *
                     x[en.candidate + len - 1];
          long double ma, sa, mb, sb;
          moments(en.anchor, len, ma, sa);
          moments(en.candidate, len, mb, sb);
          const long double q = (dots[e] / len - ma * mb) / (sa * sb);
          const double d = static_cast<double>(
              std::sqrt(std::max<long double>(0, 2 * len * (1 - q))));
          ++out.checked;
          out.worst = std::max(out.worst, en.lower_bound - d);
          if (!(en.lower_bound <= d + kLbTol))
            ++out.violations;
        }
        // The base permutation, restricted to survivors, must still be
        // sorted by (lb, candidate).
        for (std::size_t a = 0; a < base_rank.size(); ++a) {
          const LbEntry *prev = nullptr;
          for (auto t : base_rank[a]) {
            const auto &cur = entries[first[a] + t];
            if (cur.expired)
              continue;
            if (prev && (prev->lower_bound > cur.lower_bound ||
                         (prev->lower_bound == cur.lower_bound &&
                          prev->candidate > cur.candidate)))
              broken[a] = 1;
            prev = &cur;
          }
          const std::span<const LbEntry> group(entries.data() + first[a],
                                               first[a + 1] - first[a]);
          std::vector<std::size_t> survivors;
          for (auto t : base_rank[a])
            if (!group[t].expired)
              survivors.push_back(t);
          if (lb_rank(group) != survivors)
            broken[a] = 1;
        }
      }
      out.rank_breaks += static_cast<std::size_t>(
          std::count(broken.begin(), broken.end(), 1));
    }
  }
  return out;
}

Outcome matrix_profile_correctness() {
  std::mt19937_64 rng(77);
  std::size_t bad = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(64, 512)(rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(4, 32)(rng);
    const auto x = inst % 5 == 4 ? oracle::gaussian(n, 500 + inst)
                                 : oracle::random_walk(n, 500 + inst);
    const auto mp = matrix_profile(SeriesRecord(x), len);
    const auto ref = oracle::matrix_profile(x, len, oracle::default_radius(len));
    bool ok = mp.size() == ref.mp.size();
    for (std::size_t i = 0; ok && i < mp.size(); ++i) {
      const double e = std::abs(mp.mp[i] - ref.mp[i]);
      worst = std::max(worst, e);
      ok = e <= kDistanceTol;
      // A different neighbour is only acceptable at an exact-distance tie.
      if (ok && mp.ip[i] != ref.ip[i])
        ok = std::abs(oracle::distance(x, i, static_cast<std::size_t>(mp.ip[i]), len) -
                      ref.mp[i]) <= kDistanceTol;
    }
    bad += ok ? 0 : 1;
  }
  std::ostringstream d;
  d << "50 instances, " << bad << " failing, max |dmp| " << worst;
  return {bad == 0, d.str()};
}

Outcome valmap_construction() {
  std::mt19937_64 rng(99);
  std::size_t replay_bad = 0, view_bad = 0, views = 0;
  for (int inst = 0; inst < 4; ++inst) {
    const auto x = oracle::random_walk(480, 300 + inst);
    const SeriesRecord s(x);
    ValmodOptions o;
    o.lmin = 10;
    o.lmax = 40;
    o.k = 4;
    o.p = 12;
    o.workers = 1;
    const auto full = valmod_run(s, o);
    remember(full);

    auto replay = valmap_init(full.base_profile, o.lmax);
    for (const auto &lr : full.lengths)
      for (const auto &p : lr.topk)
        valmap_update(replay, p);
    if (!(replay.current == full.valmap.current) ||
        replay.checkpoints != full.valmap.checkpoints)
      ++replay_bad;

    std::uniform_int_distribution<std::size_t> pick(o.lmin, o.lmax);
    for (int v = 0; v < 5; ++v) {
      const std::size_t view = pick(rng);
      auto cut_opts = o;
      cut_opts.lmax = view;
      const auto cut = valmod_run(s, cut_opts);
      remember(cut);
      const auto snap = valmap_at(full.valmap, view);
      ++views;
      if (!(snap.state == cut.valmap.current) ||
          snap.checkpoints != cut.valmap.checkpoints)
        ++view_bad;
    }
  }
  std::ostringstream d;
  d << "4 instances: replay mismatches " << replay_bad << ", " << views
    << " truncated views, mismatches " << view_bad;
  return {replay_bad == 0 && view_bad == 0, d.str()};
}

Outcome normalized_rule() {
  double worst = 0.0;
  for (const auto &p : emitted)
    worst = std::max(worst, std::abs(p.normalized -
                                     p.distance * std::sqrt(1.0 / static_cast<double>(p.length))));
  std::ostringstream d;
  d << emitted.size() << " pairs, max deviation " << worst;
  return {!emitted.empty() && worst <= kNormalizedTol, d.str()};
}

Outcome planted_recovery() {
  SynthSpec spec;
  spec.length = 4096;
  spec.plant_length = 64;
  spec.seed = 1;
  ValmodOptions o;
  o.lmin = 50;
  o.lmax = 100;

  const auto exact = synthesize(spec);
  const auto r = valmod_run(exact.series, o);
  remember(r);
  const auto &top = r.at(64).topk.at(0);
  const bool found = top.left == exact.offsets[0] && top.right == exact.offsets[1] &&
                     top.distance < kPlantedTol;

  spec.noise = 0.01;
  const auto noisy = synthesize(spec);
  const auto rn = valmod_run(noisy.series, o);
  remember(rn);
  std::size_t best_len = 0;
  double best = oracle::kInf;
  for (const auto &lr : rn.lengths)
    if (!lr.topk.empty() && lr.topk[0].normalized < best) {
      best = lr.topk[0].normalized;
      best_len = lr.length;
    }
  const bool near = best_len + kPlantedSlack >= 64 && best_len <= 64 + kPlantedSlack;

  std::ostringstream d;
  d << "exact: top-1 at 64 = (" << top.left << ", " << top.right << ") d "
    << top.distance << "; noisy: smallest normalized top-1 at length " << best_len
    << " (dn " << best << " vs " << rn.at(64).topk.at(0).normalized << " at 64)";
  return {found && near, d.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "valmod");
  std::vector<const char *> argv;
  for (auto &a : args)
    argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome determinism(const fs::path &tmp) {
  const auto dir = tmp / "determinism";
  if (run_cli({"synth", "--size", "8000", "--plant-length", "80", "--plants", "3",
           "--noise", "0.05", "--seed", "5", "--out", (dir / "s").string()}) != 0)
    return {false, "synth failed"};
  const auto input = (dir / "s" / "series.txt").string();
  for (const char *w : {"1", "4"}) {
    const auto out = dir / (std::string("w") + w);
    if (run_cli({"valmod", "-i", input, "--lmin", "70", "--lmax", "95", "--k", "3",
             "--trace", "--workers", w, "--out", (out / "valmod").string()}) != 0 ||
        run_cli({"profile", "-i", input, "-l", "80", "--k", "5", "--workers", w,
             "--out", (out / "profile").string()}) != 0)
      return {false, "run failed"};
  }
  std::size_t files = 0, differ = 0;
  for (const auto &entry : fs::recursive_directory_iterator(dir / "w1")) {
    if (!entry.is_regular_file())
      continue;
    const auto other = dir / "w4" / fs::relative(entry.path(), dir / "w1");
    ++files;
    if (slurp(entry.path()) != slurp(other))
      ++differ;
  }
  std::ostringstream d;
  d << files << " files compared across 1 and 4 workers, " << differ << " differ";
  return {files >= 7 && differ == 0, d.str()};
}

Outcome performance() {
  SynthSpec spec;
  spec.length = 131072;
  spec.plant_length = 256;
  spec.seed = 3;
  const auto big = synthesize(spec);
  DistanceOptions one;
  one.workers = 1;
  auto t0 = std::chrono::steady_clock::now();
  const auto mp = matrix_profile(big.series, 256, one);
  const double mp_secs = seconds_since(t0);
  const bool mp_found = mp.mp[big.offsets[0]] < kPlantedTol;

  spec.length = 65536;
  spec.plant_length = 100;
  spec.seed = 4;
  const auto mid = synthesize(spec);
  ValmodOptions o;
  o.lmin = 80;
  o.lmax = 129;
  o.workers = 1;
  t0 = std::chrono::steady_clock::now();
  const auto r = valmod_run(mid.series, o);
  const double vm_secs = seconds_since(t0);
  std::size_t certified = 0;
  for (const auto &lr : r.lengths)
    certified += lr.stats.certified_without_recompute() ? 1 : 0;
  const double share =
      static_cast<double>(certified) / static_cast<double>(r.lengths.size() - 1);
  const auto &top = r.at(100).topk.at(0);
  const bool vm_found = top.left == mid.offsets[0] && top.right == mid.offsets[1];

  std::ostringstream d;
  d << "matrix profile |D|=131072 l=256: " << mp_secs << "s; valmod |D|=65536 ["
    << o.lmin << "," << o.lmax << "]: " << vm_secs << "s, " << certified << "/"
    << r.lengths.size() - 1 << " lengths certified without recomputation";
  return {mp_secs < kMpSeconds && mp_found && vm_secs < kValmodSeconds &&
              share >= kCertifiedShare && vm_found,
          d.str()};
}

Outcome service_flow(const fs::path &tmp) {
  using service::Service;
  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.data_dir = tmp / "service";
  Service svc(cfg);
  const int port = svc.bind();
  std::thread server([&] { svc.run(); });
  struct Stop {
    Service &s;
    std::thread &t;
    ~Stop() {
      s.stop();
      t.join();
    }
  } stop{svc, server};

  SynthSpec spec;
  spec.length = 4096;
  spec.plant_length = 64;
  spec.plant_count = 3;
  spec.seed = 9;
  const auto syn = synthesize(spec);
  std::ostringstream text;
  write_series(text, syn.series.values());

  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(60, 0);
  auto up = c.Post("/datasets", text.str(), "text/plain");
  if (!up || up->status != 201)
    return {false, "upload failed"};
  const auto ds = json::parse(up->body)["dataset_id"].get<std::string>();

  auto sub = c.Post("/jobs",
                    json({{"dataset_id", ds}, {"lmin", 50}, {"lmax", 80}, {"k", 3}}).dump(),
                    "application/json");
  if (!sub || sub->status != 202)
    return {false, "submit failed"};
  const auto job = json::parse(sub->body)["job_id"].get<std::string>();

  json state;
  for (int t = 0; t < 2400; ++t) {
    state = json::parse(c.Get("/jobs/" + job)->body);
    if (state["state"] == "done" || state["state"] == "failed")
      break;
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  if (state["state"] != "done")
    return {false, "job ended as " + state.dump()};
  auto has = [](const json &j, std::initializer_list<const char *> keys) {
    return std::all_of(keys.begin(), keys.end(),
                       [&](const char *k) { return j.contains(k); });
  };
  bool shapes = has(state, {"job_id", "dataset_id", "params", "state",
                            "current_length", "created_at", "started_at",
                            "finished_at"});

  const auto vm = json::parse(c.Get("/jobs/" + job + "/valmap?length=64")->body);
  shapes = shapes && has(vm, {"length", "mpn", "ip", "lp", "checkpoints"}) &&
           vm["mpn"].size() == 4096u - 50 + 1;

  const auto motifs = json::parse(c.Get("/jobs/" + job + "/motifs?length=64")->body);
  const auto &top = motifs["pairs"].at(0);
  shapes = shapes && has(top, {"left", "right", "length", "distance", "normalized"});
  const std::set<std::size_t> plants(syn.offsets.begin(), syn.offsets.end());
  const bool planted = plants.count(top["left"].get<std::size_t>()) &&
                       plants.count(top["right"].get<std::size_t>()) &&
                       top["distance"].get<double>() < kPlantedTol;

  auto set = c.Post("/jobs/" + job + "/motifset",
                    json({{"length", 64}, {"left", top["left"]}, {"right", top["right"]}})
                        .dump(),
                    "application/json");
  if (!set || set->status != 200)
    return {false, "motifset failed"};
  const auto ms = json::parse(set->body);
  shapes = shapes && has(ms, {"seed", "radius", "members"});
  std::set<std::size_t> members;
  for (const auto &m : ms["members"])
    members.insert(m["offset"].get<std::size_t>());

  std::ostringstream d;
  d << "upload -> job -> valmap -> motifs -> motifset; planted pair "
    << (planted ? "found" : "missing") << ", motif set of " << members.size();
  return {shapes && planted && members == plants, d.str()};
}

} // namespace

int main() {
  const auto tmp = fs::temp_directory_path() /
                   ("valmod-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  report("oracle exactness", oracle_exactness);
  const auto sweep = lb_sweep();
  report("lower bound admissibility", [&] {
    std::ostringstream d;
    d << sweep.checked << " (entry, length) checks, " << sweep.violations
      << " violations, max lb - d " << sweep.worst;
    return Outcome{sweep.violations == 0 && sweep.checked > 0, d.str()};
  });
  report("rank invariance", [&] {
    std::ostringstream d;
    d << sweep.anchors << " anchor profiles, " << sweep.rank_breaks
      << " permutation changes";
    return Outcome{sweep.rank_breaks == 0 && sweep.anchors > 0, d.str()};
  });
  report("matrix profile correctness", matrix_profile_correctness);
  report("valmap construction", valmap_construction);
  report("planted motif recovery", planted_recovery);
  report("length-normalized rule", normalized_rule);
  report("determinism", [&] { return determinism(tmp); });
  report("performance", performance);
  report("service contract", [&] { return service_flow(tmp); });

  fs::remove_all(tmp);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
