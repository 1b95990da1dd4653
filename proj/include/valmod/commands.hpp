#pragma once

// Subcommands of the valmod executable. Each writes its outputs plus a
// config.json echo into the output directory. Exit codes: 0 success,
// 2 invalid input or parameters, 1 runtime failure.

#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "valmod/distance.hpp"
#include "valmod/engine.hpp"
#include "valmod/errors.hpp"
#include "valmod/io.hpp"
#include "valmod/motif_set.hpp"
#include "valmod/series.hpp"
#include "valmod/service.hpp"
#include "valmod/synth.hpp"

namespace valmod::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

struct RunConfig {
  std::string command;

  std::string input;
  std::string format = "lines";
  std::string column;
  char delimiter = ',';
  bool header = false;
  bool interpolate = false;

  std::size_t length = 0;
  std::size_t lmin = 0;
  std::size_t lmax = 0;
  std::size_t k = 1;
  std::size_t p = 50;
  std::optional<std::size_t> exclusion;
  std::string out = "valmod-out";
  bool trace = false;
  unsigned workers = 0;
  std::uint64_t seed = 1;

  // synth
  std::size_t size = 4096;
  std::size_t plant_length = 64;
  std::size_t plants = 2;
  double noise = 0.0;
  std::vector<std::size_t> offsets;

  // motifset
  std::size_t left = 0;
  std::size_t right = 0;
  double radius_factor = kDefaultRadiusFactor;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data = "valmod-data";
  unsigned jobs = 1;
};

namespace detail {

inline IngestOptions ingest_options(const RunConfig &c) {
  IngestOptions o;
  if (c.format == "csv" || c.format == "delimited")
    o.format = InputFormat::Delimited;
  else if (c.format != "lines")
    throw ParameterError("--format must be lines or csv, got " + c.format);
  o.delimiter = c.delimiter;
  o.header = c.header;
  o.interpolate = c.interpolate;
  if (!c.column.empty()) {
    const bool numeric = std::all_of(c.column.begin(), c.column.end(),
                                     [](char ch) { return ch >= '0' && ch <= '9'; });
    if (numeric)
      o.column = static_cast<std::size_t>(std::stoull(c.column));
    else
      o.column = c.column;
  }
  return o;
}

inline SeriesRecord load(const RunConfig &c) {
  if (c.input.empty())
    throw ParameterError("--input is required");
  return read_series_file(c.input, ingest_options(c));
}

inline json input_echo(const RunConfig &c) {
  return {{"path", c.input},
          {"format", c.format},
          {"column", c.column.empty() ? json(nullptr) : json(c.column)},
          {"delimiter", std::string(1, c.delimiter)},
          {"header", c.header},
          {"interpolate", c.interpolate}};
}

/// Parameters that determine the outputs. The worker count is left out on
/// purpose: it never changes output bytes.
inline json config_echo(const RunConfig &c) {
  json j = {{"command", c.command}};
  const auto excl = c.exclusion ? json(*c.exclusion) : json(nullptr);
  if (c.command == "profile") {
    j["input"] = input_echo(c);
    j["length"] = c.length;
    j["k"] = c.k;
    j["exclusion"] = excl;
  } else if (c.command == "valmod") {
    j["input"] = input_echo(c);
    j["lmin"] = c.lmin;
    j["lmax"] = c.lmax;
    j["k"] = c.k;
    j["p"] = c.p;
    j["exclusion"] = excl;
    j["trace"] = c.trace;
  } else if (c.command == "motifset") {
    j["input"] = input_echo(c);
    j["length"] = c.length;
    j["left"] = c.left;
    j["right"] = c.right;
    j["radius_factor"] = c.radius_factor;
    j["exclusion"] = excl;
  } else if (c.command == "synth") {
    j["size"] = c.size;
    j["plant_length"] = c.plant_length;
    j["plants"] = c.plants;
    j["noise"] = c.noise;
    j["offsets"] = c.offsets;
    j["seed"] = c.seed;
  } else if (c.command == "serve") {
    j["host"] = c.host;
    j["port"] = c.port;
    j["data"] = c.data;
    j["jobs"] = c.jobs;
  }
  return j;
}

inline fs::path prepare_out(const std::string &dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir + ": " +
                             ec.message());
  return p;
}

inline void write_file(const fs::path &path,
                       const std::function<void(std::ostream &)> &body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out.flush())
    throw std::runtime_error("cannot write " + path.string());
}

inline void write_echo(const fs::path &dir, const RunConfig &c) {
  write_file(dir / "config.json",
             [&](std::ostream &o) { o << config_echo(c).dump(2) << '\n'; });
}

} // namespace detail

/// mp.csv and topk.csv for one length.
inline void cmd_profile(const RunConfig &c) {
  if (c.length == 0)
    throw ParameterError("--length is required");
  if (c.k < 1)
    throw ParameterError("--k must be >= 1");
  const auto series = detail::load(c);
  DistanceOptions opts;
  opts.exclusion.radius = c.exclusion;
  opts.workers = c.workers;
  const auto mp = matrix_profile(series, c.length, opts);
  LengthResult r;
  r.length = c.length;
  r.topk = topk_pairs(mp, c.k);

  const auto dir = detail::prepare_out(c.out);
  detail::write_echo(dir, c);
  detail::write_file(dir / "mp.csv",
                     [&](std::ostream &o) { write_matrix_profile(o, mp); });
  detail::write_file(dir / "topk.csv", [&](std::ostream &o) {
    write_topk(o, std::span<const LengthResult>(&r, 1));
  });
}

/// topk.csv, valmap.csv, checkpoints.csv and, with --trace, trace.csv.
inline void cmd_valmod(const RunConfig &c) {
  const auto series = detail::load(c);
  ValmodOptions opts;
  opts.lmin = c.lmin;
  opts.lmax = c.lmax;
  opts.k = c.k;
  opts.p = c.p;
  opts.exclusion.radius = c.exclusion;
  opts.workers = c.workers;
  const auto result = valmod_run(series, opts);

  const auto dir = detail::prepare_out(c.out);
  detail::write_echo(dir, c);
  detail::write_file(dir / "topk.csv",
                     [&](std::ostream &o) { write_topk(o, result.lengths); });
  detail::write_file(dir / "valmap.csv", [&](std::ostream &o) {
    write_valmap(o, result.valmap.current);
  });
  detail::write_file(dir / "checkpoints.csv", [&](std::ostream &o) {
    write_checkpoints(o, result.valmap.checkpoints);
  });
  if (c.trace)
    detail::write_file(dir / "trace.csv",
                       [&](std::ostream &o) { write_trace(o, result.lengths); });
}

/// motifset.csv and motifset.json for a pair given by its offsets.
inline void cmd_motifset(const RunConfig &c) {
  const auto series = detail::load(c);
  const std::size_t n = series.size();
  if (c.length < 2 || c.left + c.length > n || c.right + c.length > n)
    throw ParameterError("--length/--left/--right must select two windows inside "
                         "a series of length " + std::to_string(n));
  if (c.left == c.right)
    throw ParameterError("--left and --right must differ");
  const double d = znorm_distance(series.window(c.left, c.length),
                                  series.window(c.right, c.length));
  MotifSetOptions opts;
  opts.exclusion.radius = c.exclusion;
  const auto set = expand(series, MotifPair::make(c.left, c.right, c.length, d),
                          c.radius_factor, opts);

  const auto dir = detail::prepare_out(c.out);
  detail::write_echo(dir, c);
  detail::write_file(dir / "motifset.csv",
                     [&](std::ostream &o) { write_motif_set(o, set); });
  detail::write_file(dir / "motifset.json",
                     [&](std::ostream &o) { o << to_json(set).dump(2) << '\n'; });
}

/// series.txt plus plants.csv listing where the copies went.
inline void cmd_synth(const RunConfig &c) {
  SynthSpec spec;
  spec.length = c.size;
  spec.plant_length = c.plant_length;
  spec.plant_count = c.plants;
  spec.noise = c.noise;
  spec.offsets = c.offsets;
  spec.seed = c.seed;
  const auto synth = synthesize(spec);

  const auto dir = detail::prepare_out(c.out);
  detail::write_echo(dir, c);
  detail::write_file(dir / "series.txt", [&](std::ostream &o) {
    write_series(o, synth.series.values());
  });
  detail::write_file(dir / "plants.csv", [&](std::ostream &o) {
    o << "offset,length\n";
    for (auto off : synth.offsets)
      o << off << ',' << c.plant_length << '\n';
  });
}

/// Serves until SIGINT or SIGTERM. `ready` is called with the bound port.
inline void cmd_serve(const RunConfig &c,
                      const std::function<void(int)> &ready = {}) {
  if (c.port < 0 || c.port > 65535)
    throw ParameterError("--port must lie in [0, 65535]");
  if (c.jobs < 1)
    throw ParameterError("--jobs must be >= 1");

  // Handle termination on a dedicated thread; every thread started after
  // this inherits the blocked mask.
  sigset_t mask;
  sigemptyset(&mask);
  sigaddset(&mask, SIGINT);
  sigaddset(&mask, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &mask, nullptr);

  service::ServiceConfig cfg;
  cfg.host = c.host;
  cfg.port = c.port;
  cfg.data_dir = c.data;
  cfg.job_slots = c.jobs;
  cfg.engine_workers = c.workers;
  service::Service svc(cfg);
  const int port = svc.bind();
  detail::write_echo(detail::prepare_out(c.data), c);

  std::thread watcher([&] {
    int sig = 0;
    sigwait(&mask, &sig);
    svc.stop();
  });
  std::cerr << "valmod: serving on http://" << c.host << ':' << port << '\n';
  if (ready)
    ready(port);
  svc.run();
  // Wake the watcher if the server stopped on its own.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  pthread_sigmask(SIG_UNBLOCK, &mask, nullptr);
}

namespace detail {

inline void input_flags(CLI::App *cmd, RunConfig &c) {
  cmd->add_option("--input,-i", c.input, "Series file")->required();
  cmd->add_option("--format", c.format, "lines or csv")
      ->check(CLI::IsMember({"lines", "csv", "delimited"}));
  cmd->add_option("--column", c.column, "Column name or 0-based index (csv)");
  cmd->add_option("--delimiter", c.delimiter, "Field separator (csv)");
  cmd->add_flag("--header", c.header, "First row is a header (csv)");
  cmd->add_flag("--interpolate", c.interpolate,
                "Interpolate NaN/Inf instead of rejecting them");
}

inline void common_flags(CLI::App *cmd, RunConfig &c) {
  cmd->add_option("--exclusion", c.exclusion,
                  "Trivial-match exclusion radius (default ceil(length/2))");
  cmd->add_option("--out,-o", c.out, "Output directory");
  cmd->add_option("--workers", c.workers, "Worker threads, 0 = all cores");
}

} // namespace detail

/// Parses arguments and dispatches; returns the process exit code.
inline int run(int argc, const char *const *argv, std::ostream &err = std::cerr) {
  RunConfig c;
  CLI::App app{"Variable-length motif discovery"};
  app.name("valmod");
  app.require_subcommand(1);

  auto *profile = app.add_subcommand("profile", "Fixed-length matrix profile");
  detail::input_flags(profile, c);
  detail::common_flags(profile, c);
  profile->add_option("--length,-l", c.length, "Subsequence length")->required();
  profile->add_option("--k", c.k, "Top-k pairs to export");

  auto *valmod = app.add_subcommand("valmod", "Top-k motifs over a length range");
  detail::input_flags(valmod, c);
  detail::common_flags(valmod, c);
  valmod->add_option("--lmin", c.lmin, "Smallest length")->required();
  valmod->add_option("--lmax", c.lmax, "Largest length")->required();
  valmod->add_option("--k", c.k, "Pairs per length");
  valmod->add_option("--p", c.p, "Entries kept per partial profile");
  valmod->add_flag("--trace", c.trace, "Write the pruning trace");

  auto *motifset = app.add_subcommand("motifset", "Expand a pair into its motif set");
  detail::input_flags(motifset, c);
  detail::common_flags(motifset, c);
  motifset->add_option("--length,-l", c.length, "Pair length")->required();
  motifset->add_option("--left", c.left, "First offset")->required();
  motifset->add_option("--right", c.right, "Second offset")->required();
  motifset->add_option("--radius-factor", c.radius_factor,
                       "Radius as a multiple of the pair distance");

  auto *synth = app.add_subcommand("synth", "Random walk with planted copies");
  synth->add_option("--size,-n", c.size, "Series length");
  synth->add_option("--plant-length", c.plant_length, "Length of each copy");
  synth->add_option("--plants", c.plants, "Number of copies");
  synth->add_option("--noise", c.noise, "Gaussian noise sigma added to each copy");
  synth->add_option("--offsets", c.offsets, "Explicit plant offsets")->delimiter(',');
  synth->add_option("--seed", c.seed, "Random seed");
  synth->add_option("--out,-o", c.out, "Output directory");

  auto *serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", c.host, "Bind address")->envname("VALMOD_HOST");
  serve->add_option("--port", c.port, "Bind port, 0 = any")->envname("VALMOD_PORT");
  serve->add_option("--data", c.data, "Dataset directory")->envname("VALMOD_DATA");
  serve->add_option("--jobs", c.jobs, "Jobs run at the same time")
      ->envname("VALMOD_JOBS");
  serve->add_option("--workers", c.workers, "Engine threads per job, 0 = all cores")
      ->envname("VALMOD_WORKERS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "valmod: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (profile->parsed()) {
      c.command = "profile";
      cmd_profile(c);
    } else if (valmod->parsed()) {
      c.command = "valmod";
      cmd_valmod(c);
    } else if (motifset->parsed()) {
      c.command = "motifset";
      cmd_motifset(c);
    } else if (synth->parsed()) {
      c.command = "synth";
      cmd_synth(c);
    } else if (serve->parsed()) {
      c.command = "serve";
      cmd_serve(c);
    }
  } catch (const ParameterError &e) {
    err << "valmod: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ParseError &e) {
    err << "valmod: " << c.input << ": " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception &e) {
    err << "valmod: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

} // namespace valmod::cli
