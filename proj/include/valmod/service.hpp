#pragma once

// HTTP/JSON job service over the engine. Datasets are persisted under the
// data directory; jobs live in memory only.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <sys/socket.h>

#include <httplib.h>
#include <json.hpp>

#include "valmod/engine.hpp"
#include "valmod/errors.hpp"
#include "valmod/io.hpp"
#include "valmod/motif_set.hpp"
#include "valmod/series.hpp"

namespace valmod::service {

namespace fs = std::filesystem;
using Clock = std::chrono::system_clock;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  fs::path data_dir = "valmod-data";
  /// Jobs running at the same time.
  unsigned job_slots = 1;
  /// Engine threads per job; 0 selects the hardware concurrency.
  unsigned engine_workers = 1;
  std::size_t max_upload_bytes = std::size_t{256} << 20;
};

struct DatasetRecord {
  std::string id;
  std::string name;
  std::size_t length = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::string file;
};

inline json to_json(const DatasetRecord &r) {
  return {{"dataset_id", r.id}, {"name", r.name}, {"length", r.length},
          {"min", r.min},       {"max", r.max},   {"mean", r.mean}};
}

namespace detail {

inline std::string iso_time(Clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      t.time_since_epoch())
                      .count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  const auto n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%.*s.%03dZ", static_cast<int>(n), buf,
                static_cast<int>(ms % 1000));
  return out;
}

/// Parses "<prefix><n>" ids; 0 when malformed.
inline std::size_t parse_id(const std::string &id, std::string_view prefix) {
  if (id.size() <= prefix.size() || id.compare(0, prefix.size(), prefix) != 0)
    return 0;
  std::size_t v = 0;
  for (std::size_t t = prefix.size(); t < id.size(); ++t) {
    if (id[t] < '0' || id[t] > '9' || v > (SIZE_MAX - 9) / 10)
      return 0;
    v = v * 10 + static_cast<std::size_t>(id[t] - '0');
  }
  return v;
}

/// Writes through a temporary file so readers never see a partial file.
inline void write_atomically(const fs::path &path, const std::string &text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush())
      throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

} // namespace detail

/// Uploaded series, stored once as plain lines plus a metadata sidecar.
class DatasetStore {
public:
  explicit DatasetStore(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    for (const auto &entry : fs::directory_iterator(dir_)) {
      if (entry.path().extension() != ".json")
        continue;
      std::ifstream in(entry.path());
      const auto meta = json::parse(in, nullptr, false);
      if (meta.is_discarded() || !meta.contains("dataset_id"))
        continue;
      DatasetRecord r;
      r.id = meta.at("dataset_id").get<std::string>();
      r.name = meta.value("name", "");
      r.length = meta.at("length").get<std::size_t>();
      r.min = meta.at("min").get<double>();
      r.max = meta.at("max").get<double>();
      r.mean = meta.at("mean").get<double>();
      r.file = meta.at("file").get<std::string>();
      const auto n = detail::parse_id(r.id, "ds-");
      if (n == 0 || !fs::exists(dir_ / r.file))
        continue;
      next_ = std::max(next_, n + 1);
      records_.emplace(n, std::move(r));
    }
  }

  DatasetRecord add(const SeriesRecord &series) {
    std::lock_guard lock(mutex_);
    const std::size_t n = next_++;
    DatasetRecord r;
    r.id = "ds-" + std::to_string(n);
    r.name = series.name().empty() ? r.id : series.name();
    r.length = series.size();
    const auto v = series.values();
    r.min = *std::min_element(v.begin(), v.end());
    r.max = *std::max_element(v.begin(), v.end());
    long double sum = 0.0L;
    for (double e : v)
      sum += e;
    r.mean = static_cast<double>(sum / static_cast<long double>(v.size()));
    r.file = r.id + ".txt";

    std::ostringstream body;
    write_series(body, v);
    detail::write_atomically(dir_ / r.file, body.str());
    auto meta = to_json(r);
    meta["file"] = r.file;
    detail::write_atomically(dir_ / (r.id + ".json"), meta.dump(2) + "\n");

    cache_[r.id] = std::make_shared<const SeriesRecord>(series);
    records_.emplace(n, r);
    return r;
  }

  std::optional<DatasetRecord> find(const std::string &id) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(detail::parse_id(id, "ds-"));
    if (it == records_.end())
      return std::nullopt;
    return it->second;
  }

  std::vector<DatasetRecord> list() const {
    std::lock_guard lock(mutex_);
    std::vector<DatasetRecord> out;
    for (const auto &[n, r] : records_)
      out.push_back(r);
    return out;
  }

  /// Loaded lazily and kept for the lifetime of the store.
  std::shared_ptr<const SeriesRecord> series(const std::string &id) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(detail::parse_id(id, "ds-"));
    if (it == records_.end())
      return nullptr;
    auto &slot = cache_[id];
    if (!slot) {
      IngestOptions opts;
      opts.name = it->second.name;
      slot = std::make_shared<const SeriesRecord>(
          read_series_file((dir_ / it->second.file).string(), opts));
    }
    return slot;
  }

private:
  fs::path dir_;
  mutable std::mutex mutex_;
  std::map<std::size_t, DatasetRecord> records_;
  mutable std::map<std::string, std::shared_ptr<const SeriesRecord>> cache_;
  std::size_t next_ = 1;
};

enum class JobState { Queued, Running, Done, Failed };

inline const char *to_string(JobState s) noexcept {
  switch (s) {
  case JobState::Queued:
    return "queued";
  case JobState::Running:
    return "running";
  case JobState::Done:
    return "done";
  case JobState::Failed:
    return "failed";
  }
  return "unknown";
}

struct JobParams {
  std::string dataset_id;
  std::size_t lmin = 0;
  std::size_t lmax = 0;
  std::size_t k = 1;
  std::size_t p = 50;
  std::optional<std::size_t> exclusion;
};

struct Job {
  std::string id;
  JobParams params;
  JobState state = JobState::Queued;
  /// Length being processed; lmax once done.
  std::size_t current_length = 0;
  std::string message;
  Clock::time_point created_at;
  std::optional<Clock::time_point> started_at;
  std::optional<Clock::time_point> finished_at;
  std::shared_ptr<const ValmodResult> result;
};

inline json to_json(const Job &j) {
  json params = {{"dataset_id", j.params.dataset_id},
                 {"lmin", j.params.lmin},
                 {"lmax", j.params.lmax},
                 {"k", j.params.k},
                 {"p", j.params.p},
                 {"exclusion", j.params.exclusion ? json(*j.params.exclusion)
                                                  : json(nullptr)}};
  auto stamp = [](const std::optional<Clock::time_point> &t) {
    return t ? json(detail::iso_time(*t)) : json(nullptr);
  };
  return {{"job_id", j.id},
          {"dataset_id", j.params.dataset_id},
          {"params", std::move(params)},
          {"state", to_string(j.state)},
          {"current_length", j.state == JobState::Queued
                                 ? json(nullptr)
                                 : json(j.current_length)},
          {"message", j.message.empty() ? json(nullptr) : json(j.message)},
          {"created_at", detail::iso_time(j.created_at)},
          {"started_at", stamp(j.started_at)},
          {"finished_at", stamp(j.finished_at)}};
}

/// FIFO queue drained by a fixed pool; a job waits while another job on the
/// same dataset is running.
class JobQueue {
public:
  JobQueue(const DatasetStore &store, unsigned slots, unsigned engine_workers)
      : store_(store), engine_workers_(engine_workers) {
    for (unsigned t = 0; t < std::max(1u, slots); ++t)
      pool_.emplace_back([this] { drain(); });
  }

  ~JobQueue() { shutdown(); }

  JobQueue(const JobQueue &) = delete;
  JobQueue &operator=(const JobQueue &) = delete;

  void shutdown() {
    {
      std::lock_guard lock(mutex_);
      if (stopping_)
        return;
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto &t : pool_)
      if (t.joinable())
        t.join();
  }

  std::string submit(JobParams params) {
    std::lock_guard lock(mutex_);
    const std::size_t n = next_++;
    Job job;
    job.id = "job-" + std::to_string(n);
    job.params = std::move(params);
    job.created_at = Clock::now();
    jobs_.emplace(n, job);
    queue_.push_back(n);
    wake_.notify_all();
    return job.id;
  }

  std::optional<Job> find(const std::string &id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(detail::parse_id(id, "job-"));
    if (it == jobs_.end())
      return std::nullopt;
    return it->second;
  }

  std::vector<Job> list() const {
    std::lock_guard lock(mutex_);
    std::vector<Job> out;
    for (const auto &[n, j] : jobs_)
      out.push_back(j);
    return out;
  }

private:
  struct Cancelled {};

  void drain() {
    std::unique_lock lock(mutex_);
    for (;;) {
      std::deque<std::size_t>::iterator pick;
      wake_.wait(lock, [&] {
        if (stopping_)
          return true;
        pick = std::find_if(queue_.begin(), queue_.end(), [&](std::size_t n) {
          return !busy_.count(jobs_.at(n).params.dataset_id);
        });
        return pick != queue_.end();
      });
      if (stopping_)
        return;
      const std::size_t n = *pick;
      queue_.erase(pick);
      Job &job = jobs_.at(n);
      job.state = JobState::Running;
      job.current_length = job.params.lmin;
      job.started_at = Clock::now();
      busy_.insert(job.params.dataset_id);
      const JobParams params = job.params;

      lock.unlock();
      std::shared_ptr<const ValmodResult> result;
      std::string error;
      try {
        result = execute(n, params);
      } catch (const Cancelled &) {
        error = "service stopped";
      } catch (const std::exception &e) {
        error = e.what();
      }
      lock.lock();

      Job &done = jobs_.at(n);
      done.finished_at = Clock::now();
      if (result) {
        done.state = JobState::Done;
        done.current_length = params.lmax;
        done.result = std::move(result);
      } else {
        done.state = JobState::Failed;
        done.message = error;
      }
      busy_.erase(params.dataset_id);
      wake_.notify_all();
    }
  }

  std::shared_ptr<const ValmodResult> execute(std::size_t n,
                                              const JobParams &params) {
    const auto series = store_.series(params.dataset_id);
    if (!series)
      throw std::runtime_error("dataset " + params.dataset_id + " disappeared");
    ValmodOptions opts;
    opts.lmin = params.lmin;
    opts.lmax = params.lmax;
    opts.k = params.k;
    opts.p = params.p;
    opts.exclusion.radius = params.exclusion;
    opts.workers = engine_workers_;
    opts.on_length = [this, n](std::size_t len) {
      std::lock_guard lock(mutex_);
      if (stopping_)
        throw Cancelled{};
      auto &job = jobs_.at(n);
      job.current_length = std::max(job.current_length, len);
    };
    return std::make_shared<const ValmodResult>(valmod_run(*series, opts));
  }

  const DatasetStore &store_;
  unsigned engine_workers_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::map<std::size_t, Job> jobs_;
  std::deque<std::size_t> queue_;
  std::set<std::string> busy_;
  std::size_t next_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> pool_;
};

namespace detail {

/// Field name -> message, reported as a 422 body.
using FieldErrors = std::map<std::string, std::string>;

inline void reply(httplib::Response &res, int status, const json &body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void reply_error(httplib::Response &res, int status,
                        const std::string &message,
                        const FieldErrors &fields = {}) {
  json body = {{"error", message}};
  if (!fields.empty())
    body["fields"] = fields;
  reply(res, status, body);
}

/// Reads an optional non-negative integer field.
inline std::optional<std::size_t> integer_field(const json &body,
                                                const std::string &key,
                                                FieldErrors &errors) {
  if (!body.contains(key) || body.at(key).is_null())
    return std::nullopt;
  const auto &v = body.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                 !v.is_number_unsigned())) {
    errors[key] = "must be a non-negative integer";
    return std::nullopt;
  }
  return v.get<std::size_t>();
}

/// Parses a query parameter as a non-negative integer.
inline std::optional<std::size_t> query_integer(const httplib::Request &req,
                                                const std::string &key,
                                                FieldErrors &errors) {
  if (!req.has_param(key))
    return std::nullopt;
  const auto text = req.get_param_value(key);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    errors[key] = "must be a non-negative integer";
    return std::nullopt;
  }
  return v;
}

inline std::vector<std::size_t> preview_buckets(std::size_t from, std::size_t to,
                                                std::size_t buckets) {
  std::vector<std::size_t> edges;
  const std::size_t span = to - from;
  const std::size_t count = std::max<std::size_t>(1, std::min(buckets, span));
  for (std::size_t b = 0; b <= count; ++b)
    edges.push_back(from + span * b / count);
  return edges;
}

} // namespace detail

/// Routes plus the listening socket. Construct, bind(), then run().
class Service {
public:
  explicit Service(ServiceConfig cfg)
      : cfg_(std::move(cfg)), store_(cfg_.data_dir / "datasets"),
        jobs_(store_, cfg_.job_slots, cfg_.engine_workers) {
    // httplib defaults to SO_REUSEPORT, which would let a second server
    // share an occupied port.
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    http_.set_payload_max_length(cfg_.max_upload_bytes);
    http_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    routes();
  }

  ~Service() { stop(); }

  /// Binds the configured address; throws std::runtime_error on failure.
  int bind() {
    if (cfg_.port == 0) {
      port_ = http_.bind_to_any_port(cfg_.host);
      if (port_ <= 0)
        throw std::runtime_error("cannot bind " + cfg_.host + " on any port");
    } else {
      if (!http_.bind_to_port(cfg_.host, cfg_.port))
        throw std::runtime_error("cannot bind " + cfg_.host + ":" +
                                 std::to_string(cfg_.port) +
                                 " (address in use or unavailable)");
      port_ = cfg_.port;
    }
    return port_;
  }

  /// Serves until stop().
  void run() { http_.listen_after_bind(); }

  void stop() {
    http_.stop();
    jobs_.shutdown();
  }

  int port() const noexcept { return port_; }
  const ServiceConfig &config() const noexcept { return cfg_; }
  DatasetStore &datasets() noexcept { return store_; }
  JobQueue &jobs() noexcept { return jobs_; }

private:
  void routes() {
    using httplib::Request;
    using httplib::Response;

    http_.Options(R"(.*)", [](const Request &, Response &res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    http_.Get("/health", [](const Request &, Response &res) {
      detail::reply(res, 200, {{"status", "ok"}});
    });

    http_.Post("/datasets", [this](const Request &req, Response &res) {
      upload(req, res);
    });
    http_.Get("/datasets", [this](const Request &, Response &res) {
      json out = json::array();
      for (const auto &r : store_.list())
        out.push_back(to_json(r));
      detail::reply(res, 200, {{"datasets", out}});
    });
    http_.Get(R"(/datasets/([^/]+))", [this](const Request &req, Response &res) {
      const auto r = store_.find(req.matches[1]);
      if (!r)
        return detail::reply_error(res, 404, "unknown dataset " + req.matches[1].str());
      detail::reply(res, 200, to_json(*r));
    });
    http_.Get(R"(/datasets/([^/]+)/preview)",
              [this](const Request &req, Response &res) { preview(req, res); });

    http_.Post("/jobs", [this](const Request &req, Response &res) {
      submit(req, res);
    });
    http_.Get("/jobs", [this](const Request &, Response &res) {
      json out = json::array();
      for (const auto &j : jobs_.list())
        out.push_back(to_json(j));
      detail::reply(res, 200, {{"jobs", out}});
    });
    http_.Get(R"(/jobs/([^/]+))", [this](const Request &req, Response &res) {
      const auto job = jobs_.find(req.matches[1]);
      if (!job)
        return detail::reply_error(res, 404, "unknown job " + req.matches[1].str());
      detail::reply(res, 200, to_json(*job));
    });
    http_.Get(R"(/jobs/([^/]+)/valmap)",
              [this](const Request &req, Response &res) { valmap(req, res); });
    http_.Get(R"(/jobs/([^/]+)/motifs)",
              [this](const Request &req, Response &res) { motifs(req, res); });
    http_.Post(R"(/jobs/([^/]+)/motifset)",
               [this](const Request &req, Response &res) { motifset(req, res); });
  }

  void upload(const httplib::Request &req, httplib::Response &res) {
    IngestOptions opts;
    const auto format = req.has_param("format") ? req.get_param_value("format")
                                                : std::string("lines");
    if (format == "csv" || format == "delimited") {
      opts.format = InputFormat::Delimited;
    } else if (format != "lines") {
      return detail::reply_error(res, 422, "invalid parameters",
                                 {{"format", "must be lines or csv"}});
    }
    if (req.has_param("column")) {
      const auto c = req.get_param_value("column");
      const bool numeric = !c.empty() && std::all_of(c.begin(), c.end(), [](char ch) {
        return ch >= '0' && ch <= '9';
      });
      if (numeric)
        opts.column = static_cast<std::size_t>(std::stoull(c));
      else
        opts.column = c;
    }
    opts.header = req.has_param("header") && req.get_param_value("header") != "0" &&
                  req.get_param_value("header") != "false";
    opts.interpolate = req.has_param("interpolate") &&
                       req.get_param_value("interpolate") != "0" &&
                       req.get_param_value("interpolate") != "false";
    if (req.has_param("name"))
      opts.name = req.get_param_value("name");
    try {
      const auto series = ingest_series(std::string_view(req.body), opts, "upload");
      const auto r = store_.add(series);
      detail::reply(res, 201, to_json(r));
    } catch (const ParseError &e) {
      json body = {{"error", e.what()}};
      if (e.line() > 0)
        body["line"] = e.line();
      detail::reply(res, 400, body);
    } catch (const ParameterError &e) {
      detail::reply_error(res, 400, e.what());
    }
  }

  void preview(const httplib::Request &req, httplib::Response &res) {
    const std::string id = req.matches[1];
    const auto series = store_.series(id);
    if (!series)
      return detail::reply_error(res, 404, "unknown dataset " + id);
    detail::FieldErrors errors;
    const std::size_t n = series->size();
    const auto from = detail::query_integer(req, "from", errors).value_or(0);
    const auto to = detail::query_integer(req, "to", errors).value_or(n);
    const auto buckets = detail::query_integer(req, "buckets", errors).value_or(1000);
    if (errors.empty()) {
      if (to > n)
        errors["to"] = "must not exceed dataset length " + std::to_string(n);
      if (from >= to)
        errors["from"] = "must be smaller than to";
      if (buckets < 1)
        errors["buckets"] = "must be >= 1";
    }
    if (!errors.empty())
      return detail::reply_error(res, 422, "invalid parameters", errors);

    const auto v = series->values();
    const auto edges = detail::preview_buckets(from, to, buckets);
    json offsets = json::array(), mins = json::array(), maxs = json::array();
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      const auto [lo, hi] =
          std::minmax_element(v.begin() + static_cast<std::ptrdiff_t>(edges[b]),
                              v.begin() + static_cast<std::ptrdiff_t>(edges[b + 1]));
      offsets.push_back(edges[b]);
      mins.push_back(*lo);
      maxs.push_back(*hi);
    }
    detail::reply(res, 200,
                  {{"dataset_id", id},
                   {"from", from},
                   {"to", to},
                   {"offsets", std::move(offsets)},
                   {"min", std::move(mins)},
                   {"max", std::move(maxs)}});
  }

  void submit(const httplib::Request &req, httplib::Response &res) {
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object())
      return detail::reply_error(res, 400, "body must be a JSON object");

    detail::FieldErrors errors;
    JobParams params;
    if (!body.contains("dataset_id") || !body.at("dataset_id").is_string())
      errors["dataset_id"] = "required string";
    else
      params.dataset_id = body.at("dataset_id").get<std::string>();
    const auto lmin = detail::integer_field(body, "lmin", errors);
    const auto lmax = detail::integer_field(body, "lmax", errors);
    const auto k = detail::integer_field(body, "k", errors);
    const auto p = detail::integer_field(body, "p", errors);
    params.exclusion = detail::integer_field(body, "exclusion", errors);
    if (!lmin && !errors.count("lmin"))
      errors["lmin"] = "required";
    if (!lmax && !errors.count("lmax"))
      errors["lmax"] = "required";
    params.lmin = lmin.value_or(0);
    params.lmax = lmax.value_or(0);
    params.k = k.value_or(1);
    params.p = p.value_or(50);

    if (lmin && *lmin < 2)
      errors["lmin"] = "must be >= 2";
    if (lmin && lmax && *lmin > *lmax)
      errors["lmin"] = "must not exceed lmax (" + std::to_string(*lmax) + ")";
    if (!errors.count("k") && params.k < 1)
      errors["k"] = "must be >= 1";
    if (!errors.count("p") && !errors.count("k") && params.k > params.p)
      errors["p"] = "must be >= k (" + std::to_string(params.k) + ")";
    if (params.exclusion && *params.exclusion < 1)
      errors["exclusion"] = "must be >= 1";

    std::optional<DatasetRecord> dataset;
    if (!errors.count("dataset_id")) {
      dataset = store_.find(params.dataset_id);
      if (!dataset)
        return detail::reply_error(res, 404, "unknown dataset " + params.dataset_id);
      if (lmax && 2 * *lmax > dataset->length && !errors.count("lmax"))
        errors["lmax"] = "2*lmax must not exceed the dataset length (" +
                         std::to_string(dataset->length) + ")";
    }
    if (!errors.empty())
      return detail::reply_error(res, 422, "invalid parameters", errors);

    const auto id = jobs_.submit(std::move(params));
    detail::reply(res, 202, {{"job_id", id}});
  }

  /// The finished job or an error response.
  std::optional<Job> finished(const httplib::Request &req, httplib::Response &res) {
    const std::string id = req.matches[1];
    auto job = jobs_.find(id);
    if (!job) {
      detail::reply_error(res, 404, "unknown job " + id);
      return std::nullopt;
    }
    if (job->state != JobState::Done) {
      detail::reply_error(res, 409, std::string("job is ") + to_string(job->state));
      return std::nullopt;
    }
    return job;
  }

  void valmap(const httplib::Request &req, httplib::Response &res) {
    const auto job = finished(req, res);
    if (!job)
      return;
    const auto &vm = job->result->valmap;
    detail::FieldErrors errors;
    const auto length = detail::query_integer(req, "length", errors).value_or(vm.lmax);
    if (errors.empty() && (length < vm.lmin || length > vm.lmax))
      errors["length"] = "must lie in [" + std::to_string(vm.lmin) + ", " +
                         std::to_string(vm.lmax) + "]";
    if (!errors.empty())
      return detail::reply_error(res, 422, "invalid parameters", errors);
    auto body = to_json(valmap_at(vm, length), vm.lmin, vm.lmax);
    body["job_id"] = job->id;
    detail::reply(res, 200, body);
  }

  void motifs(const httplib::Request &req, httplib::Response &res) {
    const auto job = finished(req, res);
    if (!job)
      return;
    const auto &result = *job->result;
    detail::FieldErrors errors;
    const auto length = detail::query_integer(req, "length", errors);
    if (errors.empty() && length &&
        (*length < job->params.lmin || *length > job->params.lmax))
      errors["length"] = "must lie in [" + std::to_string(job->params.lmin) +
                         ", " + std::to_string(job->params.lmax) + "]";
    if (!errors.empty())
      return detail::reply_error(res, 422, "invalid parameters", errors);

    struct Ranked {
      MotifPair pair;
      std::size_t rank;
    };
    std::vector<Ranked> ranked;
    for (const auto &r : result.lengths) {
      if (length && r.length != *length)
        continue;
      for (std::size_t t = 0; t < r.topk.size(); ++t)
        ranked.push_back({r.topk[t], t + 1});
    }
    if (!length)
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
        if (a.pair.normalized != b.pair.normalized)
          return a.pair.normalized < b.pair.normalized;
        if (a.pair.length != b.pair.length)
          return a.pair.length < b.pair.length;
        return a.rank < b.rank;
      });
    json pairs = json::array();
    for (const auto &r : ranked) {
      auto j = valmod::to_json(r.pair);
      j["rank"] = r.rank;
      pairs.push_back(std::move(j));
    }
    json body = {{"job_id", job->id}, {"pairs", std::move(pairs)}};
    body["length"] = length ? json(*length) : json(nullptr);
    detail::reply(res, 200, body);
  }

  void motifset(const httplib::Request &req, httplib::Response &res) {
    const std::string id = req.matches[1];
    const auto job = jobs_.find(id);
    if (!job)
      return detail::reply_error(res, 404, "unknown job " + id);
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object())
      return detail::reply_error(res, 400, "body must be a JSON object");

    detail::FieldErrors errors;
    const auto length = detail::integer_field(body, "length", errors);
    const auto left = detail::integer_field(body, "left", errors);
    const auto right = detail::integer_field(body, "right", errors);
    for (const char *key : {"length", "left", "right"})
      if (!body.contains(key) && !errors.count(key))
        errors[key] = "required";
    double factor = kDefaultRadiusFactor;
    if (body.contains("radius_factor") && !body.at("radius_factor").is_null()) {
      const auto &f = body.at("radius_factor");
      if (!f.is_number() || !(f.get<double>() > 0.0) ||
          !std::isfinite(f.get<double>()))
        errors["radius_factor"] = "must be a positive number";
      else
        factor = f.get<double>();
    }
    const auto series = store_.series(job->params.dataset_id);
    if (!series)
      return detail::reply_error(res, 404, "unknown dataset " + job->params.dataset_id);
    const std::size_t n = series->size();
    if (errors.empty()) {
      if (*length < 2 || *length > n / 2)
        errors["length"] = "must lie in [2, " + std::to_string(n / 2) + "]";
      else if (*left + *length > n)
        errors["left"] = "window runs past the end of the series";
      else if (*right + *length > n)
        errors["right"] = "window runs past the end of the series";
      else if (*left == *right)
        errors["right"] = "must differ from left";
    }
    if (!errors.empty())
      return detail::reply_error(res, 422, "invalid parameters", errors);

    const auto wl = series->window(*left, *length);
    const auto wr = series->window(*right, *length);
    if (valmod::detail::all_equal(wl) || valmod::detail::all_equal(wr))
      return detail::reply_error(res, 422, "invalid parameters",
                                 {{"left", "pair includes a constant window"}});
    const double d = znorm_distance(wl, wr);
    MotifSetOptions opts;
    opts.exclusion.radius = job->params.exclusion;
    try {
      const auto set =
          expand(*series, MotifPair::make(*left, *right, *length, d), factor, opts);
      auto out = valmod::to_json(set);
      out["job_id"] = job->id;
      detail::reply(res, 200, out);
    } catch (const ParameterError &e) {
      detail::reply_error(res, 422, e.what());
    }
  }

  ServiceConfig cfg_;
  DatasetStore store_;
  JobQueue jobs_;
  httplib::Server http_;
  int port_ = 0;
};

} // namespace valmod::service
