#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include "valmod/detail/numeric.hpp"
#include "valmod/errors.hpp"

namespace valmod {

/// An immutable, all-finite data series.
class SeriesRecord {
public:
  SeriesRecord() = default;

  explicit SeriesRecord(std::vector<double> values, std::string name = {},
                        std::string source = {}, std::size_t rows_read = 0)
      : values_(std::move(values)), name_(std::move(name)),
        source_(std::move(source)),
        rows_read_(rows_read ? rows_read : values_.size()) {
    if (values_.size() < 2)
      throw ParameterError("series needs at least 2 values, got " +
                           std::to_string(values_.size()));
    for (std::size_t t = 0; t < values_.size(); ++t)
      if (!std::isfinite(values_[t]))
        throw ParameterError("series value at offset " + std::to_string(t) +
                             " is not finite");
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t t) const noexcept { return values_[t]; }
  const std::string &name() const noexcept { return name_; }
  const std::string &source() const noexcept { return source_; }
  std::size_t rows_read() const noexcept { return rows_read_; }

  std::span<const double> window(std::size_t offset,
                                 std::size_t length) const {
    return std::span<const double>(values_).subspan(offset, length);
  }

private:
  std::vector<double> values_;
  std::string name_;
  std::string source_;
  std::size_t rows_read_ = 0;
};

/// D_{offset,length}: the contiguous window of `length` points at `offset`.
struct SubsequenceRef {
  std::size_t offset = 0;
  std::size_t length = 0;

  bool valid_for(std::size_t series_size) const noexcept {
    return length >= 1 && offset + length <= series_size;
  }
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

enum class InputFormat { PlainLines, Delimited };

struct IngestOptions {
  InputFormat format = InputFormat::PlainLines;
  char delimiter = ',';
  /// Column selector for delimited input: a header name or a 0-based index.
  std::variant<std::monostate, std::size_t, std::string> column;
  /// Skip the first row. Forced on when the column is selected by name.
  bool header = false;
  /// Replace NaN/Inf by linear interpolation instead of rejecting them.
  bool interpolate = false;
  std::string name;
};

namespace detail {

inline std::string_view trim(std::string_view s) noexcept {
  const auto ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline double parse_number(std::string_view token, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+')
    token.remove_prefix(1);
  double v = 0.0;
  const auto *first = token.data();
  const auto *last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (token.empty() || ec == std::errc::invalid_argument || ptr != last)
    throw ParseError("not a number: '" + std::string(token) + "'", line);
  if (ec == std::errc::result_out_of_range)
    v = std::signbit(v) ? -detail::kInf : detail::kInf;
  return v;
}

/// Fills non-finite runs by linear interpolation between finite neighbours;
/// leading and trailing runs copy the nearest finite value.
inline void interpolate_gaps(std::vector<double> &v) {
  std::size_t t = 0;
  std::ptrdiff_t last_finite = -1;
  while (t < v.size()) {
    if (std::isfinite(v[t])) {
      last_finite = static_cast<std::ptrdiff_t>(t);
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < v.size() && !std::isfinite(v[end]))
      ++end;
    if (last_finite < 0 && end == v.size())
      throw ParameterError("series has no finite values to interpolate from");
    for (std::size_t u = t; u < end; ++u) {
      if (last_finite < 0)
        v[u] = v[end];
      else if (end == v.size())
        v[u] = v[static_cast<std::size_t>(last_finite)];
      else {
        const double a = v[static_cast<std::size_t>(last_finite)];
        const double b = v[end];
        const double frac = static_cast<double>(u - last_finite) /
                            static_cast<double>(end - last_finite);
        v[u] = a + (b - a) * frac;
      }
    }
    t = end;
  }
}

} // namespace detail

/// Reads a series from a text stream in plain-lines or delimited format.
/// Blank lines are skipped; line numbers in errors are physical lines.
inline SeriesRecord ingest_series(std::istream &in, const IngestOptions &opts,
                                  std::string source = {}) {
  std::vector<double> values;
  std::vector<std::size_t> lines;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  std::size_t column_index = 0;
  const bool by_name = std::holds_alternative<std::string>(opts.column);
  const bool skip_header = opts.header || by_name;
  bool header_seen = false;

  if (opts.format == InputFormat::Delimited) {
    if (std::holds_alternative<std::monostate>(opts.column))
      throw ParameterError("delimited input requires a column selector");
    if (!by_name)
      column_index = std::get<std::size_t>(opts.column);
  }

  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty())
      continue;
    if (opts.format == InputFormat::PlainLines) {
      values.push_back(detail::parse_number(line, line_no));
      lines.push_back(line_no);
      ++rows;
      continue;
    }
    const auto fields = detail::split(line, opts.delimiter);
    if (skip_header && !header_seen) {
      header_seen = true;
      if (by_name) {
        const auto &wanted = std::get<std::string>(opts.column);
        auto it = std::find_if(fields.begin(), fields.end(), [&](auto f) {
          return detail::trim(f) == wanted;
        });
        if (it == fields.end())
          throw ParseError("column '" + wanted + "' not found in header",
                           line_no);
        column_index = static_cast<std::size_t>(it - fields.begin());
      }
      continue;
    }
    if (column_index >= fields.size())
      throw ParseError("row has " + std::to_string(fields.size()) +
                           " fields, column " + std::to_string(column_index) +
                           " requested",
                       line_no);
    values.push_back(detail::parse_number(fields[column_index], line_no));
    lines.push_back(line_no);
    ++rows;
  }

  for (std::size_t t = 0; t < values.size(); ++t) {
    if (!std::isfinite(values[t]) && !opts.interpolate)
      throw ParseError("non-finite value (enable interpolation to repair)",
                       lines[t]);
  }
  if (opts.interpolate)
    detail::interpolate_gaps(values);
  if (values.size() < 2)
    throw ParseError("series needs at least 2 values, found " +
                         std::to_string(values.size()),
                     line_no);
  return SeriesRecord(std::move(values), opts.name, std::move(source), rows);
}

inline SeriesRecord ingest_series(std::string_view text,
                                  const IngestOptions &opts,
                                  std::string source = {}) {
  std::istringstream in{std::string(text)};
  return ingest_series(in, opts, std::move(source));
}

inline SeriesRecord read_series_file(const std::string &path,
                                     IngestOptions opts) {
  std::ifstream in(path);
  if (!in)
    throw ParameterError("cannot open input file: " + path);
  if (opts.name.empty())
    opts.name = path;
  return ingest_series(in, opts, path);
}

/// Plain-lines serialization; round-trips exactly through ingest_series.
inline void write_series(std::ostream &out, std::span<const double> values) {
  for (double v : values)
    out << detail::format_double(v) << '\n';
}

// ---------------------------------------------------------------------------
// Rolling statistics
// ---------------------------------------------------------------------------

/// Per-offset mean and population standard deviation for one window length.
struct RollingStats {
  std::size_t window = 0;
  std::vector<double> mean;
  std::vector<double> stddev;
  /// 1 where the window is constant (stddev exactly 0).
  std::vector<std::uint8_t> degenerate;

  std::size_t size() const noexcept { return mean.size(); }
};

namespace detail {

/// Compensated prefix sums of (x - shift) and (x - shift)^2.
struct PrefixSums {
  double shift = 0.0;
  std::vector<double> s_hi, s_lo, q_hi, q_lo;
  /// run[t]: number of consecutive values equal to x[t] starting at t.
  std::vector<std::size_t> run;

  explicit PrefixSums(std::span<const double> x) {
    const std::size_t n = x.size();
    double m = 0.0;
    for (double v : x)
      m += v;
    shift = n ? m / static_cast<double>(n) : 0.0;
    s_hi.assign(n + 1, 0.0);
    s_lo.assign(n + 1, 0.0);
    q_hi.assign(n + 1, 0.0);
    q_lo.assign(n + 1, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double y = x[t] - shift;
      double s, e;
      two_sum(s_hi[t], y, s, e);
      s_hi[t + 1] = s;
      s_lo[t + 1] = s_lo[t] + e;
      two_sum(q_hi[t], y * y, s, e);
      q_hi[t + 1] = s;
      q_lo[t + 1] = q_lo[t] + e;
    }
    run.assign(n, 1);
    for (std::size_t t = n; t-- > 1;)
      if (x[t - 1] == x[t])
        run[t - 1] = run[t] + 1;
  }

  RollingStats stats(std::span<const double> x, std::size_t len) const {
    const std::size_t count = x.size() - len + 1;
    RollingStats rs;
    rs.window = len;
    rs.mean.resize(count);
    rs.stddev.resize(count);
    rs.degenerate.assign(count, 0);
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t i = 0; i < count; ++i) {
      const double s = (s_hi[i + len] - s_hi[i]) + (s_lo[i + len] - s_lo[i]);
      const double q = (q_hi[i + len] - q_hi[i]) + (q_lo[i + len] - q_lo[i]);
      const double mu = s * inv;
      rs.mean[i] = mu + shift;
      if (run[i] >= len) {
        rs.mean[i] = x[i];
        rs.stddev[i] = 0.0;
        rs.degenerate[i] = 1;
        continue;
      }
      const double var = q * inv - mu * mu;
      if (var > 0.0) {
        rs.stddev[i] = std::sqrt(var);
      } else {
        double m, sd;
        window_moments(x.subspan(i, len), m, sd);
        rs.stddev[i] = sd;
      }
    }
    return rs;
  }
};

} // namespace detail

/// Rolling mean/std for every window of length `len`, in O(|x|).
inline RollingStats rolling_stats(std::span<const double> x, std::size_t len) {
  if (len < 2 || len > x.size())
    throw ParameterError("window length " + std::to_string(len) +
                         " outside [2, " + std::to_string(x.size()) + "]");
  return detail::PrefixSums(x).stats(x, len);
}

inline RollingStats rolling_stats(const SeriesRecord &series, std::size_t len) {
  return rolling_stats(series.values(), len);
}

/// Z-normalized copy of one window; constant windows map to all zeros.
inline std::vector<double> znorm(const SeriesRecord &series,
                                 SubsequenceRef sub) {
  if (!sub.valid_for(series.size()))
    throw ParameterError("subsequence out of range");
  const auto w = series.window(sub.offset, sub.length);
  double mean, sd;
  detail::window_moments(w, mean, sd);
  std::vector<double> out(w.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t t = 0; t < w.size(); ++t)
      out[t] = (w[t] - mean) / sd;
  return out;
}

} // namespace valmod
