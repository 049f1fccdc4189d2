#pragma once

// Raw sensor log ingestion: CSV parsing, gridding onto a fixed interval,
// median despiking and short-gap interpolation.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "lidd/core.hpp"

namespace lidd {

using Instant = std::chrono::sys_seconds;

struct RawRecord {
  Instant timestamp;
  std::string system_id;
  std::string sensor_id;
  double value = 0.0;

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

/// One system's regularly gridded multivariate series. mask(t, i) is 1 where
/// values(t, i) was observed (or interpolated); masked cells carry 0.
struct SensorFrame {
  std::string system_id;
  std::vector<std::string> sensor_ids;
  std::vector<Instant> grid;
  Matrix<double> values;
  BoolMatrix mask;

  std::size_t samples() const noexcept { return grid.size(); }
  std::size_t sensors() const noexcept { return sensor_ids.size(); }

  friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

enum class Aggregator { median, mean };

struct IngestConfig {
  std::chrono::seconds resample_interval{3600};
  Aggregator aggregator = Aggregator::median;
  int despike_window = 5;
  int max_gap_fill = 6;
  double min_coverage = 0.5;

  void validate() const {
    if (resample_interval.count() <= 0)
      throw ConfigError("resample_interval", "must be a positive duration");
    if (despike_window < 3 || despike_window % 2 == 0)
      throw ConfigError("despike_window", "must be an odd integer >= 3");
    if (max_gap_fill < 0) throw ConfigError("max_gap_fill", "must be >= 0");
    if (!(min_coverage >= 0.0 && min_coverage <= 1.0))
      throw ConfigError("min_coverage", "must lie in [0, 1]");
  }
};

enum class CsvFormat { long_csv, wide_csv };

struct ParseResult {
  std::vector<RawRecord> records;
  std::size_t skipped = 0;  // malformed or non-finite rows/cells
  std::size_t missing = 0;  // empty value fields
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return parse_int(s.substr(pos, len), out);
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline void add_warning(ParseResult& r, std::string msg) {
  constexpr std::size_t kMaxStoredWarnings = 20;
  if (r.warnings.size() < kMaxStoredWarnings) r.warnings.push_back(std::move(msg));
}

}  // namespace detail

/// Parses an RFC 3339 timestamp (`T` or space separator, optional
/// fractional seconds, `Z` or `+hh:mm` offset). A missing offset means
/// UTC. Fractional seconds are truncated toward the earlier second.
inline std::optional<Instant> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d, h, mi, se;
  if (s.size() < 19) return std::nullopt;
  if (!detail::parse_fixed(s, 0, 4, y) || s[4] != '-' || !detail::parse_fixed(s, 5, 2, mo) ||
      s[7] != '-' || !detail::parse_fixed(s, 8, 2, d) || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      !detail::parse_fixed(s, 11, 2, h) || s[13] != ':' || !detail::parse_fixed(s, 14, 2, mi) ||
      s[16] != ':' || !detail::parse_fixed(s, 17, 2, se))
    return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t digits = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == digits) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    const char z = s[pos];
    if (z == 'Z' || z == 'z') {
      ++pos;
    } else if (z == '+' || z == '-') {
      int oh, om;
      if (!detail::parse_fixed(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
          !detail::parse_fixed(s, pos + 4, 2, om) || oh > 23 || om > 59)
        return std::nullopt;
      offset = (z == '+' ? 1 : -1) * (oh * 3600 + om * 60);
      pos += 6;
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  const auto secs = sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{se} -
                    seconds{offset};
  return Instant{duration_cast<seconds>(secs)};
}

inline std::string format_timestamp(Instant t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count());
}

/// Accepts "3600", "3600s", "30m", "30min", "1h", "2d".
inline std::chrono::seconds parse_duration(std::string_view s) {
  s = detail::trim(s);
  std::size_t digits = 0;
  while (digits < s.size() && s[digits] >= '0' && s[digits] <= '9') ++digits;
  std::int64_t n = 0;
  if (!detail::parse_int(s.substr(0, digits), n))
    throw ConfigError("resample", "cannot parse duration '" + std::string(s) + "'");
  const auto unit = s.substr(digits);
  std::int64_t scale = 0;
  if (unit.empty() || unit == "s") scale = 1;
  else if (unit == "m" || unit == "min") scale = 60;
  else if (unit == "h") scale = 3600;
  else if (unit == "d") scale = 86400;
  else throw ConfigError("resample", "unknown duration unit '" + std::string(unit) + "'");
  if (n <= 0) throw ConfigError("resample", "duration must be positive");
  return std::chrono::seconds{n * scale};
}

/// Shortest decimal text that parses back to the identical binary64.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Reads sensor records from CSV text. Long format requires the columns
/// timestamp, system, sensor, value (any order). Wide format has a leading
/// timestamp column followed by one column per sensor and is attributed to
/// `system_id`. Rows that fail to parse, and non-finite values, are
/// skipped and counted; empty value fields count as missing.
inline ParseResult parse_records(std::istream& in, CsvFormat format, std::string_view system_id = {}) {
  if (!in) throw IoError("input stream is not readable");
  ParseResult result;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty input: header row missing");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header;
  for (const auto h : detail::split_csv(line)) header.emplace_back(h);

  std::set<std::string> systems_seen;
  std::set<std::string> systems_with_records;
  std::size_t line_no = 1;

  auto reject = [&](std::string_view why) {
    ++result.skipped;
    detail::add_warning(result, "line " + std::to_string(line_no) + ": " + std::string(why));
  };

  if (format == CsvFormat::long_csv) {
    std::size_t col_ts = header.size(), col_sys = header.size(), col_sen = header.size(),
                col_val = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "timestamp") col_ts = i;
      else if (header[i] == "system" || header[i] == "system_id") col_sys = i;
      else if (header[i] == "sensor" || header[i] == "sensor_id") col_sen = i;
      else if (header[i] == "value") col_val = i;
    }
    for (auto [col, name] : {std::pair{col_ts, "timestamp"}, std::pair{col_sys, "system"},
                             std::pair{col_sen, "sensor"}, std::pair{col_val, "value"}})
      if (col == header.size()) throw FormatError(std::string("long CSV header lacks column '") + name + "'");

    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_csv(line);
      if (f.size() != header.size()) {
        reject("expected " + std::to_string(header.size()) + " fields");
        continue;
      }
      if (!f[col_sys].empty()) systems_seen.emplace(f[col_sys]);
      const auto ts = parse_timestamp(f[col_ts]);
      if (!ts || f[col_sys].empty() || f[col_sen].empty()) {
        reject("bad timestamp or empty id");
        continue;
      }
      if (f[col_val].empty()) {
        ++result.missing;
        continue;
      }
      const auto v = parse_double(f[col_val]);
      if (!v || !std::isfinite(*v)) {
        reject("non-finite or unparsable value '" + std::string(f[col_val]) + "'");
        continue;
      }
      systems_with_records.emplace(f[col_sys]);
      result.records.push_back({*ts, std::string(f[col_sys]), std::string(f[col_sen]), *v});
    }
  } else {
    if (header.empty() || header[0] != "timestamp")
      throw FormatError("wide CSV header must start with 'timestamp'");
    if (header.size() < 2) throw FormatError("wide CSV header has no sensor columns");
    if (system_id.empty()) throw FormatError("wide CSV requires a system id");
    systems_seen.emplace(system_id);
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_csv(line);
      if (f.size() != header.size()) {
        reject("expected " + std::to_string(header.size()) + " fields");
        continue;
      }
      const auto ts = parse_timestamp(f[0]);
      if (!ts) {
        reject("bad timestamp '" + std::string(f[0]) + "'");
        continue;
      }
      for (std::size_t c = 1; c < f.size(); ++c) {
        if (f[c].empty()) {
          ++result.missing;
          continue;
        }
        const auto v = parse_double(f[c]);
        if (!v || !std::isfinite(*v)) {
          reject("non-finite or unparsable value '" + std::string(f[c]) + "'");
          continue;
        }
        systems_with_records.emplace(system_id);
        result.records.push_back({*ts, std::string(system_id), header[c], *v});
      }
    }
  }
  if (in.bad()) throw IoError("read error while parsing CSV");
  for (const auto& s : systems_seen)
    if (!systems_with_records.contains(s))
      result.warnings.push_back("system " + s + " omitted: no valid records");
  return result;
}

/// Parses one file. For wide CSV the system id is the file stem.
inline ParseResult parse_records_file(const std::filesystem::path& path, CsvFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_records(in, format, format == CsvFormat::wide_csv ? path.stem().string() : "");
}

namespace detail {

// Median of a scratch buffer (reordered). Even counts average the two middles.
inline double median_inplace(std::span<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

}  // namespace detail

/// Grids raw records onto cfg.resample_interval. One frame per system in
/// ascending system_id order; every frame carries the sorted union of
/// sensors seen across all systems. Grid cells are epoch-aligned bins
/// [t, t + interval) between the floored first and last timestamps.
inline std::vector<SensorFrame> build_frames(std::span<const RawRecord> records, const IngestConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw ContractViolation("build_frames: no records");
  const std::int64_t step = cfg.resample_interval.count();

  std::set<std::string> sensor_set;
  std::map<std::string, std::vector<const RawRecord*>> by_system;
  for (const auto& r : records) {
    sensor_set.insert(r.sensor_id);
    by_system[r.system_id].push_back(&r);
  }
  const std::vector<std::string> sensors(sensor_set.begin(), sensor_set.end());
  std::unordered_map<std::string_view, std::size_t> sensor_index;
  for (std::size_t i = 0; i < sensors.size(); ++i) sensor_index.emplace(sensors[i], i);

  std::vector<SensorFrame> frames;
  frames.reserve(by_system.size());
  std::vector<std::pair<std::uint64_t, double>> keyed;
  std::vector<double> scratch;
  for (const auto& [system, recs] : by_system) {
    std::int64_t lo = recs.front()->timestamp.time_since_epoch().count();
    std::int64_t hi = lo;
    for (const auto* r : recs) {
      const auto t = r->timestamp.time_since_epoch().count();
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    const std::int64_t first_bin = detail::floor_div(lo, step);
    const std::int64_t last_bin = detail::floor_div(hi, step);
    const auto cells = static_cast<std::size_t>(last_bin - first_bin + 1);

    SensorFrame frame;
    frame.system_id = system;
    frame.sensor_ids = sensors;
    frame.grid.reserve(cells);
    for (std::size_t t = 0; t < cells; ++t)
      frame.grid.emplace_back(std::chrono::seconds{(first_bin + static_cast<std::int64_t>(t)) * step});
    frame.values = Matrix<double>(cells, sensors.size(), 0.0);
    frame.mask = BoolMatrix(cells, sensors.size(), 0);

    keyed.clear();
    keyed.reserve(recs.size());
    for (const auto* r : recs) {
      const auto cell = static_cast<std::uint64_t>(
          detail::floor_div(r->timestamp.time_since_epoch().count(), step) - first_bin);
      keyed.emplace_back(cell * sensors.size() + sensor_index.at(r->sensor_id), r->value);
    }
    // Sorting on (key, value) fixes the summation order for the mean.
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t a = 0; a < keyed.size();) {
      std::size_t b = a;
      while (b < keyed.size() && keyed[b].first == keyed[a].first) ++b;
      double v;
      if (cfg.aggregator == Aggregator::mean) {
        double sum = 0.0;
        for (std::size_t k = a; k < b; ++k) sum += keyed[k].second;
        v = sum / static_cast<double>(b - a);
      } else {
        scratch.clear();
        for (std::size_t k = a; k < b; ++k) scratch.push_back(keyed[k].second);
        v = detail::median_inplace(scratch);
      }
      const std::size_t cell = keyed[a].first / sensors.size();
      const std::size_t col = keyed[a].first % sensors.size();
      frame.values(cell, col) = v;
      frame.mask(cell, col) = 1;
      a = b;
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

/// Centered rolling median over the observed cells of each column. Window
/// positions are grid steps; masked cells inside the window are ignored
/// and the window is truncated at the series edges.
inline SensorFrame despike(const SensorFrame& frame, int window) {
  if (window < 3 || window % 2 == 0) throw ConfigError("despike_window", "must be an odd integer >= 3");
  SensorFrame out = frame;
  const auto half = static_cast<std::size_t>(window / 2);
  const std::size_t n = frame.samples();
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(window));
  for (std::size_t c = 0; c < frame.sensors(); ++c) {
    for (std::size_t t = 0; t < n; ++t) {
      if (!frame.mask(t, c)) continue;
      buf.clear();
      const std::size_t lo = t >= half ? t - half : 0;
      const std::size_t hi = std::min(n - 1, t + half);
      for (std::size_t k = lo; k <= hi; ++k)
        if (frame.mask(k, c)) buf.push_back(frame.values(k, c));
      out.values(t, c) = detail::median_inplace(buf);
    }
  }
  return out;
}

/// Linearly interpolates interior runs of at most `max_gap` masked cells.
inline SensorFrame fill_gaps(const SensorFrame& frame, int max_gap) {
  if (max_gap < 0) throw ConfigError("max_gap_fill", "must be >= 0");
  SensorFrame out = frame;
  const std::size_t n = frame.samples();
  for (std::size_t c = 0; c < frame.sensors(); ++c) {
    std::optional<std::size_t> last_seen;
    for (std::size_t t = 0; t < n; ++t) {
      if (!frame.mask(t, c)) continue;
      if (last_seen && t - *last_seen > 1) {
        const std::size_t gap = t - *last_seen - 1;
        if (gap <= static_cast<std::size_t>(max_gap)) {
          const double a = frame.values(*last_seen, c);
          const double b = frame.values(t, c);
          const auto span = static_cast<double>(t - *last_seen);
          for (std::size_t k = *last_seen + 1; k < t; ++k) {
            out.values(k, c) = a + (b - a) * (static_cast<double>(k - *last_seen) / span);
            out.mask(k, c) = 1;
          }
        }
      }
      last_seen = t;
    }
  }
  return out;
}

struct ColumnCoverage {
  std::string sensor_id;
  double fraction = 0.0;
  bool below_minimum = false;
};

/// Observed fraction per column. Low-coverage columns are flagged, not
/// dropped: correlations over them simply become undefined downstream.
inline std::vector<ColumnCoverage> coverage_check(const SensorFrame& frame, double min_coverage) {
  std::vector<ColumnCoverage> out;
  out.reserve(frame.sensors());
  for (std::size_t c = 0; c < frame.sensors(); ++c) {
    std::size_t seen = 0;
    for (std::size_t t = 0; t < frame.samples(); ++t) seen += frame.mask(t, c);
    const double frac =
        frame.samples() == 0 ? 0.0 : static_cast<double>(seen) / static_cast<double>(frame.samples());
    out.push_back({frame.sensor_ids[c], frac, frac < min_coverage});
  }
  return out;
}

/// Cleaning order is fixed: despike first, then fill short gaps.
inline SensorFrame clean_frame(const SensorFrame& frame, const IngestConfig& cfg) {
  return fill_gaps(despike(frame, cfg.despike_window), cfg.max_gap_fill);
}

/// Writes the observed cells of each frame as long CSV with grid timestamps.
inline void write_long_csv(std::ostream& out, std::span<const SensorFrame> frames) {
  out << "timestamp,system,sensor,value\n";
  for (const auto& f : frames)
    for (std::size_t t = 0; t < f.samples(); ++t) {
      const auto ts = format_timestamp(f.grid[t]);
      for (std::size_t c = 0; c < f.sensors(); ++c)
        if (f.mask(t, c))
          out << ts << ',' << f.system_id << ',' << f.sensor_ids[c] << ',' << format_double(f.values(t, c))
              << '\n';
    }
}

}  // namespace lidd
