#ifndef BGL_INGEST_HPP
#define BGL_INGEST_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bgl/csv.hpp"
#include "bgl/errors.hpp"
#include "bgl/empirical.hpp"
#include "bgl/sample.hpp"
#include "bgl/summation.hpp"

namespace bgl {

inline constexpr double kSentinel = -99999.0;
inline constexpr std::array<int, 4> kTowerHeights = {10, 20, 50, 80};

namespace text {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_exact(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace text

struct Timestamp {
  int year = 0;
  int month = 0;
  int day = 0;
  int hour = 0;
  int minute = 0;

  auto operator<=>(const Timestamp&) const = default;

  [[nodiscard]] std::string to_string() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d", year, month, day, hour, minute);
    return buf;
  }
};

namespace detail {

inline std::optional<std::array<int, 3>> split_ints(std::string_view s, char sep) {
  std::array<int, 3> out{};
  for (int k = 0; k < 3; ++k) {
    const auto pos = k < 2 ? s.find(sep) : s.size();
    if (pos == std::string_view::npos) return std::nullopt;
    const auto v = text::parse_int(s.substr(0, pos));
    if (!v) return std::nullopt;
    out[static_cast<std::size_t>(k)] = static_cast<int>(*v);
    s = k < 2 ? s.substr(pos + 1) : std::string_view{};
  }
  return out;
}

inline bool parse_date(std::string_view s, Timestamp& t) {
  s = text::trim(s);
  if (s.find('/') != std::string_view::npos) {
    const auto parts = split_ints(s, '/');
    if (!parts) return false;
    if ((*parts)[0] > 31) {  // YYYY/MM/DD
      t.year = (*parts)[0], t.month = (*parts)[1], t.day = (*parts)[2];
    } else {  // MM/DD/YYYY
      t.month = (*parts)[0], t.day = (*parts)[1], t.year = (*parts)[2];
    }
  } else {
    const auto parts = split_ints(s, '-');
    if (!parts) return false;
    t.year = (*parts)[0], t.month = (*parts)[1], t.day = (*parts)[2];
  }
  return t.year >= 1 && t.month >= 1 && t.month <= 12 && t.day >= 1 && t.day <= 31;
}

// "HH:MM", "HH:MM:SS" or a bare hour. Hour 24 is accepted since some
// exports label hour-ending records 1..24.
inline bool parse_time(std::string_view s, Timestamp& t) {
  s = text::trim(s);
  const auto colon = s.find(':');
  std::optional<long long> hour, minute = 0;
  if (colon == std::string_view::npos) {
    hour = text::parse_int(s);
  } else {
    hour = text::parse_int(s.substr(0, colon));
    std::string_view rest = s.substr(colon + 1);
    const auto colon2 = rest.find(':');
    minute = text::parse_int(rest.substr(0, colon2));
    if (colon2 != std::string_view::npos) {
      const auto seconds = text::parse_double(rest.substr(colon2 + 1));
      if (!seconds || *seconds < 0.0 || *seconds >= 60.0) return false;
    }
  }
  if (!hour || !minute || *hour < 0 || *hour > 24 || *minute < 0 || *minute > 59) return false;
  t.hour = static_cast<int>(*hour);
  t.minute = static_cast<int>(*minute);
  return true;
}

}  // namespace detail

/// Parses "date" or "date time" (space or 'T' separated).
inline std::optional<Timestamp> parse_timestamp(std::string_view date, std::string_view time = {}) {
  Timestamp t;
  date = text::trim(date);
  if (text::trim(time).empty()) {
    const auto sep = date.find_first_of(" T");
    if (sep != std::string_view::npos) {
      time = date.substr(sep + 1);
      date = date.substr(0, sep);
    }
  }
  if (!detail::parse_date(date, t)) return std::nullopt;
  if (!text::trim(time).empty() && !detail::parse_time(time, t)) return std::nullopt;
  return t;
}

/// Which columns hold the timestamp and the speed at each height.
struct ColumnMapping {
  char delimiter = ',';
  std::string date_column;
  std::string time_column;  // empty when the date column carries the time
  std::map<int, std::string> speed_columns;
  double sentinel = kSentinel;

  /// Column names of the public M2 hourly export.
  static ColumnMapping m2_defaults() {
    ColumnMapping m;
    m.date_column = "DATE (MM/DD/YYYY)";
    m.time_column = "MST";
    for (int h : kTowerHeights) m.speed_columns[h] = "Avg Wind Speed @ " + std::to_string(h) + "m [m/s]";
    return m;
  }
};

/// Flat key=value text; '#' starts a comment. Later keys override earlier.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = text::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw bgl::io_error(source + ":" + std::to_string(number) + ": expected key=value");
    }
    out[std::string(text::trim(view.substr(0, eq)))] = std::string(text::trim(view.substr(eq + 1)));
  }
  return out;
}

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bgl::io_error("cannot open " + path);
  return parse_key_values(in, path);
}

/// Applies mapping keys (delimiter, date_column, time_column,
/// speed_column.<h>, sentinel) and ignores others such as fit.*.
inline void apply_mapping_keys(const std::map<std::string, std::string>& kv, ColumnMapping& m) {
  for (const auto& [key, value] : kv) {
    if (key == "delimiter") {
      if (value == "tab" || value == "\\t") {
        m.delimiter = '\t';
      } else if (value.size() == 1) {
        m.delimiter = value[0];
      } else {
        throw bgl::mapping_error("config: delimiter must be one character or 'tab'");
      }
    } else if (key == "date_column") {
      m.date_column = value;
    } else if (key == "time_column") {
      m.time_column = value;
    } else if (key.rfind("speed_column.", 0) == 0) {
      const auto h = text::parse_int(std::string_view(key).substr(13));
      if (!h || *h <= 0) throw bgl::mapping_error("config: bad height in key " + key);
      m.speed_columns[static_cast<int>(*h)] = value;
    } else if (key == "sentinel") {
      const auto v = text::parse_double(value);
      if (!v) throw bgl::mapping_error("config: sentinel must be a number");
      m.sentinel = *v;
    }
  }
}

struct RawRecord {
  Timestamp timestamp;
  std::map<int, double> speeds_by_height;  // sentinel values kept
  std::size_t line = 0;

  bool operator==(const RawRecord&) const = default;
};

struct MalformedRow {
  std::size_t line;
  std::string reason;
};

struct ParseLog {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::vector<MalformedRow> malformed;
};

struct ParseResult {
  std::vector<RawRecord> records;
  ParseLog log;
};

inline ParseResult parse_csv(std::istream& in, const ColumnMapping& mapping, const std::string& source = "<input>") {
  csv::Reader reader(in, mapping.delimiter);
  std::optional<csv::Row> header;
  while ((header = reader.next()) && header->fields.empty()) {
  }
  ParseResult result;
  if (!header) return result;

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header->fields.size(); ++i) {
    index.emplace(text::lower(text::trim(header->fields[i])), i);
  }
  auto column = [&](const std::string& name) {
    const auto it = index.find(text::lower(text::trim(name)));
    if (it == index.end()) throw bgl::mapping_error(source + ": column '" + name + "' not found in header");
    return it->second;
  };
  if (mapping.date_column.empty()) throw bgl::mapping_error("mapping names no timestamp column");
  if (mapping.speed_columns.empty()) throw bgl::mapping_error("mapping names no speed column");
  const std::size_t date_col = column(mapping.date_column);
  const std::optional<std::size_t> time_col =
      mapping.time_column.empty() ? std::nullopt : std::optional<std::size_t>(column(mapping.time_column));
  std::vector<std::pair<int, std::size_t>> speed_cols;
  for (const auto& [h, name] : mapping.speed_columns) speed_cols.emplace_back(h, column(name));

  while (auto row = reader.next()) {
    if (row->fields.empty() || (row->fields.size() == 1 && text::trim(row->fields[0]).empty())) continue;
    ++result.log.rows_read;
    auto reject = [&](std::string reason) { result.log.malformed.push_back({row->line, std::move(reason)}); };
    auto field = [&](std::size_t i) -> std::optional<std::string_view> {
      if (i >= row->fields.size()) return std::nullopt;
      return std::string_view(row->fields[i]);
    };
    const auto date = field(date_col);
    const auto time = time_col ? field(*time_col) : std::optional<std::string_view>(std::string_view{});
    if (!date || !time) {
      reject("missing timestamp field");
      continue;
    }
    const auto ts = parse_timestamp(*date, *time);
    if (!ts) {
      reject("unparseable timestamp '" + std::string(*date) + (time->empty() ? "" : " " + std::string(*time)) + "'");
      continue;
    }
    RawRecord rec;
    rec.timestamp = *ts;
    rec.line = row->line;
    bool ok = true;
    for (const auto& [h, col] : speed_cols) {
      const auto f = field(col);
      const auto v = f ? text::parse_double(*f) : std::nullopt;
      if (!v || std::isnan(*v)) {
        reject("unparseable speed at " + std::to_string(h) + " m");
        ok = false;
        break;
      }
      rec.speeds_by_height[h] = *v;
    }
    if (!ok) continue;
    result.records.push_back(std::move(rec));
    ++result.log.rows_kept;
  }
  return result;
}

inline ParseResult parse_csv(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bgl::io_error("cannot open " + path);
  return parse_csv(in, mapping, path);
}

struct CleaningLog {
  std::size_t rows_read = 0;
  std::size_t out_of_range = 0;
  std::size_t duplicates_removed = 0;
  std::size_t sentinel_rows_removed = 0;
  std::size_t nonpositive_removed = 0;
  std::size_t missing_height = 0;
  std::size_t rows_kept = 0;

  [[nodiscard]] bool reconciles() const {
    return rows_kept + out_of_range + duplicates_removed + sentinel_rows_removed + nonpositive_removed +
               missing_height ==
           rows_read;
  }
};

struct CleanedRecords {
  std::vector<RawRecord> records;
  CleaningLog log;
};

/// Applies the cleaning rules at one height. Records keep their input order.
inline CleanedRecords clean_records(const std::vector<RawRecord>& records, int height_m, YearRange years,
                                    double sentinel = kSentinel) {
  CleanedRecords out;
  out.log.rows_read = records.size();
  auto speed = [&](const RawRecord& r) -> std::optional<double> {
    const auto it = r.speeds_by_height.find(height_m);
    if (it == r.speeds_by_height.end()) return std::nullopt;
    return it->second;
  };

  // first non-sentinel occurrence of each in-range timestamp
  std::map<Timestamp, std::size_t> chosen;
  std::map<Timestamp, std::size_t> occurrences;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!years.contains(r.timestamp.year)) continue;
    ++occurrences[r.timestamp];
    const auto v = speed(r);
    if (v && *v != sentinel && !chosen.count(r.timestamp)) chosen.emplace(r.timestamp, i);
  }
  for (const auto& [ts, count] : occurrences) {
    out.log.duplicates_removed += count - 1;
    if (!chosen.count(ts)) {
      // every occurrence is sentinel or missing; the survivor is charged below
      chosen.emplace(ts, records.size());
    }
  }

  std::set<Timestamp> charged;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!years.contains(r.timestamp.year)) {
      ++out.log.out_of_range;
      continue;
    }
    const std::size_t keep = chosen.at(r.timestamp);
    if (keep == records.size()) {
      if (charged.insert(r.timestamp).second) {
        if (speed(r)) {
          ++out.log.sentinel_rows_removed;
        } else {
          ++out.log.missing_height;
        }
      }
      continue;
    }
    if (keep != i) continue;
    const double v = *speed(r);
    if (!(v > 0.0) || !std::isfinite(v)) {
      ++out.log.nonpositive_removed;
      continue;
    }
    out.records.push_back(r);
  }
  out.log.rows_kept = out.records.size();
  return out;
}

struct CleanResult {
  Sample sample;
  CleaningLog log;
};

/// Cleaned sample at one height and year range. Throws empty_result_error
/// when nothing survives.
inline CleanResult clean(const std::vector<RawRecord>& records, int height_m, YearRange years,
                         double sentinel = kSentinel) {
  auto cleaned = clean_records(records, height_m, years, sentinel);
  if (cleaned.records.empty()) {
    throw bgl::empty_result_error("empty-result: no observations at " + std::to_string(height_m) + " m for " +
                                  years.to_string());
  }
  std::vector<double> values;
  values.reserve(cleaned.records.size());
  for (const auto& r : cleaned.records) values.push_back(r.speeds_by_height.at(height_m));
  return {Sample(std::move(values), height_m, years), cleaned.log};
}

struct Descriptive {
  std::size_t n;
  double min;
  double max;
  double median;
  double mean;
  double variance;  // 1/(n-1)
  double skewness;  // m3 / m2^{3/2}, 1/n moments
  double kurtosis;  // m4 / m2^2, 1/n moments
  double p95;
  double p99;
};

inline Descriptive describe(const Sample& sample, QuantileRule rule = QuantileRule::interpolated) {
  const std::size_t n = sample.n();
  if (n < 2) throw bgl::domain_error("describe: need at least two observations");
  const std::vector<double> xs = sample.sorted();
  CompensatedSum s;
  for (double x : xs) s += x;
  const double dn = static_cast<double>(n);
  const double mean = s.value() / dn;
  CompensatedSum s2, s3, s4;
  for (double x : xs) {
    const double d = x - mean;
    const double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  const double m2 = s2.value() / dn;
  if (!(m2 > 0.0)) throw bgl::degenerate_error("describe: zero variance, skewness and kurtosis undefined");
  Descriptive d{};
  d.n = n;
  d.min = xs.front();
  d.max = xs.back();
  d.median = empirical_quantile(xs, 0.5, rule);
  d.mean = mean;
  d.variance = s2.value() / (dn - 1.0);
  d.skewness = (s3.value() / dn) / std::pow(m2, 1.5);
  d.kurtosis = (s4.value() / dn) / (m2 * m2);
  d.p95 = empirical_quantile(xs, 0.95, rule);
  d.p99 = empirical_quantile(xs, 0.99, rule);
  return d;
}

/// Single-column values: one number per line; blank lines and '#' comments
/// are skipped.
inline Sample read_values(std::istream& in, const std::string& source = "<input>") {
  std::vector<double> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto view = text::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto v = text::parse_double(view);
    if (!v || !(*v > 0.0) || !std::isfinite(*v)) {
      throw bgl::io_error(source + ":" + std::to_string(number) + ": expected a positive number, got '" +
                          std::string(view) + "'");
    }
    values.push_back(*v);
  }
  if (values.empty()) throw bgl::empty_result_error("empty-result: no values in " + source);
  return Sample(std::move(values));
}

inline Sample read_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bgl::io_error("cannot open " + path);
  return read_values(in, path);
}

inline void write_values(std::ostream& out, const Sample& sample) {
  for (double x : sample.values()) out << text::format_exact(x) << '\n';
}

inline void write_values(const std::string& path, const Sample& sample) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bgl::io_error("cannot write " + path);
  write_values(out, sample);
  if (!out) throw bgl::io_error("write failed for " + path);
}

}  // namespace bgl

#endif
