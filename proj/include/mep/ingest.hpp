#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mep/calendar.hpp"
#include "mep/error.hpp"

namespace mep {

/// Cleaned, equally spaced observations. Time is the integer position in
/// `values()`; dates are carried for labeling only.
class TimeSeries {
 public:
  TimeSeries(std::string name, std::vector<Date> dates, std::vector<double> values)
      : name_(std::move(name)), dates_(std::move(dates)), values_(std::move(values)) {
    if (dates_.size() != values_.size())
      throw PreconditionError("time series: dates and values differ in length");
    if (values_.size() < 2) throw PreconditionError("time series: need at least 2 observations");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw PreconditionError("time series: non-finite value at " + format_date(dates_[i]));
      if (i > 0 && !(dates_[i - 1] < dates_[i]))
        throw PreconditionError("time series: dates not strictly increasing at " + format_date(dates_[i]));
    }
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::string name_;
  std::vector<Date> dates_;
  std::vector<double> values_;
};

/// A row whose value could not be read; kept so callers can report it.
struct MissingValue {
  std::size_t line;
  Date date;
  std::string raw;
  friend bool operator==(const MissingValue&, const MissingValue&) = default;
};

/// Loaded but not yet cleaned: values may be absent.
struct RawSeries {
  std::string name;
  std::vector<Date> dates;
  std::vector<std::optional<double>> values;
  std::vector<MissingValue> missing;
  friend bool operator==(const RawSeries&, const RawSeries&) = default;
};

enum class GapPolicy { ForwardFill, Drop, Error };

inline std::string to_string(GapPolicy p) {
  switch (p) {
    case GapPolicy::ForwardFill: return "ffill";
    case GapPolicy::Drop: return "drop";
    case GapPolicy::Error: return "error";
  }
  return "?";
}

inline GapPolicy parse_gap_policy(std::string_view s) {
  if (s == "ffill") return GapPolicy::ForwardFill;
  if (s == "drop") return GapPolicy::Drop;
  if (s == "error") return GapPolicy::Error;
  throw PreconditionError("unknown gap policy '" + std::string(s) + "' (expected ffill|drop|error)");
}

struct CsvOptions {
  std::string date_col = "date";
  std::string value_col = "value";
  std::string date_format = kIsoDateFormat;
  GapPolicy gap_policy = GapPolicy::ForwardFill;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Comma-separated fields; double quotes group a field and "" is a literal quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a headed CSV with one date column and one value column. Rows come
/// back sorted by date whatever their order in the file. Values that do not
/// parse become missing entries (and are listed in `missing`), except under
/// GapPolicy::Error where they raise ParseError for that line.
inline RawSeries load_csv(const std::filesystem::path& path, const CsvOptions& opts = {}) {
  if (!std::filesystem::is_regular_file(path)) throw FileNotFound("no such file: " + path.string());
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(1, "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t date_idx = column(opts.date_col);
  const std::size_t value_idx = column(opts.value_col);

  struct Row {
    Date date;
    std::optional<double> value;
    std::size_t line;
    std::string raw;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() <= std::max(date_idx, value_idx))
      throw ParseError(lineno, "expected at least " + std::to_string(std::max(date_idx, value_idx) + 1) + " fields");
    const auto date = parse_date(fields[date_idx], opts.date_format);
    if (!date) throw ParseError(lineno, "unparseable date '" + fields[date_idx] + "' for format '" + opts.date_format + "'");
    const auto value = detail::parse_double(fields[value_idx]);
    if (!value && opts.gap_policy == GapPolicy::Error)
      throw ParseError(lineno, "unparseable value '" + fields[value_idx] + "'");
    rows.push_back({*date, value, lineno, fields[value_idx]});
  }

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].date == rows[i - 1].date)
      throw ParseError(rows[i].line, "duplicate date " + format_date(rows[i].date));
  const bool any_valid = std::any_of(rows.begin(), rows.end(), [](const Row& r) { return r.value.has_value(); });
  if (!any_valid) throw EmptySeries("no valid rows in " + path.string());

  RawSeries out;
  out.name = path.stem().string();
  for (const auto& r : rows) {
    out.dates.push_back(r.date);
    out.values.push_back(r.value);
    if (!r.value) out.missing.push_back({r.line, r.date, r.raw});
  }
  return out;
}

/// Fills or removes gaps. A gap is a row with a missing value or a weekday
/// absent between the first and last observation.
///   ForwardFill: the gap takes the previous value (a leading gap raises GapError).
///   Drop: gaps are removed.
///   Error: any gap raises GapError.
inline TimeSeries clean(const RawSeries& raw, GapPolicy policy) {
  if (raw.dates.size() != raw.values.size()) throw PreconditionError("raw series: dates and values differ in length");
  if (raw.dates.empty()) throw EmptySeries("series '" + raw.name + "' is empty");

  std::vector<Date> dates;
  std::vector<double> values;
  std::optional<double> last;
  auto gap = [&](Date d) {
    switch (policy) {
      case GapPolicy::Error:
        throw GapError("gap at " + format_date(d));
      case GapPolicy::ForwardFill:
        if (!last) throw GapError("leading gap at " + format_date(d) + ": nothing to fill from");
        dates.push_back(d);
        values.push_back(*last);
        break;
      case GapPolicy::Drop:
        break;
    }
  };

  for (std::size_t i = 0; i < raw.dates.size(); ++i) {
    if (i > 0) {
      for (Date d = next_business_day(raw.dates[i - 1]); d < raw.dates[i]; d = next_business_day(d)) gap(d);
    }
    if (raw.values[i]) {
      dates.push_back(raw.dates[i]);
      values.push_back(*raw.values[i]);
      last = raw.values[i];
    } else {
      gap(raw.dates[i]);
    }
  }
  if (values.empty()) throw EmptySeries("series '" + raw.name + "' has no values after cleaning");
  return TimeSeries(raw.name, std::move(dates), std::move(values));
}

inline TimeSeries clean(const TimeSeries& series, GapPolicy policy) {
  RawSeries raw{series.name(), series.dates(), {}, {}};
  raw.values.assign(series.values().begin(), series.values().end());
  return clean(raw, policy);
}

}  // namespace mep
