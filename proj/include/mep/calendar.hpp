#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mep {

using Date = std::chrono::sys_days;

inline constexpr const char* kIsoDateFormat = "%Y-%m-%d";

/// Parses `text` under a strftime-style `format`. The whole string must be
/// consumed and the result must be a valid calendar date.
inline std::optional<Date> parse_date(const std::string& text, const std::string& format = kIsoDateFormat) {
  std::tm tm{};
  tm.tm_mday = 0;
  std::istringstream in(text);
  in >> std::get_time(&tm, format.c_str());
  if (in.fail()) return std::nullopt;
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{tm.tm_year + 1900},
                                        std::chrono::month{static_cast<unsigned>(tm.tm_mon + 1)},
                                        std::chrono::day{static_cast<unsigned>(tm.tm_mday)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline int year_of(Date date) { return static_cast<int>(std::chrono::year_month_day{date}.year()); }

inline bool is_weekday(Date date) {
  const std::chrono::weekday wd{date};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

inline Date next_business_day(Date date) {
  do {
    date += std::chrono::days{1};
  } while (!is_weekday(date));
  return date;
}

/// `n` consecutive weekdays starting at `start` (rolled forward if it falls on a weekend).
inline std::vector<Date> business_days(Date start, std::size_t n) {
  std::vector<Date> out;
  out.reserve(n);
  Date d = is_weekday(start) ? start : next_business_day(start);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(d);
    d = next_business_day(d);
  }
  return out;
}

}  // namespace mep
