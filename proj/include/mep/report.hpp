#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "mep/detect.hpp"
#include "mep/error.hpp"
#include "mep/eval.hpp"
#include "mep/model.hpp"

namespace mep {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kReportKind = "mep.report";
inline constexpr const char* kTruthKind = "mep.synth.truth";

using ojson = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Writes through a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

inline ojson to_json(const ErrorWindow& w) {
  return {{"window", w.label},
          {"key", w.key},
          {"start_date", format_date(w.start_date)},
          {"end_date", format_date(w.end_date)},
          {"first_target", w.first_target},
          {"last_target", w.last_target},
          {"n_points", w.n_points},
          {"rel_mse", optional_number(w.rel_mse)},
          {"baseline_rel_mse", optional_number(w.baseline_rel_mse)},
          {"degenerate", w.degenerate()}};
}

inline ojson to_json(const RegimeLabel& l) {
  return {{"window", l.window}, {"key", l.key}, {"label", to_string(l.regime)}, {"score", optional_number(l.score)}};
}

inline ojson detection_json(const std::vector<RegimeLabel>& labels, const std::vector<ErrorWindow>* windows = nullptr) {
  ojson j;
  j["labels"] = ojson::array();
  for (const auto& l : labels) j["labels"].push_back(to_json(l));
  j["changepoints"] = ojson::array();
  for (std::size_t pos : changepoints(labels)) {
    ojson c{{"position", pos}, {"window", labels[pos].window}, {"key", labels[pos].key},
            {"to", to_string(labels[pos].regime)}};
    if (windows) c["start_date"] = format_date((*windows)[pos].start_date);
    j["changepoints"].push_back(std::move(c));
  }
  return j;
}

inline ojson to_json(const DetectorConfig& c) { return {{"theta", c.theta}, {"min_run", c.min_run}}; }

/// Per-track detection plus the majority-vote combination.
struct Detection {
  DetectorConfig config;
  std::vector<std::vector<RegimeLabel>> per_track;
  std::vector<RegimeLabel> combined;
};

inline Detection detect(const PredictabilityReport& report, const DetectorConfig& cfg) {
  Detection d{cfg, {}, {}};
  for (const auto& t : report.tracks) d.per_track.push_back(classify(t.windows, cfg));
  d.combined = combine_tracks(d.per_track);
  return d;
}

/// Report body without run metadata; byte-identical for identical inputs.
inline ojson report_json(const PredictabilityReport& report, const Detection& detection, const ojson& config,
                         const ojson& series_info) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kReportKind;
  j["config"] = config;
  j["series"] = series_info;
  j["relative_mse_formula"] = kRelativeMseFormula;
  j["baseline"] = "naive random walk at matched horizon: predicted(t+T) = actual(t)";
  j["tracks"] = ojson::array();
  for (std::size_t i = 0; i < report.tracks.size(); ++i) {
    const auto& t = report.tracks[i];
    ojson tj;
    tj["T"] = t.T;
    tj["n_forecasts"] = t.records.size();
    tj["fits"] = ojson::array();
    for (const auto& f : t.fits) tj["fits"].push_back({{"bucket", f.bucket}, {"model", to_json(f.model)}});
    tj["windows"] = ojson::array();
    for (const auto& w : t.windows) tj["windows"].push_back(to_json(w));
    tj["detection"] = detection_json(detection.per_track[i], &t.windows);
    j["tracks"].push_back(std::move(tj));
  }
  ojson dj = detection_json(detection.combined);
  dj["config"] = to_json(detection.config);
  dj["combination"] = "majority vote across tracks per window";
  j["detection"] = std::move(dj);
  return j;
}

/// Plot-ready forecast track: date, actual, predicted.
inline std::string forecast_csv(const ForecastTrack& track) {
  std::string s = "date,actual,predicted\n";
  for (const auto& r : track.records)
    s += format_date(r.date) + ',' + format_double(r.actual) + ',' + format_double(r.predicted) + '\n';
  return s;
}

/// One row per (period, T): period,T,rel_mse,baseline. Degenerate periods have empty scores.
inline std::string summary_csv(const PredictabilityReport& report) {
  std::string s = "period,T,rel_mse,baseline\n";
  for (const auto& t : report.tracks) {
    for (const auto& w : t.windows) {
      s += w.label + ',' + std::to_string(t.T) + ',' + (w.rel_mse ? format_double(*w.rel_mse) : "") + ',' +
           (w.baseline_rel_mse ? format_double(*w.baseline_rel_mse) : "") + '\n';
    }
  }
  return s;
}

inline std::string series_csv(const TimeSeries& series) {
  std::string s = "date,value\n";
  for (std::size_t i = 0; i < series.size(); ++i)
    s += format_date(series.dates()[i]) + ',' + format_double(series[i]) + '\n';
  return s;
}

}  // namespace mep
