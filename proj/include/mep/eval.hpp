#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mep/design.hpp"
#include "mep/error.hpp"
#include "mep/ingest.hpp"
#include "mep/model.hpp"

namespace mep {

inline constexpr const char* kRelativeMseFormula = "sum((predicted-actual)^2) / sum((actual-mean(actual))^2)";

/// Forecast error normalized by the variance of the actuals in the same
/// window: 0 is a perfect forecast, 1 is no better than the window mean.
inline double relative_mse(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw DimensionMismatch("relative_mse: length mismatch");
  if (actual.size() < 2) throw DegenerateWindow("relative_mse: need at least 2 points");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sse += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  if (!(sst > 0.0)) throw DegenerateWindow("relative_mse: actual values have zero variance");
  return sse / sst;
}

/// relative_mse of the naive forecast v(t+T) ~ v(t) over `actual`.
inline double baseline_error(std::span<const double> actual, std::size_t T) {
  if (actual.size() <= T) throw DegenerateWindow("baseline_error: window length must exceed T");
  return relative_mse(actual.subspan(T), actual.first(actual.size() - T));
}

struct Bucketing {
  enum class Kind { CalendarYear, FixedWidth };
  Kind kind = Kind::CalendarYear;
  std::size_t width = 0;  // FixedWidth only, in index steps of the target time

  static Bucketing year() { return {Kind::CalendarYear, 0}; }
  static Bucketing window(std::size_t width) {
    if (width < 2) throw PreconditionError("window bucketing needs width >= 2");
    return {Kind::FixedWidth, width};
  }

  /// Bucket of a target observation: calendar year, or target_time / width.
  long key(std::size_t target_time, Date date) const {
    return kind == Kind::CalendarYear ? year_of(date) : static_cast<long>(target_time / width);
  }

  std::string label(long key) const {
    return kind == Kind::CalendarYear ? std::to_string(key) : "w" + std::to_string(key);
  }

  friend bool operator==(const Bucketing&, const Bucketing&) = default;
};

inline std::string to_string(const Bucketing& b) {
  return b.kind == Bucketing::Kind::CalendarYear ? "year" : "window:" + std::to_string(b.width);
}

inline Bucketing parse_bucketing(const std::string& s) {
  if (s == "year") return Bucketing::year();
  if (s.rfind("window:", 0) == 0) {
    const auto w = detail::parse_double(s.substr(7));
    if (w && *w >= 2 && *w == static_cast<double>(static_cast<std::size_t>(*w)))
      return Bucketing::window(static_cast<std::size_t>(*w));
  }
  throw PreconditionError("bad bucketing '" + s + "' (expected year or window:N with N >= 2)");
}

/// Scores for one bucket of forecast records. Degenerate buckets (fewer than
/// two points or constant actuals) carry no scores.
struct ErrorWindow {
  std::string label;
  long key = 0;
  Date start_date{};
  Date end_date{};
  std::size_t first_target = 0;
  std::size_t last_target = 0;
  std::size_t n_points = 0;
  std::optional<double> rel_mse;
  std::optional<double> baseline_rel_mse;

  bool degenerate() const noexcept { return !rel_mse || !baseline_rel_mse; }
};

inline std::vector<ErrorWindow> error_by_period(std::span<const ForecastRecord> records, const Bucketing& bucketing) {
  if (records.empty()) throw PreconditionError("error_by_period: no records");
  std::vector<ErrorWindow> out;
  std::size_t i = 0;
  while (i < records.size()) {
    const long key = bucketing.key(records[i].target_time, records[i].date);
    std::size_t j = i;
    std::vector<double> actual, predicted, naive;
    while (j < records.size() && bucketing.key(records[j].target_time, records[j].date) == key) {
      if (j > i && !(records[j - 1].date < records[j].date))
        throw PreconditionError("error_by_period: records not in date order");
      actual.push_back(records[j].actual);
      predicted.push_back(records[j].predicted);
      naive.push_back(records[j].anchor);
      ++j;
    }
    ErrorWindow w;
    w.label = bucketing.label(key);
    w.key = key;
    w.start_date = records[i].date;
    w.end_date = records[j - 1].date;
    w.first_target = records[i].target_time;
    w.last_target = records[j - 1].target_time;
    w.n_points = j - i;
    try {
      w.rel_mse = relative_mse(actual, predicted);
      w.baseline_rel_mse = relative_mse(actual, naive);
    } catch (const DegenerateWindow&) {
      w.rel_mse.reset();
      w.baseline_rel_mse.reset();
    }
    out.push_back(std::move(w));
    i = j;
  }
  return out;
}

enum class FitMode {
  Once,     // fit on the first M constraints, forecast everything after
  Rolling,  // refit before each bucket on the M constraints whose targets precede it
};

inline std::string to_string(FitMode m) { return m == FitMode::Once ? "once" : "rolling"; }

inline FitMode parse_fit_mode(const std::string& s) {
  if (s == "once") return FitMode::Once;
  if (s == "rolling") return FitMode::Rolling;
  throw PreconditionError("bad refit mode '" + s + "' (expected once|rolling)");
}

struct ProtocolConfig {
  EmbedConfig embed;  // embed.T is overridden per track
  std::vector<std::size_t> anticipation{7, 10, 13, 16};
  Bucketing bucketing = Bucketing::year();
  FitMode fit_mode = FitMode::Once;
  FitOptions fit;

  void validate() const {
    if (anticipation.empty()) throw PreconditionError("protocol: anticipation set is empty");
    for (auto T : anticipation)
      if (T < 1) throw PreconditionError("protocol: anticipation times must be >= 1");
    EmbedConfig probe = embed;
    probe.T = anticipation.front();
    probe.validate();
  }
};

/// A model fit and the bucket it serves (empty label in FitMode::Once).
struct TrackFit {
  std::string bucket;
  FittedModel model;
};

struct ForecastTrack {
  std::size_t T = 0;
  std::vector<TrackFit> fits;
  std::vector<ForecastRecord> records;
  std::vector<ErrorWindow> windows;
};

struct PredictabilityReport {
  std::string series_name;
  std::size_t n = 0;
  ProtocolConfig protocol;
  std::vector<ForecastTrack> tracks;
};

namespace detail {

inline ForecastTrack run_track_once(const TimeSeries& series, const EmbedConfig& cfg, const ProtocolConfig& p) {
  const std::size_t rows = max_rows(series.size(), cfg.d, cfg.delta, cfg.T);
  if (rows <= cfg.M)
    throw InfeasibleWindow("T=" + std::to_string(cfg.T) + ": series of N=" + std::to_string(series.size()) +
                           " has " + std::to_string(rows) + " constraint rows, need more than M=" +
                           std::to_string(cfg.M));
  ForecastTrack track;
  track.T = cfg.T;
  const std::size_t start = cfg.first_time();
  track.fits.push_back({"", fit(embed(series, cfg, start), cfg, p.fit)});
  track.records = forecast_series(series, track.fits.back().model, start + cfg.M, series.size() - cfg.T);
  return track;
}

inline ForecastTrack run_track_rolling(const TimeSeries& series, const EmbedConfig& cfg, const ProtocolConfig& p) {
  ForecastTrack track;
  track.T = cfg.T;
  const std::size_t first_target = cfg.first_time() + cfg.T;
  std::size_t b0 = first_target;
  while (b0 < series.size()) {
    const long key = p.bucketing.key(b0, series.dates()[b0]);
    std::size_t b1 = b0;
    while (b1 + 1 < series.size() && p.bucketing.key(b1 + 1, series.dates()[b1 + 1]) == key) ++b1;
    // Training targets end at b0 - 1, so training rows end at b0 - T - 1.
    if (b0 >= cfg.T + cfg.M + cfg.first_time()) {
      const std::size_t start = b0 - cfg.T - cfg.M;
      auto model = fit(embed(series, cfg, start), cfg, p.fit);
      auto recs = forecast_series(series, model, b0 - cfg.T, b1 - cfg.T + 1);
      track.records.insert(track.records.end(), recs.begin(), recs.end());
      track.fits.push_back({p.bucketing.label(key), std::move(model)});
    }
    b0 = b1 + 1;
  }
  if (track.records.empty())
    throw InfeasibleWindow("T=" + std::to_string(cfg.T) + ": no bucket has M=" + std::to_string(cfg.M) +
                           " constraints of history");
  return track;
}

}  // namespace detail

/// For each anticipation time: fit, forecast every remaining feasible point,
/// and score per bucket against the matched-horizon naive forecast.
inline PredictabilityReport run_protocol(const TimeSeries& series, const ProtocolConfig& protocol) {
  protocol.validate();
  PredictabilityReport report;
  report.series_name = series.name();
  report.n = series.size();
  report.protocol = protocol;
  for (std::size_t T : protocol.anticipation) {
    EmbedConfig cfg = protocol.embed;
    cfg.T = T;
    ForecastTrack track = protocol.fit_mode == FitMode::Once ? detail::run_track_once(series, cfg, protocol)
                                                              : detail::run_track_rolling(series, cfg, protocol);
    track.windows = error_by_period(track.records, protocol.bucketing);
    report.tracks.push_back(std::move(track));
  }
  return report;
}

}  // namespace mep
