#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mep/detect.hpp"
#include "mep/eval.hpp"
#include "mep/ingest.hpp"
#include "mep/report.hpp"
#include "mep/synth.hpp"

namespace mep {

/// Everything a `run` needs. A run is reproducible from this alone.
struct RunConfig {
  std::string input;
  CsvOptions csv;
  std::size_t d = 4;
  std::size_t delta = 1;
  std::size_t np = 2;
  std::size_t fit_window = 700;
  std::vector<std::size_t> anticipation{7, 10, 13, 16};
  Bucketing bucketing = Bucketing::year();
  FitMode fit_mode = FitMode::Once;
  FitOptions fit;
  DetectorConfig detector;
  std::string out = "out";

  ProtocolConfig protocol() const {
    ProtocolConfig p;
    p.embed = EmbedConfig{d, delta, np, anticipation.empty() ? 1 : anticipation.front(), fit_window};
    p.anticipation = anticipation;
    p.bucketing = bucketing;
    p.fit_mode = fit_mode;
    p.fit = fit;
    return p;
  }

  void validate() const {
    if (input.empty()) throw PreconditionError("run: --input is required");
    protocol().validate();
    detector.validate();
    if (!(fit.rank_tolerance > 0.0 && fit.rank_tolerance < 1.0))
      throw PreconditionError("rank tolerance must lie in (0, 1)");
  }
};

inline ojson to_json(const RunConfig& c) {
  return {{"input", c.input},
          {"date_col", c.csv.date_col},
          {"value_col", c.csv.value_col},
          {"date_format", c.csv.date_format},
          {"gap_policy", to_string(c.csv.gap_policy)},
          {"d", c.d},
          {"delta", c.delta},
          {"np", c.np},
          {"fit_window", c.fit_window},
          {"anticipation", c.anticipation},
          {"bucket", to_string(c.bucketing)},
          {"refit", to_string(c.fit_mode)},
          {"rank_tol", c.fit.rank_tolerance},
          {"standardize", c.fit.standardize},
          {"theta", c.detector.theta},
          {"min_run", c.detector.min_run},
          {"out", c.out}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    c.input = j.value("input", c.input);
    c.csv.date_col = j.value("date_col", c.csv.date_col);
    c.csv.value_col = j.value("value_col", c.csv.value_col);
    c.csv.date_format = j.value("date_format", c.csv.date_format);
    c.csv.gap_policy = parse_gap_policy(j.value("gap_policy", to_string(c.csv.gap_policy)));
    c.d = j.value("d", c.d);
    c.delta = j.value("delta", c.delta);
    c.np = j.value("np", c.np);
    c.fit_window = j.value("fit_window", c.fit_window);
    c.anticipation = j.value("anticipation", c.anticipation);
    c.bucketing = parse_bucketing(j.value("bucket", to_string(c.bucketing)));
    c.fit_mode = parse_fit_mode(j.value("refit", to_string(c.fit_mode)));
    c.fit.rank_tolerance = j.value("rank_tol", c.fit.rank_tolerance);
    c.fit.standardize = j.value("standardize", c.fit.standardize);
    c.detector.theta = j.value("theta", c.detector.theta);
    c.detector.min_run = j.value("min_run", c.detector.min_run);
    c.out = j.value("out", c.out);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("run config: ") + e.what());
  }
}

/// Runs ingest -> fit -> forecast -> evaluate -> detect and writes
///   report.json, forecast_T<T>.csv per track, summary.csv, run_metadata.json
/// into cfg.out. Returns the report body.
inline ojson cmd_run(const RunConfig& cfg) {
  cfg.validate();
  const RawSeries raw = load_csv(cfg.input, cfg.csv);
  const TimeSeries series = clean(raw, cfg.csv.gap_policy);
  const PredictabilityReport report = run_protocol(series, cfg.protocol());
  const Detection detection = detect(report, cfg.detector);

  ojson missing = ojson::array();
  for (const auto& m : raw.missing) missing.push_back({{"line", m.line}, {"date", format_date(m.date)}, {"raw", m.raw}});
  const ojson series_info{{"name", series.name()},
                          {"n", series.size()},
                          {"first_date", format_date(series.dates().front())},
                          {"last_date", format_date(series.dates().back())},
                          {"gap_policy", to_string(cfg.csv.gap_policy)},
                          {"missing_rows", std::move(missing)}};
  ojson body = report_json(report, detection, to_json(cfg), series_info);

  const std::filesystem::path out(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());
  write_atomic(out / "report.json", body.dump(2) + "\n");
  for (const auto& t : report.tracks) write_atomic(out / ("forecast_T" + std::to_string(t.T) + ".csv"), forecast_csv(t));
  write_atomic(out / "summary.csv", summary_csv(report));

  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const ojson meta{{"schema_version", kSchemaVersion},
                   {"generated_at_unix", now.time_since_epoch().count()},
                   {"report", "report.json"}};
  write_atomic(out / "run_metadata.json", meta.dump(2) + "\n");
  return body;
}

struct SynthConfig {
  std::string spec_file;  // JSON GeneratorSpec; overrides the flags below
  std::string kind = "random-walk";
  std::size_t n = 1000;
  double sigma = 1.0;
  double x0 = 0.0;
  std::size_t d = 1;
  std::vector<double> coefficients;
  double noise_sigma = 0.0;
  std::vector<double> init;
  double bound = kDefaultOrbitBound;
  std::size_t splice_index = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> seed2;
  std::string out = "synthetic.csv";

  /// Flags to spec. SPLICED from flags is a random walk (sigma, x0, seed)
  /// followed by a poly map (d, coefficients, noise, seed2 or seed+1).
  GeneratorSpec spec() const {
    if (!spec_file.empty()) return spec_from_json(nlohmann::json::parse(read_file(spec_file)));
    if (!seed) throw PreconditionError("synth: --seed is required");
    GeneratorSpec s;
    s.n = n;
    s.seed = *seed;
    PolyMapParams poly{d, coefficients, noise_sigma, init.empty() ? std::vector<double>(d, x0) : init, bound};
    if (kind == "random-walk") {
      s.params = RandomWalkParams{sigma, x0};
    } else if (kind == "poly-map") {
      s.params = poly;
    } else if (kind == "spliced") {
      if (splice_index == 0 || splice_index >= n) throw PreconditionError("synth: splice index must lie in (0, n)");
      GeneratorSpec a{RandomWalkParams{sigma, x0}, *seed, splice_index};
      GeneratorSpec b{poly, seed2.value_or(*seed + 1), n - splice_index};
      s.params = SplicedParams{splice_index, std::make_shared<const GeneratorSpec>(a),
                               std::make_shared<const GeneratorSpec>(b)};
    } else {
      throw PreconditionError("synth: unknown kind '" + kind + "' (expected random-walk|poly-map|spliced)");
    }
    return s;
  }
};

inline std::filesystem::path truth_path_for(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".truth.json");
  return p;
}

inline ojson truth_json(const GeneratorSpec& spec, const SynthResult& r) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kTruthKind;
  j["spec"] = to_json(spec);
  j["n"] = r.series.size();
  j["first_date"] = format_date(r.series.dates().front());
  j["changepoint"] = r.changepoint ? ojson(*r.changepoint) : ojson(nullptr);
  j["changepoint_date"] = r.changepoint ? ojson(format_date(r.series.dates()[*r.changepoint])) : ojson(nullptr);
  j["coefficients"] = r.coefficients ? ojson(*r.coefficients) : ojson(nullptr);
  return j;
}

/// Writes the series CSV and its <stem>.truth.json sidecar. Returns the truth document.
inline ojson cmd_synth(const SynthConfig& cfg) {
  const GeneratorSpec spec = cfg.spec();
  const SynthResult r = generate(spec);
  const std::filesystem::path out(cfg.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  const ojson truth = truth_json(spec, r);
  write_atomic(out, series_csv(r.series));
  write_atomic(truth_path_for(out), truth.dump(2) + "\n");
  return truth;
}

/// Compares a report's combined detection with synthetic ground truth.
///   hit: some PREDICTABLE window at or after the true changepoint window (null without a changepoint)
///   detected_window: onset of the first PREDICTABLE run
///   localization_error: detected_window - true_window, in windows (years for calendar buckets)
///   false_flags: PREDICTABLE windows before the true changepoint window (all of them without one)
inline ojson cmd_verify(const nlohmann::json& report, const nlohmann::json& truth) {
  auto check = [](const nlohmann::json& j, const char* kind, const char* what) {
    if (!j.is_object() || j.value("kind", std::string{}) != kind || !j.contains("schema_version") ||
        !j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion)
      throw SchemaMismatch(std::string(what) + ": expected kind '" + kind + "' with schema_version " +
                           std::to_string(kSchemaVersion));
  };
  check(report, kReportKind, "report");
  check(truth, kTruthKind, "truth");
  try {
    const Bucketing bucketing = parse_bucketing(report.at("config").at("bucket").get<std::string>());
    std::vector<std::pair<long, bool>> labels;
    for (const auto& l : report.at("detection").at("labels"))
      labels.emplace_back(l.at("key").get<long>(), l.at("label").get<std::string>() == "PREDICTABLE");

    std::optional<long> detected;
    for (const auto& [key, flagged] : labels)
      if (flagged) {
        detected = key;
        break;
      }

    ojson out;
    out["windows"] = labels.size();
    out["detected_window"] = detected ? ojson(*detected) : ojson(nullptr);
    if (truth.at("changepoint").is_null()) {
      std::size_t flags = 0;
      for (const auto& l : labels) flags += l.second ? 1 : 0;
      out["true_window"] = nullptr;
      out["hit"] = nullptr;
      out["localization_error"] = nullptr;
      out["false_flags"] = flags;
      return out;
    }
    const auto cp = truth.at("changepoint").get<std::size_t>();
    const auto cp_date = parse_date(truth.at("changepoint_date").get<std::string>());
    if (!cp_date) throw SchemaMismatch("truth: bad changepoint_date");
    const long true_key = bucketing.key(cp, *cp_date);
    bool hit = false;
    std::size_t false_flags = 0;
    for (const auto& [key, flagged] : labels) {
      if (flagged && key >= true_key) hit = true;
      if (flagged && key < true_key) ++false_flags;
    }
    out["true_window"] = true_key;
    out["hit"] = hit;
    out["localization_error"] = hit && detected ? ojson(*detected - true_key) : ojson(nullptr);
    out["false_flags"] = false_flags;
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("verify: ") + e.what());
  }
}

/// Exit status for each error kind; 0 is success, 2 is a usage error.
inline int exit_code_for(const std::string& kind) {
  static const std::vector<std::pair<std::string, int>> codes{
      {"FileNotFound", 10},      {"ParseError", 11},       {"EmptySeries", 12},       {"GapError", 13},
      {"InfeasibleWindow", 20},  {"OverflowError", 21},    {"NumericalFailure", 30},  {"DegenerateMatrix", 31},
      {"DimensionMismatch", 32}, {"DegenerateWindow", 40}, {"DivergentOrbit", 50},    {"PreconditionError", 60},
      {"SchemaMismatch", 61},    {"IoError", 62}};
  for (const auto& [k, c] : codes)
    if (k == kind) return c;
  return 70;
}

inline std::string category_for(const std::string& kind) {
  const int c = exit_code_for(kind);
  if (c < 20) return "ingest";
  if (c < 30) return "design";
  if (c < 40) return "model";
  if (c < 50) return "eval";
  if (c < 60) return "synth";
  if (c < 70) return "config";
  return "internal";
}

struct VerifyConfig {
  std::string report;
  std::string truth;
};

/// Registers the run/synth/verify subcommands, binding flags to the configs.
inline void build_cli(CLI::App& app, RunConfig& run, SynthConfig& synth, VerifyConfig& verify,
                      std::string& run_config_file) {
  app.require_subcommand(1);

  auto* r = app.add_subcommand("run", "fit, forecast, score and detect regimes on a CSV series");
  r->add_option("--config", run_config_file, "JSON RunConfig; flags given on the command line override it");
  r->add_option("--input", run.input, "input CSV");
  r->add_option("--date-col", run.csv.date_col, "date column name")->capture_default_str();
  r->add_option("--value-col", run.csv.value_col, "value column name")->capture_default_str();
  r->add_option("--date-format", run.csv.date_format, "strftime-style date format")->capture_default_str();
  r->add_option_function<std::string>(
       "--gap-policy", [&run](const std::string& s) { run.csv.gap_policy = parse_gap_policy(s); },
       "ffill|drop|error (default ffill)")
      ->check(CLI::IsMember({"ffill", "drop", "error"}));
  r->add_option("--d", run.d, "embedding dimension")->capture_default_str();
  r->add_option("--delta", run.delta, "time lag between delay components")->capture_default_str();
  r->add_option("--np", run.np, "polynomial degree")->capture_default_str();
  r->add_option("--fit-window", run.fit_window, "number of fitting constraints M")->capture_default_str();
  r->add_option("--anticipation", run.anticipation, "anticipation time T (repeatable)")->capture_default_str();
  r->add_option_function<std::string>(
      "--bucket", [&run](const std::string& s) { run.bucketing = parse_bucketing(s); },
      "year | window:N (default year)");
  r->add_option_function<std::string>(
       "--refit", [&run](const std::string& s) { run.fit_mode = parse_fit_mode(s); },
       "once | rolling (default once)")
      ->check(CLI::IsMember({"once", "rolling"}));
  r->add_option("--rank-tol", run.fit.rank_tolerance, "relative singular value cutoff")->capture_default_str();
  r->add_flag("--standardize", run.fit.standardize, "z-score feature columns while fitting");
  r->add_option("--theta", run.detector.theta, "flag when rel_mse < theta * baseline")->capture_default_str();
  r->add_option("--min-run", run.detector.min_run, "minimum consecutive flagged windows")->capture_default_str();
  r->add_option("--out", run.out, "output directory")->capture_default_str();

  auto* s = app.add_subcommand("synth", "generate a seeded synthetic series and its ground truth");
  s->add_option("--spec", synth.spec_file, "JSON generator spec (replaces the kind flags)");
  s->add_option("--kind", synth.kind, "random-walk | poly-map | spliced")
      ->check(CLI::IsMember({"random-walk", "poly-map", "spliced"}))
      ->capture_default_str();
  s->add_option("--n", synth.n, "series length")->capture_default_str();
  s->add_option("--sigma", synth.sigma, "random walk step sd")->capture_default_str();
  s->add_option("--x0", synth.x0, "random walk start")->capture_default_str();
  s->add_option("--d", synth.d, "poly map delay dimension")->capture_default_str();
  s->add_option("--coefficients", synth.coefficients, "poly map coefficients, monomial order")->delimiter(',');
  s->add_option("--noise-sigma", synth.noise_sigma, "poly map dynamic noise sd")->capture_default_str();
  s->add_option("--init", synth.init, "poly map initial values")->delimiter(',');
  s->add_option("--bound", synth.bound, "divergence bound on |v|")->capture_default_str();
  s->add_option("--splice-index", synth.splice_index, "spliced: first index of the second segment");
  s->add_option("--seed", synth.seed, "64-bit seed (required)");
  s->add_option("--seed2", synth.seed2, "spliced: seed of the second segment (default seed+1)");
  s->add_option("--out", synth.out, "output CSV; ground truth goes to <stem>.truth.json")->capture_default_str();

  auto* v = app.add_subcommand("verify", "score a report's detection against synthetic ground truth");
  v->add_option("--report", verify.report, "report.json from run")->required();
  v->add_option("--truth", verify.truth, "truth.json from synth")->required();
}

}  // namespace mep
