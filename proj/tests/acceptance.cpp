// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
// Criterion 8 needs a user-supplied GBP LIBOR daily CSV; point MEP_LIBOR_CSV at
// it (optionally MEP_LIBOR_DATE_COL, MEP_LIBOR_VALUE_COL, MEP_LIBOR_DATE_FORMAT).
// Without it the criterion is reported as SKIP.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "mep/cli.hpp"
#include "mep/mep.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mep;

namespace {

struct Outcome {
  enum class Status { Pass, Fail, Skip } status;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Outcome::Status::Pass : Outcome::Status::Fail, std::move(detail)}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Eigen::MatrixXd gaussian(SeededRng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd X(r, c);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  return X;
}

// Generalized Henon maps, written as np=2 coefficient vectors in MonomialBasis
// order. Each depends on the last delay component, so the delay coordinates
// satisfy no polynomial identity of degree <= 2.
std::vector<double> henon_coefficients(std::size_t d, double a, double b) {
  const MonomialBasis basis(d, 2);
  std::vector<double> c(basis.size(), 0.0);
  c[0] = a;
  for (std::size_t j = 1; j < basis.size(); ++j) {
    const auto& t = basis.term(j);
    if (d == 2) {
      // v(t+1) = a - 1.4 v1^2 + b v2
      if (t == std::vector<std::uint32_t>{0, 0}) c[j] = -1.4;
      if (t == std::vector<std::uint32_t>{1}) c[j] = b;
    } else {
      // v(t+1) = a - v_{d-1}^2 - b v_d
      const auto sq = static_cast<std::uint32_t>(d - 2);
      if (t == std::vector<std::uint32_t>{sq, sq}) c[j] = -1.0;
      if (t == std::vector<std::uint32_t>{static_cast<std::uint32_t>(d - 1)}) c[j] = -b;
    }
  }
  return c;
}

Outcome coefficient_round_trip() {
  double worst = 0.0;
  std::size_t specs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t d = 2 + seed % 3;
    SeededRng rng(seed);
    const double a = (d == 2 ? 1.0 : 1.76) + 0.01 * (rng.uniform() - 0.5);
    const double b = (d == 2 ? 0.3 : 0.1) + 0.01 * (rng.uniform() - 0.5);
    std::vector<double> init(d);
    for (auto& x : init) x = 0.2 * (rng.uniform() - 0.5);
    const auto coefficients = henon_coefficients(d, a, b);
    const GeneratorSpec spec{PolyMapParams{d, coefficients, 0.0, init, 1e3}, seed, 400};
    const auto series = generate(spec).series;
    const EmbedConfig cfg{d, 1, 2, 1, 200};
    const auto model = fit(embed(series, cfg), cfg);
    for (std::size_t j = 0; j < coefficients.size(); ++j)
      worst = std::max(worst, std::abs(model.coefficients()[j] - coefficients[j]));
    ++specs;
  }
  return pass_if(specs == 20 && worst < 1e-6, std::to_string(specs) + " specs, max |a_fit - a_true| = " + fmt(worst) + " (< 1e-6)");
}

Outcome pseudoinverse_correctness() {
  SeededRng rng(2024);
  const std::vector<std::array<Eigen::Index, 3>> shapes{
      {60, 15, 15}, {15, 15, 15}, {9, 15, 9}, {60, 15, 7}, {12, 15, 5}, {40, 10, 10}, {10, 30, 10}, {25, 25, 12}};
  double worst_mp = 0.0;
  double worst_ls = 0.0;
  std::size_t ls_cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto [m, n, r] = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    const Eigen::MatrixXd W = r >= std::min(m, n) ? gaussian(rng, m, n) : Eigen::MatrixXd(gaussian(rng, m, r) * gaussian(rng, r, n));
    const Eigen::MatrixXd P = pseudoinverse(W);
    const Eigen::MatrixXd WP = W * P;
    const Eigen::MatrixXd PW = P * W;
    worst_mp = std::max({worst_mp, (W * P * W - W).norm() / W.norm(), (P * W * P - P).norm() / P.norm(),
                         (WP - WP.transpose()).norm() / WP.norm(), (PW - PW.transpose()).norm() / PW.norm()});
    if (m >= n && r >= n) {
      const Eigen::VectorXd v = gaussian(rng, m, 1);
      const double ours = least_squares(W, v).diagnostics.residual_norm;
      const double theirs = (W * oracle::normal_equations(W, v) - v).norm();
      worst_ls = std::max(worst_ls, std::abs(ours - theirs));
      ++ls_cases;
    }
  }
  return pass_if(worst_mp < 1e-8 && worst_ls < 1e-8,
                 "200 matrices, max Moore-Penrose residual = " + fmt(worst_mp) + "; " + std::to_string(ls_cases) +
                     " full-rank cases, max |residual - normal-equations residual| = " + fmt(worst_ls));
}

Outcome count_formula() {
  bool ok = count_coefficients(4, 2) == 15;
  for (std::size_t d = 1; d <= 6; ++d)
    for (std::size_t np = 1; np <= 4; ++np) ok = ok && count_coefficients(d, np) == oracle::brute_force_count(d, np);
  return pass_if(ok, "d<=6, np<=4 agree with enumeration; N_c(4,2) = " + std::to_string(count_coefficients(4, 2)));
}

Outcome null_calibration() {
  std::size_t windows = 0;
  std::size_t flagged = 0;
  std::vector<double> ratios;
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const auto series = gen_random_walk(2000, 0.05, 5.0, seed);
    ProtocolConfig p;  // d=4, delta=1, np=2, M=700, T={7,10,13,16}, fit once
    p.bucketing = Bucketing::window(125);
    const auto report = run_protocol(series, p);
    const auto det = detect(report, DetectorConfig{});
    for (std::size_t i = 0; i < report.tracks.size(); ++i) {
      for (std::size_t k = 0; k < det.per_track[i].size(); ++k) {
        ++windows;
        flagged += det.per_track[i][k].regime == Regime::Predictable;
        const auto& w = report.tracks[i].windows[k];
        if (!w.degenerate()) ratios.push_back(*w.rel_mse / *w.baseline_rel_mse);
      }
    }
  }
  const double fraction = static_cast<double>(flagged) / static_cast<double>(windows);
  const double med = median(ratios);
  return pass_if(fraction <= 0.05 && med >= 0.8,
                 "flagged " + std::to_string(flagged) + "/" + std::to_string(windows) + " windows (" + fmt(100 * fraction) +
                     "% <= 5%); median rel_mse/baseline = " + fmt(med) +
                     " (must not beat baseline by more than 20%: >= 0.8; |ratio - 1| = " + fmt(std::abs(med - 1.0)) + ")");
}

Outcome detection_power() {
  int detected = 0;
  int localized = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const double sigma = 0.05;
    const std::size_t splice = 750 + 125 * (s % 5);
    const double period = 30.0 + 5.0 * static_cast<double>(s % 7);
    const double c = std::cos(2.0 * std::numbers::pi / period);
    const double center = 5.0;
    const GeneratorSpec walk{RandomWalkParams{sigma, center}, 7000 + s, splice};
    const GeneratorSpec map{PolyMapParams{2, {center * (2.0 - 2.0 * c), 2.0 * c, -1.0, 0.0, 0.0, 0.0}, 0.01 * sigma, {0.0, 0.0}, 1e6},
                            9000 + s, 2000 - splice};
    const auto truth = gen_spliced(walk, map, splice);

    ProtocolConfig p;
    p.embed.M = 125;
    p.bucketing = Bucketing::window(125);
    p.fit_mode = FitMode::Rolling;
    const auto det = detect(run_protocol(truth.series, p), DetectorConfig{});
    const long true_key = static_cast<long>(*truth.changepoint / 125);
    int after = 0;
    int flagged_after = 0;
    std::optional<long> onset;
    for (const auto& l : det.combined) {
      if (l.regime == Regime::Predictable && !onset) onset = l.key;
      if (l.key >= true_key) {
        ++after;
        flagged_after += l.regime == Regime::Predictable;
      }
    }
    if (2 * flagged_after > after) {
      ++detected;
      if (onset && std::abs(*onset - true_key) <= 2) ++localized;
    }
  }
  return pass_if(detected >= 95 && localized >= 90 * detected / 100,
                 "detected " + std::to_string(detected) + "/100 (>= 95); localized within +-2 windows in " +
                     std::to_string(localized) + "/" + std::to_string(detected) + " (>= 90%)");
}

Outcome affine_invariance() {
  SeededRng rng(66);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial % 200);
    std::vector<double> a(n), p(n), a2(n), p2(n);
    double c = 20.0 * (rng.uniform() - 0.5);
    if (std::abs(c) < 1e-3) c = 1.0;
    const double b = 200.0 * (rng.uniform() - 0.5);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal();
      p[i] = a[i] + rng.normal() * rng.uniform();
      a2[i] = c * a[i] + b;
      p2[i] = c * p[i] + b;
    }
    const double r = relative_mse(a, p);
    worst = std::max(worst, std::abs(relative_mse(a2, p2) - r) / std::max(1.0, r));
  }
  return pass_if(worst < 1e-12, "1000 random cases, max relative deviation = " + fmt(worst) + " (< 1e-12)");
}

int run_binary(const std::string& args) {
  const int status = std::system((std::string(MEP_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome reproducibility() {
  test::TempDir dir;
  const auto csv = (dir / "rw.csv").string();
  const auto out = (dir / "out").string();
  if (run_binary("synth --kind random-walk --n 2000 --sigma 0.05 --x0 5 --seed 77 --out " + csv) != 0)
    return {Outcome::Status::Fail, "synth failed"};
  const std::string args = "run --input " + csv + " --out " + out + " --bucket window:125";
  if (run_binary(args) != 0) return {Outcome::Status::Fail, "first run failed"};
  const auto first = read_file(dir / "out" / "report.json");
  if (run_binary(args) != 0) return {Outcome::Status::Fail, "second run failed"};
  const auto second = read_file(dir / "out" / "report.json");
  return pass_if(first == second && !first.empty(), "two runs, report.json " + std::to_string(first.size()) +
                                                        " bytes, " + (first == second ? "identical" : "DIFFERENT"));
}

Outcome libor_pattern() {
  const char* path = std::getenv("MEP_LIBOR_CSV");
  if (!path || !*path) return {Outcome::Status::Skip, "set MEP_LIBOR_CSV to a GBP LIBOR daily CSV to run"};
  RunConfig cfg;
  cfg.input = path;
  if (const char* v = std::getenv("MEP_LIBOR_DATE_COL")) cfg.csv.date_col = v;
  if (const char* v = std::getenv("MEP_LIBOR_VALUE_COL")) cfg.csv.value_col = v;
  if (const char* v = std::getenv("MEP_LIBOR_DATE_FORMAT")) cfg.csv.date_format = v;
  const auto series = clean(load_csv(cfg.input, cfg.csv), cfg.csv.gap_policy);
  const auto report = run_protocol(series, cfg.protocol());
  const auto det = detect(report, cfg.detector);
  bool ordered = true;
  std::ostringstream detail;
  for (const auto& t : report.tracks) {
    double early = 0, late = 0;
    int ne = 0, nl = 0;
    for (const auto& w : t.windows) {
      if (w.degenerate()) continue;
      if (w.key >= 2002 && w.key <= 2006) early += *w.rel_mse, ++ne;
      if (w.key >= 2007 && w.key <= 2008) late += *w.rel_mse, ++nl;
    }
    const bool ok = ne > 0 && nl > 0 && late / nl < early / ne;
    ordered = ordered && ok;
    detail << "T=" << t.T << ": " << fmt(nl ? late / nl : -1) << " vs " << fmt(ne ? early / ne : -1) << "; ";
  }
  bool changepoint = false;
  for (auto pos : changepoints(det.combined))
    changepoint = changepoint || (det.combined[pos].key >= 2006 && det.combined[pos].key <= 2007);
  detail << "changepoint in 2006-2007: " << (changepoint ? "yes" : "no");
  return pass_if(ordered && changepoint, "mean rel_mse 2007-08 vs 2002-06: " + detail.str());
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "coefficient round-trip", 5.0, coefficient_round_trip},
      {2, "pseudoinverse correctness", 10.0, pseudoinverse_correctness},
      {3, "count formula", 1.0, count_formula},
      {4, "null calibration", 60.0, null_calibration},
      {5, "detection power and localization", 120.0, detection_power},
      {6, "affine invariance", 5.0, affine_invariance},
      {7, "reproducibility", 60.0, reproducibility},
      {8, "LIBOR regime pattern (external data)", 60.0, libor_pattern},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {Outcome::Status::Fail, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.status == Outcome::Status::Pass && secs > c.budget_seconds) {
      o.status = Outcome::Status::Fail;
      o.detail += "; over time budget";
    }
    const char* tag = o.status == Outcome::Status::Pass ? "PASS" : o.status == Outcome::Status::Fail ? "FAIL" : "SKIP";
    std::printf("[%s] %d %s: %s (%.2fs, budget %.0fs)\n", tag, c.id, c.name, o.detail.c_str(), secs, c.budget_seconds);
    failures += o.status == Outcome::Status::Fail;
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
