#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mep/calendar.hpp"
#include "mep/design.hpp"
#include "mep/error.hpp"
#include "mep/ingest.hpp"
#include "mep/rng.hpp"

namespace mep {

/// Synthetic series are dated on consecutive weekdays from this Monday.
inline const Date kSynthStartDate = Date{std::chrono::year{2000} / 1 / 3};

inline constexpr double kDefaultOrbitBound = 1e6;

struct GeneratorSpec;

struct RandomWalkParams {
  double sigma = 1.0;
  double x0 = 0.0;
};

/// v(t+1) = sum_j coefficients[j] * term_j(delay vector at t) + noise_sigma * eps_t,
/// with the delay vector [v(t), ..., v(t-d+1)] and terms in MonomialBasis order.
struct PolyMapParams {
  std::size_t d = 1;
  std::vector<double> coefficients;
  double noise_sigma = 0.0;
  std::vector<double> init;
  double bound = kDefaultOrbitBound;
};

/// `first` supplies indices [0, splice_index); `second` continues from the
/// tail of `first` and supplies the rest.
struct SplicedParams {
  std::size_t splice_index = 0;
  std::shared_ptr<const GeneratorSpec> first;
  std::shared_ptr<const GeneratorSpec> second;
};

struct GeneratorSpec {
  std::variant<RandomWalkParams, PolyMapParams, SplicedParams> params;
  std::uint64_t seed = 0;
  std::size_t n = 0;

  std::string kind() const {
    switch (params.index()) {
      case 0: return "RANDOM_WALK";
      case 1: return "POLY_MAP";
      default: return "SPLICED";
    }
  }
};

struct SynthResult {
  TimeSeries series;
  std::optional<std::size_t> changepoint;
  std::optional<std::vector<double>> coefficients;  // of the deterministic part, if any
};

namespace detail {

inline std::vector<double> random_walk_values(std::size_t n, double sigma, double x0, std::uint64_t seed) {
  if (n < 2) throw PreconditionError("random walk: n must be >= 2");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw PreconditionError("random walk: sigma must be > 0");
  SeededRng rng(seed);
  std::vector<double> v(n);
  v[0] = x0;
  for (std::size_t t = 0; t + 1 < n; ++t) v[t + 1] = v[t] + sigma * rng.normal();
  return v;
}

inline std::size_t implied_degree(std::size_t d, std::size_t n_coefficients) {
  for (std::size_t np = 1;; ++np) {
    const std::size_t c = count_coefficients(d, np);
    if (c == n_coefficients) return np;
    if (c > n_coefficients)
      throw PreconditionError("poly map: " + std::to_string(n_coefficients) +
                              " coefficients is not a complete basis for d=" + std::to_string(d));
  }
}

inline std::vector<double> poly_map_values(std::size_t n, const PolyMapParams& p, std::uint64_t seed) {
  if (p.d < 1) throw PreconditionError("poly map: d must be >= 1");
  if (p.init.size() < p.d) throw PreconditionError("poly map: init needs at least d values");
  if (n < 2 || n < p.init.size()) throw PreconditionError("poly map: n must be >= max(2, init length)");
  if (p.noise_sigma < 0.0) throw PreconditionError("poly map: noise_sigma must be >= 0");
  const MonomialBasis basis(p.d, implied_degree(p.d, p.coefficients.size()));
  SeededRng rng(seed);
  std::vector<double> v(p.init);
  v.reserve(n);
  for (std::size_t t = 0; t < v.size(); ++t)
    if (!(std::abs(v[t]) <= p.bound)) throw DivergentOrbit("orbit left bound " + std::to_string(p.bound) + " at t=" + std::to_string(t));
  std::vector<double> delay(p.d);
  std::vector<double> row(basis.size());
  while (v.size() < n) {
    const std::size_t t = v.size() - 1;
    for (std::size_t i = 0; i < p.d; ++i) delay[i] = v[t - i];
    basis.evaluate(delay, row);
    double next = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) next += p.coefficients[j] * row[j];
    next += p.noise_sigma * rng.normal();
    if (!(std::abs(next) <= p.bound))
      throw DivergentOrbit("orbit left bound " + std::to_string(p.bound) + " at t=" + std::to_string(t + 1));
    v.push_back(next);
  }
  return v;
}

struct Generated {
  std::vector<double> values;
  std::optional<std::size_t> changepoint;
  std::optional<std::vector<double>> coefficients;
};

inline Generated generate_values(const GeneratorSpec& spec);

inline Generated splice_values(const GeneratorSpec& spec, const SplicedParams& p) {
  if (!p.first || !p.second) throw PreconditionError("spliced: both child specs are required");
  if (p.splice_index == 0 || p.splice_index >= spec.n)
    throw PreconditionError("spliced: splice index must lie in (0, n)");
  if (p.first->n != p.splice_index || p.first->n + p.second->n != spec.n)
    throw PreconditionError("spliced: child lengths must be splice_index and n - splice_index");
  Generated out = generate_values(*p.first);
  const auto& head = out.values;
  std::vector<double> tail;
  if (const auto* rw = std::get_if<RandomWalkParams>(&p.second->params)) {
    tail = random_walk_values(p.second->n + 1, rw->sigma, head.back(), p.second->seed);
    tail.erase(tail.begin());
  } else if (const auto* pm = std::get_if<PolyMapParams>(&p.second->params)) {
    if (head.size() < pm->d) throw PreconditionError("spliced: first segment shorter than the map's d");
    PolyMapParams cont = *pm;
    cont.init.assign(head.end() - static_cast<std::ptrdiff_t>(pm->d), head.end());
    tail = poly_map_values(p.second->n + pm->d, cont, p.second->seed);
    tail.erase(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(pm->d));
    out.coefficients = pm->coefficients;
  } else {
    throw PreconditionError("spliced: second child must be RANDOM_WALK or POLY_MAP");
  }
  out.values.insert(out.values.end(), tail.begin(), tail.end());
  out.changepoint = p.splice_index;
  return out;
}

inline Generated generate_values(const GeneratorSpec& spec) {
  if (spec.n < 2) throw PreconditionError("generator: n must be >= 2");
  return std::visit(
      [&](const auto& p) -> Generated {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RandomWalkParams>) {
          return {random_walk_values(spec.n, p.sigma, p.x0, spec.seed), std::nullopt, std::nullopt};
        } else if constexpr (std::is_same_v<P, PolyMapParams>) {
          return {poly_map_values(spec.n, p, spec.seed), std::nullopt, p.coefficients};
        } else {
          return splice_values(spec, p);
        }
      },
      spec.params);
}

inline TimeSeries dated(std::vector<double> values, std::string name = "synthetic") {
  auto dates = business_days(kSynthStartDate, values.size());
  return TimeSeries(std::move(name), std::move(dates), std::move(values));
}

}  // namespace detail

inline TimeSeries gen_random_walk(std::size_t n, double sigma, double x0, std::uint64_t seed) {
  return detail::dated(detail::random_walk_values(n, sigma, x0, seed));
}

inline TimeSeries gen_poly_map(std::size_t n, std::size_t d, std::vector<double> coefficients, double noise_sigma,
                               std::vector<double> init, std::uint64_t seed, double bound = kDefaultOrbitBound) {
  PolyMapParams p{d, std::move(coefficients), noise_sigma, std::move(init), bound};
  return detail::dated(detail::poly_map_values(n, p, seed));
}

inline SynthResult generate(const GeneratorSpec& spec) {
  auto g = detail::generate_values(spec);
  return {detail::dated(std::move(g.values)), g.changepoint, std::move(g.coefficients)};
}

/// Builds a SPLICED spec; total length is a.n + b.n and the splice sits at a.n.
inline SynthResult gen_spliced(const GeneratorSpec& a, const GeneratorSpec& b, std::size_t splice_index) {
  GeneratorSpec s;
  s.n = a.n + b.n;
  s.seed = a.seed;
  s.params = SplicedParams{splice_index, std::make_shared<const GeneratorSpec>(a), std::make_shared<const GeneratorSpec>(b)};
  return generate(s);
}

// JSON form of a spec (used for the ground-truth sidecar and --spec files).

inline nlohmann::ordered_json to_json(const GeneratorSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = spec.kind();
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RandomWalkParams>) {
          j["sigma"] = p.sigma;
          j["x0"] = p.x0;
        } else if constexpr (std::is_same_v<P, PolyMapParams>) {
          j["d"] = p.d;
          j["coefficients"] = p.coefficients;
          j["noise_sigma"] = p.noise_sigma;
          j["init"] = p.init;
          j["bound"] = p.bound;
        } else {
          j["splice_index"] = p.splice_index;
          j["first"] = to_json(*p.first);
          j["second"] = to_json(*p.second);
        }
      },
      spec.params);
  return j;
}

inline GeneratorSpec spec_from_json(const nlohmann::json& j) {
  try {
    GeneratorSpec s;
    s.n = j.at("n").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "RANDOM_WALK") {
      s.params = RandomWalkParams{j.at("sigma").get<double>(), j.value("x0", 0.0)};
    } else if (kind == "POLY_MAP") {
      s.params = PolyMapParams{j.at("d").get<std::size_t>(), j.at("coefficients").get<std::vector<double>>(),
                               j.value("noise_sigma", 0.0), j.at("init").get<std::vector<double>>(),
                               j.value("bound", kDefaultOrbitBound)};
    } else if (kind == "SPLICED") {
      s.params = SplicedParams{j.at("splice_index").get<std::size_t>(),
                               std::make_shared<const GeneratorSpec>(spec_from_json(j.at("first"))),
                               std::make_shared<const GeneratorSpec>(spec_from_json(j.at("second")))};
    } else {
      throw SchemaMismatch("generator spec: unknown kind '" + kind + "'");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("generator spec: ") + e.what());
  }
}

}  // namespace mep
