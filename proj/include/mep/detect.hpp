#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mep/error.hpp"
#include "mep/eval.hpp"

namespace mep {

enum class Regime { Stochastic, Predictable };

inline std::string to_string(Regime r) { return r == Regime::Predictable ? "PREDICTABLE" : "STOCHASTIC"; }

struct DetectorConfig {
  double theta = 0.5;       // flag when rel_mse < theta * baseline_rel_mse
  std::size_t min_run = 2;  // keep flags only in runs at least this long

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("detector: theta must lie in (0, 1)");
    if (min_run < 1) throw PreconditionError("detector: min_run must be >= 1");
  }
};

struct RegimeLabel {
  std::string window;
  long key = 0;
  Regime regime = Regime::Stochastic;
  std::optional<double> score;  // rel_mse / baseline_rel_mse; empty for degenerate windows

  friend bool operator==(const RegimeLabel&, const RegimeLabel&) = default;
};

inline std::vector<RegimeLabel> classify(std::span<const ErrorWindow> windows, const DetectorConfig& cfg) {
  cfg.validate();
  if (windows.empty()) throw PreconditionError("classify: no windows");
  std::vector<RegimeLabel> out;
  out.reserve(windows.size());
  std::vector<bool> flag(windows.size(), false);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    RegimeLabel l{windows[i].label, windows[i].key, Regime::Stochastic, std::nullopt};
    const auto& w = windows[i];
    if (!w.degenerate() && *w.baseline_rel_mse > 0.0) {
      l.score = *w.rel_mse / *w.baseline_rel_mse;
      flag[i] = *w.rel_mse < cfg.theta * *w.baseline_rel_mse;
    }
    out.push_back(std::move(l));
  }
  for (std::size_t i = 0; i < flag.size();) {
    if (!flag[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < flag.size() && flag[j]) ++j;
    if (j - i >= cfg.min_run)
      for (std::size_t k = i; k < j; ++k) out[k].regime = Regime::Predictable;
    i = j;
  }
  return out;
}

/// Positions where the regime differs from the previous label.
inline std::vector<std::size_t> changepoints(std::span<const RegimeLabel> labels) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i].regime != labels[i - 1].regime) out.push_back(i);
  return out;
}

/// Majority vote across tracks, window by window (matched on key). A window
/// is PREDICTABLE when more than half of the tracks that score it say so.
inline std::vector<RegimeLabel> combine_tracks(std::span<const std::vector<RegimeLabel>> tracks) {
  struct Tally {
    std::string window;
    std::size_t votes = 0;
    std::size_t predictable = 0;
    double score_sum = 0.0;
    std::size_t scored = 0;
  };
  std::map<long, Tally> by_key;
  for (const auto& labels : tracks) {
    for (const auto& l : labels) {
      auto& t = by_key[l.key];
      t.window = l.window;
      ++t.votes;
      if (l.regime == Regime::Predictable) ++t.predictable;
      if (l.score) {
        t.score_sum += *l.score;
        ++t.scored;
      }
    }
  }
  std::vector<RegimeLabel> out;
  for (const auto& [key, t] : by_key) {
    RegimeLabel l{t.window, key, 2 * t.predictable > t.votes ? Regime::Predictable : Regime::Stochastic, std::nullopt};
    if (t.scored > 0) l.score = t.score_sum / static_cast<double>(t.scored);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace mep
