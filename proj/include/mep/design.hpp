#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mep/error.hpp"
#include "mep/ingest.hpp"

namespace mep {

/// Reconstruction and fitting parameters.
///   d      embedding dimension (components per delay vector)
///   delta  lag between delay components, in index steps
///   np     polynomial degree of the mapping
///   T      anticipation time, in index steps
///   M      number of constraint rows used for fitting
struct EmbedConfig {
  std::size_t d = 4;
  std::size_t delta = 1;
  std::size_t np = 2;
  std::size_t T = 7;
  std::size_t M = 700;

  void validate() const {
    if (d < 1 || delta < 1 || np < 1 || T < 1 || M < 1)
      throw PreconditionError("embed config: d, delta, np, T and M must all be >= 1");
  }

  /// Earliest index that has a full delay vector.
  std::size_t first_time() const noexcept { return (d - 1) * delta; }

  friend bool operator==(const EmbedConfig&, const EmbedConfig&) = default;
};

/// Number of model coefficients: the constant term plus every monomial of
/// degree 1..np in d variables, i.e. 1 + sum_k C(d+k-1, k).
inline std::size_t count_coefficients(std::size_t d, std::size_t np) {
  if (d < 1 || np < 1) throw PreconditionError("count_coefficients: d and np must be >= 1");
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t total = 1;
  std::size_t block = 1;  // C(d+k-1, k), starting at k = 0
  for (std::size_t k = 1; k <= np; ++k) {
    // C(d+k-1, k) = C(d+k-2, k-1) * (d+k-1) / k; divide out the gcd first to stay exact.
    std::size_t num = d + k - 1;
    if (num < d) throw OverflowError("count_coefficients: overflow");
    std::size_t den = k;
    const std::size_t g1 = std::gcd(block, den);
    block /= g1;
    den /= g1;
    num /= den;  // den now divides num exactly
    if (block > kMax / num) throw OverflowError("count_coefficients: coefficient count exceeds size_t");
    block *= num;
    if (total > kMax - block) throw OverflowError("count_coefficients: coefficient count exceeds size_t");
    total += block;
  }
  return total;
}

/// Ordered monomial basis in d variables up to degree np. Order is
/// degree-ascending, then lexicographic on the non-decreasing index
/// multiset: for d=2, np=2 that is 1, v1, v2, v1^2, v1*v2, v2^2.
class MonomialBasis {
 public:
  MonomialBasis(std::size_t d, std::size_t np) : d_(d), np_(np) {
    const std::size_t n = count_coefficients(d, np);
    terms_.reserve(n);
    parent_.reserve(n);
    last_.reserve(n);
    terms_.push_back({});
    parent_.push_back(0);
    last_.push_back(0);
    std::size_t prev_begin = 0;
    std::size_t prev_end = 1;
    for (std::size_t k = 1; k <= np; ++k) {
      for (std::size_t p = prev_begin; p < prev_end; ++p) {
        const std::size_t lo = terms_[p].empty() ? 0 : terms_[p].back();
        for (std::size_t i = lo; i < d; ++i) {
          auto t = terms_[p];
          t.push_back(static_cast<std::uint32_t>(i));
          terms_.push_back(std::move(t));
          parent_.push_back(p);
          last_.push_back(i);
        }
      }
      prev_begin = prev_end;
      prev_end = terms_.size();
    }
  }

  std::size_t dimension() const noexcept { return d_; }
  std::size_t degree() const noexcept { return np_; }
  std::size_t size() const noexcept { return terms_.size(); }

  /// Zero-based variable indices of term `j` (empty for the constant).
  const std::vector<std::uint32_t>& term(std::size_t j) const { return terms_[j]; }

  /// Evaluates every term at `v` into `out` (length size()).
  void evaluate(std::span<const double> v, std::span<double> out) const {
    if (v.size() != d_) throw DimensionMismatch("monomial row: expected " + std::to_string(d_) + " components");
    if (out.size() != terms_.size()) throw DimensionMismatch("monomial row: output has wrong length");
    out[0] = 1.0;
    for (std::size_t j = 1; j < terms_.size(); ++j) out[j] = out[parent_[j]] * v[last_[j]];
  }

  std::vector<double> evaluate(std::span<const double> v) const {
    std::vector<double> out(terms_.size());
    evaluate(v, out);
    return out;
  }

  /// Human-readable names such as "1", "v1", "v1^2*v3".
  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
      if (t.empty()) {
        out.emplace_back("1");
        continue;
      }
      std::string s;
      for (std::size_t i = 0; i < t.size();) {
        std::size_t j = i;
        while (j < t.size() && t[j] == t[i]) ++j;
        if (!s.empty()) s += '*';
        s += 'v' + std::to_string(t[i] + 1);
        if (j - i > 1) s += '^' + std::to_string(j - i);
        i = j;
      }
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  std::size_t d_;
  std::size_t np_;
  std::vector<std::vector<std::uint32_t>> terms_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> last_;
};

inline std::vector<double> monomial_row(std::span<const double> v, std::size_t np) {
  return MonomialBasis(v.size(), np).evaluate(v);
}

/// Delay vector [v(t), v(t-delta), ..., v(t-(d-1)delta)].
inline std::vector<double> delay_vector(std::span<const double> values, std::size_t t, std::size_t d, std::size_t delta) {
  if (t < (d - 1) * delta || t >= values.size())
    throw InfeasibleWindow("delay vector at t=" + std::to_string(t) + " out of range");
  std::vector<double> v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = values[t - i * delta];
  return v;
}

/// Number of indices t with a full delay vector and an observed v(t+T).
inline std::size_t max_rows(std::size_t n, std::size_t d, std::size_t delta, std::size_t T) {
  const std::size_t first = (d - 1) * delta;
  if (n < first + T + 1) return 0;
  return n - T - first;
}

/// The linear system W a = target. Row n is the monomial expansion of the
/// delay vector at row_times[n]; target[n] = v(row_times[n] + T).
struct DesignMatrix {
  Eigen::MatrixXd W;
  Eigen::VectorXd target;
  std::vector<std::size_t> row_times;
  std::vector<std::string> labels;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(W.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(W.cols()); }
};

/// Feature rows (no targets) for arbitrary evaluation times. Used for both
/// fitting and prediction so the two share one code path.
inline Eigen::MatrixXd feature_matrix(std::span<const double> values, const MonomialBasis& basis, std::size_t delta,
                                      std::span<const std::size_t> times) {
  const std::size_t d = basis.dimension();
  Eigen::MatrixXd W(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(basis.size()));
  std::vector<double> v(d);
  std::vector<double> row(basis.size());
  for (std::size_t n = 0; n < times.size(); ++n) {
    const std::size_t t = times[n];
    if (t < (d - 1) * delta || t >= values.size())
      throw InfeasibleWindow("evaluation time " + std::to_string(t) + " has no full delay vector");
    for (std::size_t i = 0; i < d; ++i) v[i] = values[t - i * delta];
    basis.evaluate(v, row);
    for (std::size_t j = 0; j < row.size(); ++j) W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = row[j];
  }
  return W;
}

/// Builds the M constraint rows starting at index `start`.
inline DesignMatrix embed(std::span<const double> values, const EmbedConfig& cfg, std::size_t start) {
  cfg.validate();
  const std::size_t n = values.size();
  const std::size_t needed = start + cfg.M + cfg.T;
  if (start < cfg.first_time() || needed > n) {
    throw InfeasibleWindow("window start=" + std::to_string(start) + " M=" + std::to_string(cfg.M) + " T=" +
                           std::to_string(cfg.T) + " needs N>=" + std::to_string(needed) + " and start>=" +
                           std::to_string(cfg.first_time()) + "; series has N=" + std::to_string(n));
  }
  const MonomialBasis basis(cfg.d, cfg.np);
  DesignMatrix dm;
  dm.row_times.resize(cfg.M);
  for (std::size_t i = 0; i < cfg.M; ++i) dm.row_times[i] = start + i;
  dm.W = feature_matrix(values, basis, cfg.delta, dm.row_times);
  dm.target.resize(static_cast<Eigen::Index>(cfg.M));
  for (std::size_t i = 0; i < cfg.M; ++i) dm.target(static_cast<Eigen::Index>(i)) = values[start + i + cfg.T];
  dm.labels = basis.labels();
  return dm;
}

inline DesignMatrix embed(std::span<const double> values, const EmbedConfig& cfg) {
  return embed(values, cfg, cfg.first_time());
}

inline DesignMatrix embed(const TimeSeries& series, const EmbedConfig& cfg, std::size_t start) {
  return embed(std::span<const double>(series.values()), cfg, start);
}

inline DesignMatrix embed(const TimeSeries& series, const EmbedConfig& cfg) {
  return embed(std::span<const double>(series.values()), cfg);
}

/// Debug dump: header "t,<labels...>,target", one row per constraint.
inline void write_csv(std::ostream& out, const DesignMatrix& dm) {
  out << "t";
  for (const auto& l : dm.labels) out << ',' << l;
  out << ",target\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < dm.rows(); ++i) {
    out << dm.row_times[i];
    for (Eigen::Index j = 0; j < dm.W.cols(); ++j) out << ',' << dm.W(static_cast<Eigen::Index>(i), j);
    out << ',' << dm.target(static_cast<Eigen::Index>(i)) << '\n';
  }
}

inline DesignMatrix read_design_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "design matrix: missing header");
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header.front() != "t" || header.back() != "target")
    throw ParseError(1, "design matrix: header must be t,<labels...>,target");
  DesignMatrix dm;
  dm.labels.assign(header.begin() + 1, header.end() - 1);
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw ParseError(lineno, "design matrix: wrong field count");
    std::vector<double> row;
    for (std::size_t j = 1; j + 1 < f.size(); ++j) {
      const auto v = detail::parse_double(f[j]);
      if (!v) throw ParseError(lineno, "design matrix: bad number '" + f[j] + "'");
      row.push_back(*v);
    }
    const auto tv = detail::parse_double(f.back());
    const auto tt = detail::parse_double(f.front());
    if (!tv || !tt || *tt < 0) throw ParseError(lineno, "design matrix: bad time or target");
    dm.row_times.push_back(static_cast<std::size_t>(*tt));
    targets.push_back(*tv);
    rows.push_back(std::move(row));
  }
  dm.W.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dm.labels.size()));
  dm.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      dm.W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    dm.target(static_cast<Eigen::Index>(i)) = targets[i];
  }
  return dm;
}

}  // namespace mep
