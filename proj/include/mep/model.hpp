#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mep/design.hpp"
#include "mep/error.hpp"
#include "mep/ingest.hpp"

namespace mep {

inline constexpr double kDefaultRankTolerance = 1e-10;

struct FitOptions {
  /// Singular values below rank_tolerance * largest are treated as zero.
  double rank_tolerance = kDefaultRankTolerance;
  /// Fit on z-scored feature columns, then map coefficients back to raw units.
  bool standardize = false;
};

struct FitDiagnostics {
  std::size_t rank = 0;
  std::vector<double> singular_values;
  double residual_norm = 0.0;
};

struct LeastSquaresSolution {
  Eigen::VectorXd coefficients;
  FitDiagnostics diagnostics;
};

namespace detail {

inline Eigen::JacobiSVD<Eigen::MatrixXd> checked_svd(const Eigen::MatrixXd& W, double rank_tolerance) {
  if (!(rank_tolerance > 0.0 && rank_tolerance < 1.0))
    throw PreconditionError("rank tolerance must lie in (0, 1)");
  if (W.size() == 0) throw DegenerateMatrix("empty matrix");
  if (!W.allFinite()) throw NumericalFailure("matrix contains non-finite entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalFailure("singular value decomposition did not converge");
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > std::numeric_limits<double>::min()))
    throw DegenerateMatrix("all singular values are zero");
  return svd;
}

// Reciprocals of the retained singular values, zero elsewhere.
inline Eigen::VectorXd truncated_inverse(const Eigen::VectorXd& s, double rank_tolerance, std::size_t& rank) {
  const double cutoff = rank_tolerance * s(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      inv(i) = 1.0 / s(i);
      ++rank;
    }
  }
  return inv;
}

}  // namespace detail

/// Moore-Penrose pseudoinverse through a thin SVD, W = U S V^T, giving
/// V S^+ U^T with singular values under rank_tolerance * s_max dropped.
inline Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& W, double rank_tolerance = kDefaultRankTolerance) {
  const auto svd = detail::checked_svd(W, rank_tolerance);
  std::size_t rank = 0;
  const Eigen::VectorXd inv = detail::truncated_inverse(svd.singularValues(), rank_tolerance, rank);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Minimum-norm least-squares solution a = pinv(W) v.
inline LeastSquaresSolution least_squares(const Eigen::MatrixXd& W, const Eigen::VectorXd& v,
                                          double rank_tolerance = kDefaultRankTolerance) {
  if (W.rows() != v.size()) throw DimensionMismatch("least squares: W rows != target length");
  if (!v.allFinite()) throw NumericalFailure("target contains non-finite entries");
  const auto svd = detail::checked_svd(W, rank_tolerance);
  LeastSquaresSolution out;
  const Eigen::VectorXd inv = detail::truncated_inverse(svd.singularValues(), rank_tolerance, out.diagnostics.rank);
  out.coefficients = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * v);
  if (!out.coefficients.allFinite()) throw NumericalFailure("solution contains non-finite entries");
  const auto& s = svd.singularValues();
  out.diagnostics.singular_values.assign(s.data(), s.data() + s.size());
  out.diagnostics.residual_norm = (W * out.coefficients - v).norm();
  return out;
}

/// Coefficients of the polynomial delay map plus the configuration that
/// produced them. Immutable once built.
class FittedModel {
 public:
  FittedModel(EmbedConfig config, std::vector<double> coefficients, FitDiagnostics diagnostics)
      : config_(config), coefficients_(std::move(coefficients)), diagnostics_(std::move(diagnostics)) {
    config_.validate();
    if (coefficients_.size() != count_coefficients(config_.d, config_.np))
      throw DimensionMismatch("fitted model: coefficient count does not match (d, np)");
    for (double c : coefficients_)
      if (!std::isfinite(c)) throw NumericalFailure("fitted model: non-finite coefficient");
  }

  const EmbedConfig& config() const noexcept { return config_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  std::vector<std::string> labels() const { return MonomialBasis(config_.d, config_.np).labels(); }

  Eigen::Map<const Eigen::VectorXd> vector() const {
    return {coefficients_.data(), static_cast<Eigen::Index>(coefficients_.size())};
  }

 private:
  EmbedConfig config_;
  std::vector<double> coefficients_;
  FitDiagnostics diagnostics_;
};

inline FittedModel fit(const DesignMatrix& dm, const EmbedConfig& cfg, const FitOptions& opts = {}) {
  if (dm.cols() != count_coefficients(cfg.d, cfg.np))
    throw DimensionMismatch("fit: design matrix columns do not match (d, np)");
  if (!opts.standardize) {
    auto sol = least_squares(dm.W, dm.target, opts.rank_tolerance);
    return {cfg, {sol.coefficients.data(), sol.coefficients.data() + sol.coefficients.size()}, std::move(sol.diagnostics)};
  }

  // Column 0 is the constant; every other column with spread gets z-scored.
  const Eigen::Index m = dm.W.rows();
  const Eigen::Index nc = dm.W.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(nc);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(nc);
  Eigen::MatrixXd Z = dm.W;
  for (Eigen::Index j = 1; j < nc; ++j) {
    const double mu = dm.W.col(j).mean();
    const double sd = std::sqrt((dm.W.col(j).array() - mu).square().sum() / static_cast<double>(m));
    if (sd > 0.0) {
      mean(j) = mu;
      scale(j) = sd;
      Z.col(j) = (dm.W.col(j).array() - mu) / sd;
    }
  }
  auto sol = least_squares(Z, dm.target, opts.rank_tolerance);
  Eigen::VectorXd a = sol.coefficients.cwiseQuotient(scale);
  a(0) -= a.tail(nc - 1).dot(mean.tail(nc - 1));
  sol.diagnostics.residual_norm = (dm.W * a - dm.target).norm();
  return {cfg, {a.data(), a.data() + a.size()}, std::move(sol.diagnostics)};
}

/// Evaluates the fitted map on prepared feature rows. No refitting.
inline Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& w_hat) {
  if (static_cast<std::size_t>(w_hat.cols()) != model.coefficients().size())
    throw DimensionMismatch("predict: feature rows have " + std::to_string(w_hat.cols()) + " columns, model has " +
                            std::to_string(model.coefficients().size()) + " coefficients");
  return w_hat * model.vector();
}

/// One direct T-step forecast: from the delay vector at `time`, the value at
/// `time + T`.
struct ForecastRecord {
  std::size_t time;
  std::size_t target_time;
  Date date;       // date of target_time
  double anchor;   // v(time), the naive random-walk forecast
  double actual;   // v(time + T)
  double predicted;
};

/// Forecasts v(t+T) for every t in [begin, end). Predictions never feed back
/// as inputs.
inline std::vector<ForecastRecord> forecast_series(const TimeSeries& series, const FittedModel& model, std::size_t begin,
                                                   std::size_t end) {
  std::vector<ForecastRecord> out;
  if (end <= begin) return out;
  const auto& cfg = model.config();
  if (begin < cfg.first_time() || end + cfg.T > series.size())
    throw InfeasibleWindow("forecast range [" + std::to_string(begin) + ", " + std::to_string(end) +
                           ") infeasible for T=" + std::to_string(cfg.T) + " on N=" + std::to_string(series.size()));
  std::vector<std::size_t> times(end - begin);
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = begin + i;
  const MonomialBasis basis(cfg.d, cfg.np);
  const Eigen::VectorXd pred = predict(model, feature_matrix(series.values(), basis, cfg.delta, times));
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t t = times[i];
    out.push_back({t, t + cfg.T, series.dates()[t + cfg.T], series[t], series[t + cfg.T],
                   pred(static_cast<Eigen::Index>(i))});
  }
  return out;
}

// JSON: config, monomial labels, coefficients, diagnostics.

inline nlohmann::ordered_json to_json(const EmbedConfig& c) {
  return {{"d", c.d}, {"delta", c.delta}, {"np", c.np}, {"T", c.T}, {"M", c.M}};
}

inline EmbedConfig embed_config_from_json(const nlohmann::json& j) {
  EmbedConfig c;
  c.d = j.at("d").get<std::size_t>();
  c.delta = j.at("delta").get<std::size_t>();
  c.np = j.at("np").get<std::size_t>();
  c.T = j.at("T").get<std::size_t>();
  c.M = j.at("M").get<std::size_t>();
  return c;
}

inline nlohmann::ordered_json to_json(const FitDiagnostics& d) {
  return {{"rank", d.rank}, {"singular_values", d.singular_values}, {"residual_norm", d.residual_norm}};
}

inline nlohmann::ordered_json to_json(const FittedModel& m) {
  return {{"config", to_json(m.config())},
          {"labels", m.labels()},
          {"coefficients", m.coefficients()},
          {"diagnostics", to_json(m.diagnostics())}};
}

inline FittedModel model_from_json(const nlohmann::json& j) {
  try {
    FitDiagnostics diag;
    const auto& dj = j.at("diagnostics");
    diag.rank = dj.at("rank").get<std::size_t>();
    diag.singular_values = dj.at("singular_values").get<std::vector<double>>();
    diag.residual_norm = dj.at("residual_norm").get<double>();
    FittedModel m(embed_config_from_json(j.at("config")), j.at("coefficients").get<std::vector<double>>(),
                  std::move(diag));
    if (j.contains("labels") && j.at("labels").get<std::vector<std::string>>() != m.labels())
      throw SchemaMismatch("model json: monomial labels do not match the library's ordering");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("model json: ") + e.what());
  }
}

}  // namespace mep
