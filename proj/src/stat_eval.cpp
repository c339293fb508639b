#include "predbio/stat_eval.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "predbio/error.hpp"
#include "predbio/student_t.hpp"

namespace predbio {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRankThreshold = 1e-10;

void check_inputs(std::span<const double> c, std::span<const int> T, std::span<const double> Y) {
  if (c.size() != T.size() || c.size() != Y.size()) {
    throw Error(Errc::shape_mismatch, "fit_interaction_ols: inputs differ in length");
  }
  if (c.size() < 5) {
    throw Error(Errc::invalid_argument, "fit_interaction_ols: need at least 5 observations");
  }
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i]) || !std::isfinite(Y[i])) {
      throw Error(Errc::non_finite, "fit_interaction_ols: non-finite value at index " +
                                        std::to_string(i));
    }
    if (T[i] != 0 && T[i] != 1) {
      throw Error(Errc::invalid_argument, "fit_interaction_ols: T must be 0 or 1");
    }
  }
}

RegressionReport rank_deficient_report(std::size_t n) {
  RegressionReport r;
  r.n = n;
  r.dof = n - 4;
  r.beta.fill(kNaN);
  r.se.fill(kNaN);
  r.t.fill(kNaN);
  r.p.fill(kNaN);
  r.rss = kNaN;
  r.rank_deficient = true;
  return r;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json array_json(const std::array<double, 4>& a) {
  nlohmann::json j = nlohmann::json::array();
  for (double v : a) j.push_back(number_or_null(v));
  return j;
}

}  // namespace

RegressionReport fit_interaction_ols(std::span<const double> candidate, std::span<const int> T,
                                     std::span<const double> Y) {
  check_inputs(candidate, T, Y);
  const std::size_t n = candidate.size();
  const auto rows = static_cast<Eigen::Index>(n);

  double mean = 0.0;
  for (double v : candidate) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : candidate) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return rank_deficient_report(n);

  Eigen::MatrixXd X(rows, 4);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double z = (candidate[k] - mean) / sd;
    X(i, 0) = 1.0;
    X(i, 1) = T[k];
    X(i, 2) = z;
    X(i, 3) = z * T[k];
    y(i) = Y[k];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < 4) return rank_deficient_report(n);

  const Eigen::Vector4d beta_z = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta_z;

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::Matrix4d R = qr.matrixR().topLeftCorner(4, 4).triangularView<Eigen::Upper>();
  const Eigen::Matrix4d R_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::Matrix4d::Identity());
  const Eigen::Matrix4d P = qr.colsPermutation().toDenseMatrix().cast<double>();
  const Eigen::Matrix4d xtx_inv_z = P * (R_inv * R_inv.transpose()) * P.transpose();

  // Map coefficients of the z-scored candidate back to the raw candidate.
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
  A(0, 2) = -mean / sd;
  A(1, 3) = -mean / sd;
  A(2, 2) = 1.0 / sd;
  A(3, 3) = 1.0 / sd;
  const Eigen::Vector4d beta = A * beta_z;
  const Eigen::Matrix4d xtx_inv = A * xtx_inv_z * A.transpose();

  RegressionReport r;
  r.n = n;
  r.dof = n - 4;
  r.rss = resid.squaredNorm();
  for (std::size_t j = 0; j < 4; ++j) r.beta[j] = beta(static_cast<Eigen::Index>(j));

  if (r.rss < 1e-12 * static_cast<double>(n)) {
    r.zero_residual = true;
    r.se.fill(0.0);
    r.t.fill(kInf);
    r.p.fill(0.0);
    return r;
  }
  const double sigma2 = r.rss / static_cast<double>(r.dof);
  for (std::size_t j = 0; j < 4; ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    r.se[j] = std::sqrt(sigma2 * xtx_inv(k, k));
    r.t[j] = r.beta[j] / r.se[j];
    r.p[j] = student_t_two_sided_p(r.t[j], static_cast<double>(r.dof));
  }
  return r;
}

PredictiveStrength predictive_strength(const RegressionReport& report) {
  PredictiveStrength s;
  s.t_pred = report.t[kInteraction];
  s.t_prog = report.t[kCandidate];
  if (report.flagged() || s.t_prog == 0.0 || !std::isfinite(s.t_prog) ||
      !std::isfinite(s.t_pred)) {
    s.degenerate = true;
    s.ratio = kInf;
    return s;
  }
  s.ratio = std::abs(s.t_pred / s.t_prog);
  return s;
}

StrengthBounds compute_bounds(std::span<const double> x_prog, std::span<const double> x_pred,
                              std::span<const int> T, std::span<const double> Y) {
  return {predictive_strength(fit_interaction_ols(x_prog, T, Y)),
          predictive_strength(fit_interaction_ols(x_pred, T, Y))};
}

nlohmann::json to_json(const RegressionReport& r) {
  return {{"coefficients", {"intercept", "T", "candidate", "candidate_x_T"}},
          {"beta", array_json(r.beta)},
          {"se", array_json(r.se)},
          {"t", array_json(r.t)},
          {"p", array_json(r.p)},
          {"n", r.n},
          {"dof", r.dof},
          {"rss", number_or_null(r.rss)},
          {"flags", {{"rank_deficient", r.rank_deficient}, {"zero_residual", r.zero_residual}}}};
}

nlohmann::json to_json(const PredictiveStrength& s) {
  return {{"t_pred", number_or_null(s.t_pred)},
          {"t_prog", number_or_null(s.t_prog)},
          {"ratio", number_or_null(s.ratio)},
          {"degenerate", s.degenerate}};
}

}  // namespace predbio
