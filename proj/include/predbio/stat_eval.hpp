#pragma once

#include <array>
#include <cstddef>
#include <span>

#include <json.hpp>

namespace predbio {

/// Coefficient order everywhere: intercept, T, candidate, candidate x T.
enum Coef : std::size_t { kIntercept = 0, kTreatment = 1, kCandidate = 2, kInteraction = 3 };

/// OLS fit of Y ~ b0 + bT*T + bc*c + bcT*c*T.
struct RegressionReport {
  std::array<double, 4> beta{};
  std::array<double, 4> se{};
  std::array<double, 4> t{};
  std::array<double, 4> p{};
  std::size_t n = 0;
  std::size_t dof = 0;  // n - 4
  double rss = 0.0;
  bool rank_deficient = false;
  bool zero_residual = false;

  bool flagged() const { return rank_deficient || zero_residual; }
};

/// Relative predictive strength: |t(candidate x T) / t(candidate)|.
struct PredictiveStrength {
  double t_pred = 0.0;
  double t_prog = 0.0;
  double ratio = 0.0;  // +inf sentinel when degenerate
  bool degenerate = false;
};

struct StrengthBounds {
  PredictiveStrength lower;  // candidate = x_prog
  PredictiveStrength upper;  // candidate = x_pred
};

/// Requires equal lengths n >= 5, finite values and T in {0, 1}.
///
/// The candidate is z-scored before building the design matrix and the solution
/// is mapped back to the candidate's own units; t-values of the candidate terms
/// are invariant under that affine change. The system is solved by
/// column-pivoted Householder QR. A constant candidate, a single-arm T or any
/// other rank loss sets `rank_deficient` and leaves beta/se/t/p as NaN. An RSS
/// below 1e-12 * n sets `zero_residual`; beta is still reported, se = 0,
/// t = +inf and p = 0.
RegressionReport fit_interaction_ols(std::span<const double> candidate, std::span<const int> T,
                                     std::span<const double> Y);

PredictiveStrength predictive_strength(const RegressionReport& report);

/// Fits with the ground-truth biomarkers in place of the candidate.
StrengthBounds compute_bounds(std::span<const double> x_prog, std::span<const double> x_pred,
                              std::span<const int> T, std::span<const double> Y);

/// Non-finite numbers are written as null; flags carry their meaning.
nlohmann::json to_json(const RegressionReport& report);
nlohmann::json to_json(const PredictiveStrength& strength);

}  // namespace predbio
