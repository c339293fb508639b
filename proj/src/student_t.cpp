#include "predbio/student_t.hpp"

#include <cmath>
#include <utility>
#include <limits>

#include "predbio/error.hpp"

namespace predbio {

namespace {

// Continued fraction for I_x(a, b); converges quickly for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  return h;
}

// Remainder of Stirling's series: lgamma(x) - [(x - 1/2) log x - x + log(2 pi)/2], x >= 10.
double stirling_remainder(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
}

// lgamma(a + b) - lgamma(a) without the cancellation of two large terms.
double log_gamma_ratio(double a, double b) {
  if (a < 10.0) return std::lgamma(a + b) - std::lgamma(a);
  return (a - 0.5) * std::log1p(b / a) + b * std::log(a + b) - b + stirling_remainder(a + b) -
         stirling_remainder(a);
}

// log B(a, b) with the larger argument placed where the ratio form applies.
double log_beta(double a, double b) {
  if (a < b) std::swap(a, b);
  return std::lgamma(b) - log_gamma_ratio(a, b);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw Error(Errc::invalid_argument, "incomplete beta needs a, b > 0");
  }
  if (std::isnan(x) || x < 0.0 || x > 1.0) {
    throw Error(Errc::invalid_argument, "incomplete beta needs x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (one_minus_x == 0.0) return 1.0;
  const double log_x = x > 0.5 ? std::log1p(-one_minus_x) : std::log(x);
  const double log_1mx = x < 0.5 ? std::log1p(-x) : std::log(one_minus_x);
  const double log_front = a * log_x + b * log_1mx - log_beta(a, b);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

double regularized_incomplete_beta(double a, double b, double x) {
  return regularized_incomplete_beta(a, b, x, 1.0 - x);
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw Error(Errc::invalid_argument, "Student t needs dof > 0");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double x = dof / (dof + t2);
  const double one_minus_x = t2 / (dof + t2);
  return regularized_incomplete_beta(dof / 2.0, 0.5, x, one_minus_x);
}

double student_t_cdf(double t, double dof) {
  const double tail = 0.5 * student_t_two_sided_p(t, dof);
  return t >= 0.0 ? 1.0 - tail : tail;
}

}  // namespace predbio
