#pragma once

namespace predbio {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
/// `one_minus_x` is passed separately so callers can avoid cancellation.
double regularized_incomplete_beta(double a, double b, double x, double one_minus_x);
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// P(|T| >= |t|).
double student_t_two_sided_p(double t, double dof);

}  // namespace predbio
