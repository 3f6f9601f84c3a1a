#ifndef QLSR_NUMERIC_HPP
#define QLSR_NUMERIC_HPP

#include <functional>
#include <vector>

namespace qlsr::numeric {

// Adaptive Gauss-Kronrod integration (wrappers over GSL QAGS/QAGI with
// per-thread workspaces). All throw NonConvergentQuadrature on failure.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double epsabs = 1e-12, double epsrel = 1e-10);
double integrate_upper(const std::function<double(double)>& f, double a,
                       double epsabs = 1e-12, double epsrel = 1e-10);
double integrate_lower(const std::function<double(double)>& f, double b,
                       double epsabs = 1e-12, double epsrel = 1e-10);

// Standard normal distribution.
double normal_cdf(double x);
double normal_quantile(double p);

// Student-t with (possibly non-integer) nu > 0 degrees of freedom.
double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

// Upper tail P(X > x) for X ~ chi^2_df, and its inverse.
double chi_squared_upper_tail(double x, double df);
double chi_squared_upper_quantile(double alpha, double df);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
double lgamma_fn(double a);

// g(x) = x^{-a} * gamma(a, x) = integral_0^1 exp(-x t) t^{a-1} dt,
// continuous at x = 0 where it equals 1/a.
double scaled_lower_incgamma(double a, double x);

// Find z with |cdf(z) - p| <= tol by geometric bracket expansion from
// [-1, 1] followed by a bisection/secant hybrid. cdf must be nondecreasing.
double invert_cdf(const std::function<double(double)>& cdf, double p,
                  double tol = 1e-10);

// Empirical quantile with linear interpolation between order statistics
// (R type 7). `sorted` must be ascending and nonempty.
double quantile_sorted(const std::vector<double>& sorted, double p);

double mean(const std::vector<double>& v);

}  // namespace qlsr::numeric

#endif
