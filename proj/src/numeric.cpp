#include "qlsr/numeric.hpp"

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "qlsr/errors.hpp"

namespace qlsr::numeric {

namespace {

// GSL aborts by default; disable once and check status codes instead.
const int g_handler_off = [] {
  gsl_set_error_handler_off();
  return 0;
}();

struct WorkspaceDeleter {
  void operator()(gsl_integration_workspace* w) const {
    gsl_integration_workspace_free(w);
  }
};

gsl_integration_workspace* workspace() {
  thread_local std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter> ws(
      gsl_integration_workspace_alloc(2048));
  return ws.get();
}

double call_fn(double x, void* params) {
  auto* f = static_cast<const std::function<double(double)>*>(params);
  return (*f)(x);
}

void check_status(int status, double err, double result) {
  (void)err;
  if (status != 0 && status != GSL_EROUND) {
    throw NonConvergentQuadrature("quadrature failed: " +
                                  std::string(gsl_strerror(status)) +
                                  " (partial result " + std::to_string(result) + ")");
  }
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double epsabs, double epsrel) {
  gsl_function gf{&call_fn, const_cast<std::function<double(double)>*>(&f)};
  double result = 0.0, abserr = 0.0;
  int status = gsl_integration_qags(&gf, a, b, epsabs, epsrel, 2048,
                                    workspace(), &result, &abserr);
  check_status(status, abserr, result);
  return result;
}

double integrate_upper(const std::function<double(double)>& f, double a,
                       double epsabs, double epsrel) {
  gsl_function gf{&call_fn, const_cast<std::function<double(double)>*>(&f)};
  double result = 0.0, abserr = 0.0;
  int status = gsl_integration_qagiu(&gf, a, epsabs, epsrel, 2048, workspace(),
                                     &result, &abserr);
  check_status(status, abserr, result);
  return result;
}

double integrate_lower(const std::function<double(double)>& f, double b,
                       double epsabs, double epsrel) {
  gsl_function gf{&call_fn, const_cast<std::function<double(double)>*>(&f)};
  double result = 0.0, abserr = 0.0;
  int status = gsl_integration_qagil(&gf, b, epsabs, epsrel, 2048, workspace(),
                                     &result, &abserr);
  check_status(status, abserr, result);
  return result;
}

double normal_cdf(double x) { return gsl_cdf_ugaussian_P(x); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw QuantileOutOfRange("normal_quantile: p must lie in (0,1)");
  }
  return gsl_cdf_ugaussian_Pinv(p);
}

double student_t_cdf(double x, double nu) { return gsl_cdf_tdist_P(x, nu); }

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) {
    throw QuantileOutOfRange("student_t_quantile: p must lie in (0,1)");
  }
  return gsl_cdf_tdist_Pinv(p, nu);
}

double chi_squared_upper_tail(double x, double df) {
  if (x <= 0.0) return 1.0;
  return gsl_cdf_chisq_Q(x, df);
}

double chi_squared_upper_quantile(double alpha, double df) {
  if (alpha >= 1.0) return 0.0;
  if (!(alpha > 0.0)) {
    throw QuantileOutOfRange("chi_squared_upper_quantile: alpha must be > 0");
  }
  return gsl_cdf_chisq_Qinv(alpha, df);
}

double gamma_p(double a, double x) { return gsl_sf_gamma_inc_P(a, x); }

double lgamma_fn(double a) { return gsl_sf_lngamma(a); }

double scaled_lower_incgamma(double a, double x) {
  if (x < 0.0) throw DomainError("scaled_lower_incgamma: x < 0");
  if (x < 0.5) {
    // Alternating series sum_k (-x)^k / (k! (a+k)); terms shrink fast for x<1/2.
    double term = 1.0, sum = 1.0 / a;
    for (int k = 1; k < 64; ++k) {
      term *= -x / k;
      double add = term / (a + k);
      sum += add;
      if (std::fabs(add) < 1e-17 * std::fabs(sum)) break;
    }
    return sum;
  }
  // x^{-a} gamma(a,x) = Gamma(a) P(a,x) x^{-a}, stable for moderate/large x.
  return std::exp(lgamma_fn(a) + std::log(gamma_p(a, x)) - a * std::log(x));
}

double invert_cdf(const std::function<double(double)>& cdf, double p,
                  double tol) {
  if (!(p > 0.0 && p < 1.0)) {
    throw QuantileOutOfRange("invert_cdf: p must lie in (0,1)");
  }
  double lo = -1.0, hi = 1.0;
  double flo = cdf(lo), fhi = cdf(hi);
  for (int i = 0; i < 2048 && flo > p; ++i) {
    hi = lo;
    fhi = flo;
    lo *= 2.0;
    flo = cdf(lo);
  }
  for (int i = 0; i < 2048 && fhi < p; ++i) {
    lo = hi;
    flo = fhi;
    hi *= 2.0;
    fhi = cdf(hi);
  }
  if (flo > p || fhi < p) {
    throw NonConvergentQuadrature("invert_cdf: failed to bracket level");
  }
  // Bisection with a secant proposal when it stays inside the bracket.
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    double fx = cdf(x);
    if (std::fabs(fx - p) <= tol) return x;
    if (fx < p) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
    double secant = (fhi > flo)
                        ? lo + (p - flo) * (hi - lo) / (fhi - flo)
                        : 0.5 * (lo + hi);
    double width = hi - lo;
    if (secant <= lo + 0.01 * width || secant >= hi - 0.01 * width) {
      secant = 0.5 * (lo + hi);
    }
    x = secant;
    if (width < 1e-15 * (1.0 + std::fabs(x))) return x;
  }
  return x;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile_sorted: empty sample");
  if (sorted.size() == 1) return sorted[0];
  double h = p * (static_cast<double>(sorted.size()) - 1.0);
  auto i = static_cast<std::size_t>(std::floor(h));
  if (i >= sorted.size() - 1) return sorted.back();
  double w = h - static_cast<double>(i);
  return sorted[i] * (1.0 - w) + sorted[i + 1] * w;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace qlsr::numeric
