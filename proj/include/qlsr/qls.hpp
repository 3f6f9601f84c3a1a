#ifndef QLSR_QLS_HPP
#define QLSR_QLS_HPP

#include <span>
#include <vector>

#include "qlsr/kernels.hpp"
#include "qlsr/rng.hpp"

namespace qlsr {

// A positive-support law parameterized by the value Q of its 100q-th
// quantile, a dispersion parameter phi, and a density-generator kernel.
// Internally the scale is lambda = Q * exp(-sqrt(phi) * z_q).
class QlsParams {
 public:
  QlsParams(double quantile_value, double dispersion, double level,
            DensityKernel kernel);

  double quantile_value() const { return q_value_; }   // Q
  double dispersion() const { return phi_; }           // phi
  double level() const { return level_; }              // q
  const DensityKernel& kernel() const { return kernel_; }

  double scale() const { return lambda_; }             // lambda
  double z_q() const { return z_q_; }

 private:
  double q_value_;
  double phi_;
  double level_;
  DensityKernel kernel_;
  double z_q_;
  double lambda_;
  double log_lambda_;

  friend double qls_pdf(const QlsParams&, double);
  friend double qls_cdf(const QlsParams&, double);
  friend double qls_quantile(const QlsParams&, double);
};

double qls_pdf(const QlsParams& p, double y);

// CDF evaluated at the signed standardized value; clamped to
// [1e-15, 1-1e-15] so downstream log / normal-quantile transforms stay finite.
double qls_cdf(const QlsParams& p, double y);

double qls_quantile(const QlsParams& p, double prob);

std::vector<double> qls_sample(const QlsParams& p, std::size_t n, Rng& rng);
void qls_sample(const QlsParams& p, Rng& rng, std::span<double> out);

// Distribution of c*Y: scales Q, leaves phi alone.
QlsParams scale_law(const QlsParams& p, double c);

// Distribution of Y^c: raises Q to c, multiplies phi by c^2.
QlsParams power_law(const QlsParams& p, double c);

}  // namespace qlsr

#endif
