#include "qlsr/qls.hpp"

#include <cmath>
#include <string>

#include "qlsr/errors.hpp"

namespace qlsr {

namespace {
constexpr double kCdfClamp = 1e-15;
}

QlsParams::QlsParams(double quantile_value, double dispersion, double level,
                     DensityKernel kernel)
    : q_value_(quantile_value),
      phi_(dispersion),
      level_(level),
      kernel_(std::move(kernel)) {
  if (!(q_value_ > 0.0) || !std::isfinite(q_value_)) {
    throw DomainError("QlsParams: Q must be > 0, got " +
                      std::to_string(q_value_));
  }
  if (!(phi_ > 0.0) || !std::isfinite(phi_)) {
    throw DomainError("QlsParams: phi must be > 0, got " +
                      std::to_string(phi_));
  }
  if (!(level_ > 0.0 && level_ < 1.0)) {
    throw QuantileOutOfRange("QlsParams: q must lie in (0,1), got " +
                             std::to_string(level_));
  }
  z_q_ = kernel_.quantile(level_);
  log_lambda_ = std::log(q_value_) - std::sqrt(phi_) * z_q_;
  lambda_ = std::exp(log_lambda_);
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) {
    throw DomainError("QlsParams: derived scale is not positive-finite");
  }
}

double qls_pdf(const QlsParams& p, double y) {
  if (!(y > 0.0)) throw DomainError("qls_pdf: y must be > 0");
  double sp = std::sqrt(p.phi_);
  double z = (std::log(y) - p.log_lambda_) / sp;
  double lg = p.kernel_.log_g(z * z);
  double log_pdf = p.kernel_.log_normalizing_constant() + lg - std::log(sp) -
                   std::log(y);
  return std::exp(log_pdf);
}

double qls_cdf(const QlsParams& p, double y) {
  if (!(y > 0.0)) throw DomainError("qls_cdf: y must be > 0");
  double z = (std::log(y) - p.log_lambda_) / std::sqrt(p.phi_);
  double F = p.kernel_.cdf(z);
  if (F < kCdfClamp) return kCdfClamp;
  if (F > 1.0 - kCdfClamp) return 1.0 - kCdfClamp;
  return F;
}

double qls_quantile(const QlsParams& p, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw QuantileOutOfRange("qls_quantile: prob must lie in (0,1)");
  }
  if (prob == p.level_) return p.q_value_;
  return std::exp(p.log_lambda_ +
                  std::sqrt(p.phi_) * p.kernel_.quantile(prob));
}

void qls_sample(const QlsParams& p, Rng& rng, std::span<double> out) {
  double sp = std::sqrt(p.dispersion());
  double ll = std::log(p.quantile_value()) - sp * p.z_q();
  for (double& y : out) {
    y = std::exp(ll + sp * p.kernel().sample(rng));
  }
}

std::vector<double> qls_sample(const QlsParams& p, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  qls_sample(p, rng, out);
  return out;
}

QlsParams scale_law(const QlsParams& p, double c) {
  if (!(c > 0.0)) throw DomainError("scale_law: c must be > 0");
  return QlsParams(c * p.quantile_value(), p.dispersion(), p.level(),
                   p.kernel());
}

QlsParams power_law(const QlsParams& p, double c) {
  if (!(c > 0.0)) throw DomainError("power_law: c must be > 0");
  return QlsParams(std::pow(p.quantile_value(), c), c * c * p.dispersion(),
                   p.level(), p.kernel());
}

}  // namespace qlsr
