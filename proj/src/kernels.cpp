#include "qlsr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qlsr/errors.hpp"
#include "qlsr/numeric.hpp"

namespace qlsr {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_cosh(double s) {
  s = std::fabs(s);
  return s + std::log1p(std::exp(-2.0 * s)) - M_LN2;
}

double require_positive(const std::vector<double>& extra, std::size_t i,
                        const char* what) {
  double v = extra.at(i);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidExtraParameter(std::string(what) + " must be > 0, got " +
                                std::to_string(v));
  }
  return v;
}

}  // namespace

int extra_parameter_count(Family family) {
  switch (family) {
    case Family::LogNormal:
      return 0;
    case Family::LogStudentT:
    case Family::LogPowerExponential:
    case Family::LogHyperbolic:
    case Family::LogSlash:
    case Family::ExtendedBirnbaumSaunders:
      return 1;
    case Family::LogContaminatedNormal:
    case Family::ExtendedBirnbaumSaundersT:
      return 2;
  }
  return 0;
}

std::string_view family_tag(Family family) {
  switch (family) {
    case Family::LogNormal:
      return "log-no";
    case Family::LogStudentT:
      return "log-t";
    case Family::LogPowerExponential:
      return "log-pe";
    case Family::LogHyperbolic:
      return "log-hp";
    case Family::LogSlash:
      return "log-sl";
    case Family::LogContaminatedNormal:
      return "log-cn";
    case Family::ExtendedBirnbaumSaunders:
      return "ebs";
    case Family::ExtendedBirnbaumSaundersT:
      return "ebs-t";
  }
  return "?";
}

Family family_from_tag(std::string_view tag) {
  for (Family f : all_families()) {
    if (family_tag(f) == tag) return f;
  }
  throw ParseError("unknown kernel family tag: " + std::string(tag));
}

const std::vector<Family>& all_families() {
  static const std::vector<Family> fams = {
      Family::LogNormal,
      Family::LogStudentT,
      Family::LogPowerExponential,
      Family::LogHyperbolic,
      Family::LogSlash,
      Family::LogContaminatedNormal,
      Family::ExtendedBirnbaumSaunders,
      Family::ExtendedBirnbaumSaundersT,
  };
  return fams;
}

std::vector<double> reference_extras(Family family) {
  switch (family) {
    case Family::LogNormal:
      return {};
    case Family::LogStudentT:
      return {3.0};
    case Family::LogPowerExponential:
      return {0.3};
    case Family::LogHyperbolic:
      return {2.0};
    case Family::LogSlash:
      return {4.0};
    case Family::LogContaminatedNormal:
      return {0.1, 0.2};
    case Family::ExtendedBirnbaumSaunders:
      return {0.5};
    case Family::ExtendedBirnbaumSaundersT:
      return {0.5, 3.0};
  }
  return {};
}

DensityKernel::DensityKernel(Family family, std::vector<double> extra)
    : family_(family), extra_(std::move(extra)) {
  const auto expected = static_cast<std::size_t>(extra_parameter_count(family_));
  if (extra_.size() != expected) {
    std::ostringstream os;
    os << family_tag(family_) << " takes " << expected
       << " extra parameter(s), got " << extra_.size();
    throw InvalidExtraParameter(os.str());
  }
  switch (family_) {
    case Family::LogNormal:
      xi_ = std::exp(-kLogSqrt2Pi);
      log_xi_ = -kLogSqrt2Pi;
      break;
    case Family::LogStudentT: {
      double nu = require_positive(extra_, 0, "log-t theta");
      c0_ = nu;
      c1_ = 0.5 * (nu + 1.0);
      log_xi_ = numeric::lgamma_fn(c1_) - numeric::lgamma_fn(0.5 * nu) -
                0.5 * std::log(nu * M_PI);
      xi_ = std::exp(log_xi_);
      break;
    }
    case Family::LogPowerExponential: {
      double t = extra_.at(0);
      if (!(t > -1.0 && t <= 1.0)) {
        throw InvalidExtraParameter(
            "log-pe theta must lie in (-1, 1], got " + std::to_string(t));
      }
      c0_ = 2.0 / (1.0 + t);  // tail exponent p
      c1_ = 1.0 / (1.0 + t);  // p/2
      log_xi_ = std::log(c0_) - (1.0 + 1.0 / c0_) * M_LN2 -
                numeric::lgamma_fn(1.0 / c0_);
      xi_ = std::exp(log_xi_);
      break;
    }
    case Family::LogHyperbolic:
      c0_ = require_positive(extra_, 0, "log-hp theta");
      break;
    case Family::LogSlash: {
      double t = require_positive(extra_, 0, "log-sl theta");
      c0_ = t + 0.5;        // incomplete-gamma order
      c1_ = 0.5 / t;        // mixing exponent in the sampler/CDF
      break;
    }
    case Family::LogContaminatedNormal: {
      double t1 = extra_.at(0), t2 = extra_.at(1);
      if (!(t1 > 0.0 && t1 < 1.0) || !(t2 > 0.0 && t2 < 1.0)) {
        throw InvalidExtraParameter(
            "log-cn thetas must lie in (0, 1), got (" + std::to_string(t1) +
            ", " + std::to_string(t2) + ")");
      }
      c0_ = t1;
      c1_ = t2;
      c2_ = (1.0 - t1) / t1;
      log_xi_ = std::log(t1) - kLogSqrt2Pi;
      xi_ = std::exp(log_xi_);
      break;
    }
    case Family::ExtendedBirnbaumSaunders: {
      double t = require_positive(extra_, 0, "ebs theta");
      c0_ = 2.0 / (t * t);
      c1_ = 2.0 / t;
      break;
    }
    case Family::ExtendedBirnbaumSaundersT: {
      double t1 = require_positive(extra_, 0, "ebs-t theta1");
      double t2 = require_positive(extra_, 1, "ebs-t theta2");
      c0_ = t2 * t1 * t1;
      c1_ = 0.5 * (t2 + 1.0);
      c2_ = 2.0 / t1;
      break;
    }
  }
  if (xi_ == 0.0) {
    // No standard closed form: normalize by quadrature over the real line.
    try {
      double mass = 2.0 * numeric::integrate_upper(
                              [this](double z) { return std::exp(log_g(z * z)); },
                              0.0, 1e-12, 1e-10);
      if (!std::isfinite(mass) || mass <= 0.0) {
        throw NonIntegrableKernel(describe() + ": generator mass " +
                                  std::to_string(mass));
      }
      xi_ = 1.0 / mass;
      log_xi_ = -std::log(mass);
    } catch (const NonConvergentQuadrature& e) {
      throw NonIntegrableKernel(describe() + ": " + e.what());
    }
  }
}

double DensityKernel::log_g(double u) const {
  if (u < 0.0) throw DomainError("log_g: u must be >= 0");
  switch (family_) {
    case Family::LogNormal:
      return -0.5 * u;
    case Family::LogStudentT:
      return -c1_ * std::log1p(u / c0_);
    case Family::LogPowerExponential:
      return -0.5 * std::pow(u, c1_);
    case Family::LogHyperbolic:
      return -c0_ * std::sqrt(1.0 + u);
    case Family::LogSlash:
      return std::log(numeric::scaled_lower_incgamma(c0_, 0.5 * u));
    case Family::LogContaminatedNormal: {
      double a1 = 0.5 * std::log(c1_) - 0.5 * c1_ * u;
      double a2 = std::log(c2_) - 0.5 * u;
      double m = std::max(a1, a2);
      return m + std::log(std::exp(a1 - m) + std::exp(a2 - m));
    }
    case Family::ExtendedBirnbaumSaunders: {
      double s = std::sqrt(u);
      if (s > 350.0) return -kInf;
      double sh = std::sinh(s);
      return log_cosh(s) - c0_ * sh * sh;
    }
    case Family::ExtendedBirnbaumSaundersT: {
      double s = std::sqrt(u);
      double lq;
      if (s > 19.0) {
        // 4 sinh^2 s = (e^s - e^{-s})^2, taken in logs to dodge overflow.
        double l4sh2 = 2.0 * (s + std::log1p(-std::exp(-2.0 * s)));
        lq = l4sh2 + std::log1p(c0_ * std::exp(-l4sh2));
      } else {
        double sh = std::sinh(s);
        lq = std::log(c0_ + 4.0 * sh * sh);
      }
      return log_cosh(s) - c1_ * lq;
    }
  }
  return 0.0;
}

double DensityKernel::g(double u) const { return std::exp(log_g(u)); }

double DensityKernel::g_prime(double u) const {
  if (u < 0.0) throw DomainError("g_prime: u must be >= 0");
  switch (family_) {
    case Family::LogNormal:
      return -0.5 * std::exp(-0.5 * u);
    case Family::LogStudentT:
      return -(c1_ / c0_) * std::pow(1.0 + u / c0_, -(c1_ + 1.0));
    case Family::LogPowerExponential:
      return -0.5 * c1_ * std::pow(u, c1_ - 1.0) * g(u);
    case Family::LogHyperbolic:
      return -0.5 * c0_ / std::sqrt(1.0 + u) * g(u);
    case Family::LogSlash:
      return -0.5 * numeric::scaled_lower_incgamma(c0_ + 1.0, 0.5 * u);
    case Family::LogContaminatedNormal:
      return -0.5 * (c1_ * std::sqrt(c1_) * std::exp(-0.5 * c1_ * u) +
                     c2_ * std::exp(-0.5 * u));
    case Family::ExtendedBirnbaumSaunders: {
      double s = std::sqrt(u);
      if (s == 0.0) return 0.5 * (1.0 - 2.0 * c0_);
      double sh = std::sinh(s), ch = std::cosh(s);
      return std::exp(-c0_ * sh * sh) * sh * (1.0 - 2.0 * c0_ * ch * ch) /
             (2.0 * s);
    }
    case Family::ExtendedBirnbaumSaundersT: {
      double s = std::sqrt(u);
      if (s == 0.0) {
        return 0.5 * std::pow(c0_, -(c1_ + 1.0)) * (c0_ - 8.0 * c1_);
      }
      double sh = std::sinh(s), ch = std::cosh(s);
      double A = c0_ + 4.0 * sh * sh;
      return std::pow(A, -(c1_ + 1.0)) * sh * (A - 8.0 * c1_ * ch * ch) /
             (2.0 * s);
    }
  }
  return 0.0;
}

double DensityKernel::v_weight(double z) const {
  double u = z * z;
  switch (family_) {
    case Family::LogNormal:
      return 1.0;
    case Family::LogStudentT:
      return 2.0 * c1_ / (c0_ + u);
    case Family::LogPowerExponential:
      return c1_ * std::pow(u, c1_ - 1.0);
    case Family::LogHyperbolic:
      return c0_ / std::sqrt(1.0 + u);
    case Family::LogSlash:
      return numeric::scaled_lower_incgamma(c0_ + 1.0, 0.5 * u) /
             numeric::scaled_lower_incgamma(c0_, 0.5 * u);
    case Family::LogContaminatedNormal: {
      // Factor out the narrow component's exponential; theta2 < 1, so the
      // remaining ratio decays and v -> theta2 in the tail.
      double rt = std::sqrt(c1_);
      double w = std::exp(-0.5 * (1.0 - c1_) * u);
      return (c1_ * rt + c2_ * w) / (rt + c2_ * w);
    }
    case Family::ExtendedBirnbaumSaunders: {
      double s = std::fabs(z);
      double ch = std::cosh(s);
      double t = (s < 1e-8) ? 1.0 : std::tanh(s) / s;
      double v = t * (2.0 * c0_ * ch * ch - 1.0);
      if (!std::isfinite(v)) {
        throw SingularWeight("ebs weight overflow at |z|=" + std::to_string(s));
      }
      return v;
    }
    case Family::ExtendedBirnbaumSaundersT: {
      double s = std::fabs(z);
      double th = std::tanh(s);
      double q = c0_ * (1.0 - th * th) + 4.0 * th * th;
      double t = (s < 1e-8) ? 1.0 : th / s;
      return t * (8.0 * c1_ - q) / q;
    }
  }
  return 0.0;
}

double DensityKernel::v_times_z(double z) const {
  if (z == 0.0) return 0.0;
  if (family_ == Family::LogPowerExponential) {
    // z * u^{c1-1} written as sign(z) |z|^{2 c1 - 1}; exponent >= 0 for the
    // admissible shape range, so this is continuous through zero.
    double mag = c1_ * std::pow(std::fabs(z), 2.0 * c1_ - 1.0);
    return std::copysign(mag, z);
  }
  return z * v_weight(z);
}

double DensityKernel::v_weight_fd(double z) const {
  double u = z * z;
  double gu = g(u);
  if (gu <= 0.0 || !std::isfinite(gu)) {
    throw SingularWeight("v_weight_fd: generator underflowed at u=" +
                         std::to_string(u));
  }
  double h = 1e-6 * (1.0 + u);
  double deriv;
  if (u >= h) {
    deriv = (g(u + h) - g(u - h)) / (2.0 * h);
  } else {
    deriv = (g(u + h) - gu) / h;
  }
  return -2.0 * deriv / gu;
}

void DensityKernel::log_g_and_vz(double z, double* lg, double* vz) const {
  double u = z * z;
  switch (family_) {
    case Family::LogNormal:
      *lg = -0.5 * u;
      *vz = z;
      return;
    case Family::LogStudentT:
      *lg = -c1_ * std::log1p(u / c0_);
      *vz = 2.0 * c1_ * z / (c0_ + u);
      return;
    case Family::LogSlash: {
      double x = 0.5 * u;
      double s0 = numeric::scaled_lower_incgamma(c0_, x);
      double s1 = numeric::scaled_lower_incgamma(c0_ + 1.0, x);
      *lg = std::log(s0);
      *vz = z * s1 / s0;
      return;
    }
    default:
      *lg = log_g(u);
      *vz = v_times_z(z);
      return;
  }
}

double DensityKernel::cdf(double w) const {
  if (std::isnan(w)) return std::numeric_limits<double>::quiet_NaN();
  switch (family_) {
    case Family::LogNormal:
      return numeric::normal_cdf(w);
    case Family::LogStudentT:
      return numeric::student_t_cdf(w, c0_);
    case Family::LogPowerExponential: {
      if (w == 0.0) return 0.5;
      double half = 0.5 * numeric::gamma_p(1.0 / c0_,
                                           0.5 * std::pow(std::fabs(w), c0_));
      return w > 0.0 ? 0.5 + half : 0.5 - half;
    }
    case Family::LogHyperbolic: {
      if (w == 0.0) return 0.5;
      double a = std::fabs(w);
      double half = xi_ * numeric::integrate(
                              [this](double z) { return std::exp(log_g(z * z)); },
                              0.0, a, 1e-14, 1e-12);
      double p = w > 0.0 ? 0.5 + half : 0.5 - half;
      return std::clamp(p, 0.0, 1.0);
    }
    case Family::LogSlash: {
      // Scale mixture of normals: G(w) = int_0^1 Phi(w s^{1/(2 theta)}) ds.
      double p = numeric::integrate(
          [this, w](double s) {
            return numeric::normal_cdf(w * std::pow(s, c1_));
          },
          0.0, 1.0, 1e-14, 1e-12);
      return std::clamp(p, 0.0, 1.0);
    }
    case Family::LogContaminatedNormal:
      return c0_ * numeric::normal_cdf(std::sqrt(c1_) * w) +
             (1.0 - c0_) * numeric::normal_cdf(w);
    case Family::ExtendedBirnbaumSaunders: {
      if (std::fabs(w) > 700.0) return w > 0.0 ? 1.0 : 0.0;
      return numeric::normal_cdf(c1_ * std::sinh(w));
    }
    case Family::ExtendedBirnbaumSaundersT: {
      if (std::fabs(w) > 700.0) return w > 0.0 ? 1.0 : 0.0;
      double theta2 = extra_[1];
      return numeric::student_t_cdf(c2_ * std::sinh(w), theta2);
    }
  }
  return 0.0;
}

double DensityKernel::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) {
    throw QuantileOutOfRange("symmetric quantile level must lie in (0,1), got " +
                             std::to_string(q));
  }
  if (q == 0.5) return 0.0;
  switch (family_) {
    case Family::LogNormal:
      return numeric::normal_quantile(q);
    case Family::LogStudentT:
      return numeric::student_t_quantile(q, c0_);
    case Family::ExtendedBirnbaumSaunders:
      return std::asinh(numeric::normal_quantile(q) / c1_);
    case Family::ExtendedBirnbaumSaundersT:
      return std::asinh(numeric::student_t_quantile(q, extra_[1]) / c2_);
    default:
      return numeric::invert_cdf([this](double w) { return cdf(w); }, q, 1e-10);
  }
}

double DensityKernel::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (family_) {
    case Family::LogNormal:
      return normal(rng);
    case Family::LogStudentT: {
      std::student_t_distribution<double> t(c0_);
      return t(rng);
    }
    case Family::LogSlash: {
      double u;
      do {
        u = unif(rng);
      } while (u <= 0.0);
      return normal(rng) * std::pow(u, -c1_);
    }
    case Family::LogContaminatedNormal: {
      double n = normal(rng);
      return unif(rng) < c0_ ? n / std::sqrt(c1_) : n;
    }
    case Family::ExtendedBirnbaumSaunders:
      return std::asinh(normal(rng) / c1_);
    case Family::ExtendedBirnbaumSaundersT: {
      std::student_t_distribution<double> t(extra_[1]);
      return std::asinh(t(rng) / c2_);
    }
    case Family::LogPowerExponential:
    case Family::LogHyperbolic: {
      // No convenient stochastic representation: invert the CDF.
      double u;
      do {
        u = unif(rng);
      } while (u <= 0.0 || u >= 1.0);
      return quantile(u);
    }
  }
  return 0.0;
}

void DensityKernel::sample(Rng& rng, std::span<double> out) const {
  for (double& x : out) x = sample(rng);
}

FisherWeights DensityKernel::fisher_weights(double q) const {
  if (!(q > 0.0 && q < 1.0)) {
    throw QuantileOutOfRange("fisher_weights: q must lie in (0,1)");
  }
  double zq = quantile(q);
  auto density = [this](double z) {
    double lg = log_g(z * z);
    if (lg < -700.0) return 0.0;
    return xi_ * std::exp(lg);
  };
  auto d_integrand = [this, &density](double z) {
    double p = density(z);
    if (p == 0.0) return 0.0;
    double vz = v_times_z(z);
    return vz * vz * p;
  };
  auto f_integrand = [this, &density, zq](double z) {
    double p = density(z);
    if (p == 0.0) return 0.0;
    double t = v_times_z(z) * (z - zq) - 1.0;
    return t * t * p;
  };
  double d = 2.0 * numeric::integrate_upper(d_integrand, 0.0, 1e-12, 1e-9);
  double f = numeric::integrate_upper(f_integrand, 0.0, 1e-12, 1e-9) +
             numeric::integrate_lower(f_integrand, 0.0, 1e-12, 1e-9);
  return {d, f};
}

std::string DensityKernel::describe() const {
  std::ostringstream os;
  os << family_tag(family_);
  if (!extra_.empty()) {
    os << "(";
    for (std::size_t i = 0; i < extra_.size(); ++i) {
      if (i) os << ",";
      os << extra_[i];
    }
    os << ")";
  }
  return os.str();
}

}  // namespace qlsr
