#ifndef QLSR_KERNELS_HPP
#define QLSR_KERNELS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qlsr/rng.hpp"

namespace qlsr {

// The eight density-generator families. Each defines a symmetric density
// xi_nc * g(z^2) on the real line; the positive-support law is obtained by
// exponentiation downstream.
enum class Family {
  LogNormal,
  LogStudentT,
  LogPowerExponential,
  LogHyperbolic,
  LogSlash,
  LogContaminatedNormal,
  ExtendedBirnbaumSaunders,
  ExtendedBirnbaumSaundersT,
};

// Number of extra shape parameters the family takes (0, 1 or 2).
int extra_parameter_count(Family family);

// Config/CLI tags: log-no, log-t, log-pe, log-hp, log-sl, log-cn, ebs, ebs-t.
std::string_view family_tag(Family family);
Family family_from_tag(std::string_view tag);
const std::vector<Family>& all_families();

// Shape parameters used for each family when none are given explicitly
// (also the candidate values used in cross-family model comparisons).
std::vector<double> reference_extras(Family family);

struct FisherWeights {
  double d_g;  // E[v(Z)^2 Z^2]
  double f_g;  // E[(v(Z) Z (Z - z_q) - 1)^2]
};

// A density generator with validated shape parameters and its normalizing
// constant. Immutable after construction; safe to share across threads.
class DensityKernel {
 public:
  DensityKernel(Family family, std::vector<double> extra = {});

  Family family() const { return family_; }
  const std::vector<double>& extra() const { return extra_; }

  double normalizing_constant() const { return xi_; }
  double log_normalizing_constant() const { return log_xi_; }

  // Generator g(u), u >= 0, and its derivative. g is positive everywhere;
  // g() may underflow to zero far in the tail, log_g never does.
  double g(double u) const;
  double log_g(double u) const;
  double g_prime(double u) const;

  // v(z) = -2 g'(z^2) / g(z^2), and the products the score needs. v itself
  // may diverge at z=0 for the power-exponential family; v_times_z is the
  // continuous extension with limit 0 there.
  double v_weight(double z) const;
  double v_times_z(double z) const;

  // Finite-difference v (relative step 1e-6 on u); kept for cross-checks.
  double v_weight_fd(double z) const;

  // One pass for the likelihood hot loop: log g(z^2) and v(z)*z.
  void log_g_and_vz(double z, double* lg, double* vz) const;

  // CDF G(w) = xi_nc * integral_{-inf}^{w} g(z^2) dz and its inverse.
  double cdf(double w) const;
  double quantile(double q) const;

  // One draw / n draws from the standard symmetric law S(0,1,g).
  double sample(Rng& rng) const;
  void sample(Rng& rng, std::span<double> out) const;

  // Expectations d_g and f_g at quantile level q (z_q = G^{-1}(q)).
  FisherWeights fisher_weights(double q) const;

  std::string describe() const;  // e.g. "log-t(3)"

 private:
  Family family_;
  std::vector<double> extra_;
  double xi_ = 0.0;
  double log_xi_ = 0.0;
  // Family-specific precomputed constants (see kernels.cpp).
  double c0_ = 0.0, c1_ = 0.0, c2_ = 0.0;
};

inline DensityKernel make_kernel(Family family, std::vector<double> extra = {}) {
  return DensityKernel(family, std::move(extra));
}

}  // namespace qlsr

#endif
