#ifndef QLSR_ERRORS_HPP
#define QLSR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qlsr {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (y <= 0, u < 0, ...).
struct DomainError : Error {
  using Error::Error;
};

// Kernel extra parameter outside its family constraint.
struct InvalidExtraParameter : Error {
  using Error::Error;
};

// Normalizing-constant quadrature failed to converge.
struct NonIntegrableKernel : Error {
  using Error::Error;
};

// g(z^2) underflowed to zero while forming the weight -2 g'/g.
struct SingularWeight : Error {
  using Error::Error;
};

// Requested probability level outside (0,1).
struct QuantileOutOfRange : Error {
  using Error::Error;
};

struct NonConvergentQuadrature : Error {
  using Error::Error;
};

// Log-likelihood evaluated to NaN/Inf; the optimizer backtracks on this.
struct NonFiniteLikelihood : Error {
  using Error::Error;
};

struct RankDeficientDesign : Error {
  using Error::Error;
};

// Every point of a profiling grid failed to produce a usable fit.
struct AllGridPointsFailed : Error {
  using Error::Error;
};

// A fit required by a test/report did not converge.
struct NonConvergence : Error {
  using Error::Error;
};

// Information matrix not invertible where an inverse is required.
struct SingularInformation : Error {
  using Error::Error;
};

struct DegenerateAICc : Error {
  using Error::Error;
};

// Zero-variance sample passed to a moment summary.
struct DegenerateSample : Error {
  using Error::Error;
};

// Too many simulated-envelope refits failed.
struct EnvelopeUnstable : Error {
  using Error::Error;
};

// More than the tolerated share of Monte Carlo replications were dropped.
struct ExcessiveNonConvergence : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

}  // namespace qlsr

#endif
