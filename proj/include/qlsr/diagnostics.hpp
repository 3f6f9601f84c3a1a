#ifndef QLSR_DIAGNOSTICS_HPP
#define QLSR_DIAGNOSTICS_HPP

#include <cstdint>
#include <vector>

#include "qlsr/regress.hpp"

namespace qlsr {

enum class ResidualKind { GCS, RQ };

struct ResidualSummary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;        // n-1 divisor
  double skewness = 0.0;  // m3 / m2^{3/2}
  double kurtosis = 0.0;  // excess: m4 / m2^2 - 3
};

struct ResidualReport {
  ResidualKind kind;
  std::vector<double> values;
  ResidualSummary summary;
};

// Fitted-model CDF values F(y_i; Q_i, phi_i), clamped to [1e-15, 1-1e-15].
std::vector<double> fitted_cdf_values(const RegressionModel& model,
                                      const FitResult& fit);

// -log(1 - F_i); EXP(1) reference under a correct model.
ResidualReport gcs_residuals(const RegressionModel& model,
                             const FitResult& fit);

// Phi^{-1}(F_i); N(0,1) reference under a correct model.
ResidualReport rq_residuals(const RegressionModel& model,
                            const FitResult& fit);

ResidualSummary residual_summary(const std::vector<double>& values);

struct EnvelopeData {
  std::vector<double> theoretical;  // reference-law quantiles
  std::vector<double> ordered;      // observed residuals, ascending
  std::vector<double> lower;
  std::vector<double> upper;
  double band = 0.0;
  int simulations = 0;
  int failed_refits = 0;
};

// Simulates `sims` datasets from the fitted model, refits each, and returns
// pointwise order-statistic bands at levels (1-band)/2 and (1+band)/2.
// Throws EnvelopeUnstable when more than 20% of refits fail.
EnvelopeData qq_envelope(const RegressionModel& model, const FitResult& fit,
                         ResidualKind kind, int sims, double band,
                         std::uint64_t seed);

}  // namespace qlsr

#endif
