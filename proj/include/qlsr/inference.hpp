#ifndef QLSR_INFERENCE_HPP
#define QLSR_INFERENCE_HPP

#include <string>
#include <vector>

#include "qlsr/regress.hpp"

namespace qlsr {

// H0 fixes the listed stacked-parameter coordinates at `values`
// (zeros when `values` is empty).
struct Hypothesis {
  std::vector<int> indices;
  std::vector<double> values;

  std::vector<double> values_or_zero() const;
};

enum class TestKind { Wald, Score, ScoreObserved, LR, Gradient };
std::string_view test_kind_name(TestKind kind);

enum class InformationKind { Expected, Observed };

struct TestResult {
  TestKind kind;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool clamped = false;  // statistic was negative beyond rounding and set to 0
};

// Each test refits as needed: Wald needs the unrestricted fit, score needs
// the restricted one, LR and gradient need both.
TestResult wald_test(const RegressionModel& model, const Hypothesis& h,
                     const FitOptions& options = {});
TestResult lr_test(const RegressionModel& model, const Hypothesis& h,
                   const FitOptions& options = {});
TestResult score_test(const RegressionModel& model, const Hypothesis& h,
                      InformationKind information = InformationKind::Expected,
                      const FitOptions& options = {});
TestResult gradient_test(const RegressionModel& model, const Hypothesis& h,
                         const FitOptions& options = {});

// All five statistics from precomputed fits (the Monte Carlo path).
// `weights` optionally carries precomputed d_g/f_g for the expected-
// information score statistic.
struct TestBattery {
  TestResult wald, lr, score_expected, score_observed, gradient;
};
TestBattery test_battery(const RegressionModel& model, const Hypothesis& h,
                         const FitResult& unrestricted,
                         const FitResult& restricted,
                         const FisherWeights* weights = nullptr);

struct ConfidenceInterval {
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Per-parameter normal-theory intervals from the fit covariance.
std::vector<ConfidenceInterval> confidence_intervals(const FitResult& fit,
                                                     double level);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
  double aicc = 0.0;
};

// From the full log-likelihood; p counts the estimated regression
// coefficients only (grid-profiled shape parameters excluded).
InformationCriteria information_criteria(const FitResult& fit, int n, int p);

}  // namespace qlsr

#endif
