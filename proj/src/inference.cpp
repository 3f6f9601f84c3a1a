#include "qlsr/inference.hpp"

#include <cmath>
#include <string>

#include "qlsr/errors.hpp"
#include "qlsr/numeric.hpp"

namespace qlsr {

namespace {

constexpr double kNegSlack = -1e-8;

void check_hypothesis(const RegressionModel& model, const Hypothesis& h) {
  if (h.indices.empty()) {
    throw DomainError("Hypothesis: no parameter indices given");
  }
  std::vector<bool> seen(static_cast<std::size_t>(model.n_params()), false);
  for (int idx : h.indices) {
    if (idx < 0 || idx >= model.n_params()) {
      throw DomainError("Hypothesis: parameter index out of range");
    }
    if (seen[static_cast<std::size_t>(idx)]) {
      throw DomainError("Hypothesis: duplicate parameter index");
    }
    seen[static_cast<std::size_t>(idx)] = true;
  }
  if (!h.values.empty() && h.values.size() != h.indices.size()) {
    throw DomainError("Hypothesis: values/indices size mismatch");
  }
}

TestResult finish(TestKind kind, double statistic, int df) {
  TestResult r;
  r.kind = kind;
  r.df = df;
  if (statistic < 0.0) {
    r.clamped = statistic < kNegSlack;
    statistic = 0.0;
  }
  r.statistic = statistic;
  r.p_value = numeric::chi_squared_upper_tail(statistic, df);
  return r;
}

FitResult fit_null(const RegressionModel& model, const Hypothesis& h,
                   const FitOptions& options) {
  FitResult r = fit_restricted(model, h.indices, h.values_or_zero(), options);
  if (!r.converged) {
    throw NonConvergence("restricted fit did not converge");
  }
  return r;
}

FitResult fit_full(const RegressionModel& model, const FitOptions& options) {
  FitResult r = fit(model, options);
  if (!r.converged) {
    throw NonConvergence("unrestricted fit did not converge");
  }
  return r;
}

double wald_statistic(const RegressionModel& model, const Hypothesis& h,
                      const FitResult& unrestricted) {
  if (!unrestricted.covariance_ok) {
    throw SingularInformation("wald_test: covariance unavailable");
  }
  const auto r = static_cast<Eigen::Index>(h.indices.size());
  const auto values = h.values_or_zero();
  Eigen::VectorXd d(r);
  Eigen::MatrixXd S(r, r);
  Eigen::VectorXd theta = unrestricted.theta.stacked();
  for (Eigen::Index i = 0; i < r; ++i) {
    d[i] = theta[h.indices[static_cast<std::size_t>(i)]] -
           values[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < r; ++j) {
      S(i, j) = unrestricted.covariance(h.indices[static_cast<std::size_t>(i)],
                                        h.indices[static_cast<std::size_t>(j)]);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!lu.isInvertible()) {
    throw SingularInformation("wald_test: singular marginal covariance");
  }
  return d.dot(lu.solve(d));
}

double score_statistic(const RegressionModel& model, const Hypothesis& h,
                       const FitResult& restricted, InformationKind info_kind,
                       const FisherWeights* weights) {
  Eigen::VectorXd g = score(model, restricted.theta);
  Eigen::MatrixXd info;
  if (info_kind == InformationKind::Expected) {
    info = weights ? expected_information(model, restricted.theta, *weights)
                   : expected_information(model, restricted.theta);
  } else {
    info = observed_information(model, restricted.theta);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (!lu.isInvertible()) {
    throw SingularInformation("score_test: singular information at null fit");
  }
  return g.dot(lu.solve(g));
}

double gradient_statistic(const FitResult& unrestricted,
                          const FitResult& restricted,
                          const RegressionModel& model) {
  Eigen::VectorXd g = score(model, restricted.theta);
  return g.dot(unrestricted.theta.stacked() - restricted.theta.stacked());
}

}  // namespace

std::vector<double> Hypothesis::values_or_zero() const {
  if (!values.empty()) return values;
  return std::vector<double>(indices.size(), 0.0);
}

std::string_view test_kind_name(TestKind kind) {
  switch (kind) {
    case TestKind::Wald:
      return "wald";
    case TestKind::Score:
      return "score";
    case TestKind::ScoreObserved:
      return "score-observed";
    case TestKind::LR:
      return "lr";
    case TestKind::Gradient:
      return "gradient";
  }
  return "?";
}

TestResult wald_test(const RegressionModel& model, const Hypothesis& h,
                     const FitOptions& options) {
  check_hypothesis(model, h);
  FitResult full = fit_full(model, options);
  return finish(TestKind::Wald, wald_statistic(model, h, full),
                static_cast<int>(h.indices.size()));
}

TestResult lr_test(const RegressionModel& model, const Hypothesis& h,
                   const FitOptions& options) {
  check_hypothesis(model, h);
  FitResult full = fit_full(model, options);
  FitResult null = fit_null(model, h, options);
  return finish(TestKind::LR, -2.0 * (null.loglik - full.loglik),
                static_cast<int>(h.indices.size()));
}

TestResult score_test(const RegressionModel& model, const Hypothesis& h,
                      InformationKind information, const FitOptions& options) {
  check_hypothesis(model, h);
  FitResult null = fit_null(model, h, options);
  TestKind kind = information == InformationKind::Expected
                      ? TestKind::Score
                      : TestKind::ScoreObserved;
  return finish(kind, score_statistic(model, h, null, information, nullptr),
                static_cast<int>(h.indices.size()));
}

TestResult gradient_test(const RegressionModel& model, const Hypothesis& h,
                         const FitOptions& options) {
  check_hypothesis(model, h);
  FitResult full = fit_full(model, options);
  FitResult null = fit_null(model, h, options);
  return finish(TestKind::Gradient, gradient_statistic(full, null, model),
                static_cast<int>(h.indices.size()));
}

TestBattery test_battery(const RegressionModel& model, const Hypothesis& h,
                         const FitResult& unrestricted,
                         const FitResult& restricted,
                         const FisherWeights* weights) {
  check_hypothesis(model, h);
  const int df = static_cast<int>(h.indices.size());
  TestBattery b;
  b.wald = finish(TestKind::Wald, wald_statistic(model, h, unrestricted), df);
  b.lr = finish(TestKind::LR,
                -2.0 * (restricted.loglik - unrestricted.loglik), df);
  b.score_expected =
      finish(TestKind::Score,
             score_statistic(model, h, restricted, InformationKind::Expected,
                             weights),
             df);
  b.score_observed =
      finish(TestKind::ScoreObserved,
             score_statistic(model, h, restricted, InformationKind::Observed,
                             nullptr),
             df);
  b.gradient = finish(TestKind::Gradient,
                      gradient_statistic(unrestricted, restricted, model), df);
  return b;
}

std::vector<ConfidenceInterval> confidence_intervals(const FitResult& fit,
                                                     double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw QuantileOutOfRange("confidence_intervals: level must lie in (0,1)");
  }
  if (!fit.covariance_ok) {
    throw SingularInformation("confidence_intervals: covariance unavailable");
  }
  double zc = numeric::normal_quantile(0.5 * (1.0 + level));
  Eigen::VectorXd theta = fit.theta.stacked();
  std::vector<ConfidenceInterval> out(static_cast<std::size_t>(theta.size()));
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double var = fit.covariance(j, j);
    double se = var > 0.0 ? std::sqrt(var) : 0.0;
    out[static_cast<std::size_t>(j)] = {theta[j], se, theta[j] - zc * se,
                                        theta[j] + zc * se};
  }
  return out;
}

InformationCriteria information_criteria(const FitResult& fit, int n, int p) {
  if (n <= p + 1) {
    throw DegenerateAICc("information_criteria: need n > p + 1");
  }
  InformationCriteria ic;
  ic.aic = -2.0 * fit.loglik + 2.0 * p;
  ic.bic = -2.0 * fit.loglik + p * std::log(static_cast<double>(n));
  ic.aicc = ic.aic + 2.0 * p * (p + 1.0) / (n - p - 1.0);
  return ic;
}

}  // namespace qlsr
