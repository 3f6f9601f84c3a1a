#include "qlsr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qlsr/errors.hpp"
#include "qlsr/numeric.hpp"
#include "qlsr/rng.hpp"

namespace qlsr {

namespace {
constexpr double kClamp = 1e-15;
}

std::vector<double> fitted_cdf_values(const RegressionModel& model,
                                      const FitResult& fit) {
  const auto n = model.n();
  Eigen::VectorXd eta_q = model.X() * fit.theta.beta;
  Eigen::VectorXd eta_d = model.W() * fit.theta.tau;
  std::vector<double> F(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double z = (model.log_y()[i] - eta_q[i]) * std::exp(-0.5 * eta_d[i]) +
               model.z_q();
    double p = model.kernel().cdf(z);
    F[static_cast<std::size_t>(i)] = std::clamp(p, kClamp, 1.0 - kClamp);
  }
  return F;
}

ResidualReport gcs_residuals(const RegressionModel& model,
                             const FitResult& fit) {
  ResidualReport r;
  r.kind = ResidualKind::GCS;
  auto F = fitted_cdf_values(model, fit);
  r.values.resize(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) {
    r.values[i] = -std::log1p(-F[i]);
  }
  r.summary = residual_summary(r.values);
  return r;
}

ResidualReport rq_residuals(const RegressionModel& model,
                            const FitResult& fit) {
  ResidualReport r;
  r.kind = ResidualKind::RQ;
  auto F = fitted_cdf_values(model, fit);
  r.values.resize(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) {
    r.values[i] = numeric::normal_quantile(F[i]);
  }
  r.summary = residual_summary(r.values);
  return r;
}

ResidualSummary residual_summary(const std::vector<double>& values) {
  const auto n = values.size();
  if (n < 2) throw DomainError("residual_summary: need at least 2 values");
  double mean = numeric::mean(values);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    double d = v - mean;
    double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  double dn = static_cast<double>(n);
  m2 /= dn;
  m3 /= dn;
  m4 /= dn;
  if (m2 <= 0.0) {
    throw DegenerateSample("residual_summary: zero variance");
  }
  ResidualSummary s;
  s.mean = mean;
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  s.median = numeric::quantile_sorted(sorted, 0.5);
  s.sd = std::sqrt(m2 * dn / (dn - 1.0));
  s.skewness = m3 / std::pow(m2, 1.5);
  s.kurtosis = m4 / (m2 * m2) - 3.0;
  return s;
}

EnvelopeData qq_envelope(const RegressionModel& model, const FitResult& fit,
                         ResidualKind kind, int sims, double band,
                         std::uint64_t seed) {
  if (!fit.converged) {
    throw NonConvergence("qq_envelope: base fit did not converge");
  }
  if (sims < 19) {
    throw DomainError("qq_envelope: need at least 19 simulations");
  }
  if (!(band >= 0.0 && band < 1.0)) {
    throw DomainError("qq_envelope: band must lie in [0,1)");
  }
  const auto n = model.n();
  const std::size_t un = static_cast<std::size_t>(n);
  Eigen::VectorXd eta_q = model.X() * fit.theta.beta;
  Eigen::VectorXd sp =
      (0.5 * (model.W() * fit.theta.tau).array()).exp().matrix();

  std::vector<std::vector<double>> order_stats(un);
  int failed = 0;
  for (int s = 0; s < sims; ++s) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(s));
    Eigen::VectorXd ysim(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double z = model.kernel().sample(rng);
      ysim[i] = std::exp(eta_q[i] + sp[i] * (z - model.z_q()));
    }
    try {
      RegressionModel sim_model(ysim, model.X(), model.W(), model.q(),
                                model.kernel());
      FitResult sim_fit = qlsr::fit(sim_model);
      if (!sim_fit.converged) {
        ++failed;
        continue;
      }
      ResidualReport rep = kind == ResidualKind::GCS
                               ? gcs_residuals(sim_model, sim_fit)
                               : rq_residuals(sim_model, sim_fit);
      std::sort(rep.values.begin(), rep.values.end());
      for (std::size_t i = 0; i < un; ++i) {
        order_stats[i].push_back(rep.values[i]);
      }
    } catch (const Error&) {
      ++failed;
    }
  }
  if (failed * 5 > sims) {
    throw EnvelopeUnstable("qq_envelope: " + std::to_string(failed) + " of " +
                           std::to_string(sims) + " refits failed");
  }

  EnvelopeData env;
  env.band = band;
  env.simulations = sims;
  env.failed_refits = failed;
  env.theoretical.resize(un);
  env.lower.resize(un);
  env.upper.resize(un);
  ResidualReport observed = kind == ResidualKind::GCS
                                ? gcs_residuals(model, fit)
                                : rq_residuals(model, fit);
  env.ordered = observed.values;
  std::sort(env.ordered.begin(), env.ordered.end());
  for (std::size_t i = 0; i < un; ++i) {
    double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    env.theoretical[i] = kind == ResidualKind::GCS
                             ? -std::log1p(-p)
                             : numeric::normal_quantile(p);
    std::sort(order_stats[i].begin(), order_stats[i].end());
    env.lower[i] = numeric::quantile_sorted(order_stats[i], 0.5 * (1.0 - band));
    env.upper[i] = numeric::quantile_sorted(order_stats[i], 0.5 * (1.0 + band));
  }
  return env;
}

}  // namespace qlsr
