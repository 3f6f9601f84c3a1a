#include "qlsr/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qlsr/errors.hpp"

namespace qlsr {

namespace {

constexpr double kArmijoC1 = 1e-4;

// Objective/gradient evaluation over the free coordinates of theta.
// Returns false when the likelihood is not finite at theta.
bool evaluate(const RegressionModel& m, const Eigen::VectorXd& theta,
              double* ll, Eigen::VectorXd* grad) {
  const auto nb = m.n_beta();
  const auto n = m.n();
  Eigen::VectorXd eta_q = m.X() * theta.head(nb);
  Eigen::VectorXd eta_d = m.W() * theta.tail(m.n_tau());
  const double zq = m.z_q();
  double acc = 0.0;
  Eigen::VectorXd wb, wt, zmq;
  if (grad) {
    wb.resize(n);
    wt.resize(n);
  }
  const DensityKernel& kernel = m.kernel();
  for (Eigen::Index i = 0; i < n; ++i) {
    double half_eta = 0.5 * eta_d[i];
    if (half_eta > 350.0 || half_eta < -350.0) return false;
    double inv_sp = std::exp(-half_eta);
    double z = (m.log_y()[i] - eta_q[i]) * inv_sp + zq;
    double lg, vz;
    kernel.log_g_and_vz(z, &lg, &vz);
    if (!std::isfinite(lg) || (grad && !std::isfinite(vz))) return false;
    acc += lg - half_eta;
    if (grad) {
      wb[i] = vz * inv_sp;
      wt[i] = 0.5 * (vz * (z - zq) - 1.0);
    }
  }
  if (!std::isfinite(acc)) return false;
  *ll = acc;
  if (grad) {
    grad->resize(m.n_params());
    grad->head(nb) = m.X().transpose() * wb;
    grad->tail(m.n_tau()) = m.W().transpose() * wt;
    if (!grad->allFinite()) return false;
  }
  return true;
}

struct MaximizeResult {
  Eigen::VectorXd theta;
  double ll = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

// BFGS (inverse-Hessian form) with Armijo backtracking on the negative
// log-likelihood over the free coordinates listed in `free_idx`.
MaximizeResult maximize(const RegressionModel& m, Eigen::VectorXd theta0,
                        const std::vector<Eigen::Index>& free_idx,
                        const FitOptions& opt) {
  const auto p = static_cast<Eigen::Index>(free_idx.size());
  Eigen::VectorXd theta = std::move(theta0);

  auto eval = [&](const Eigen::VectorXd& full, double* f,
                  Eigen::VectorXd* gfree) -> bool {
    double ll;
    Eigen::VectorXd gfull;
    if (!evaluate(m, full, &ll, gfree ? &gfull : nullptr)) return false;
    *f = -ll;
    if (gfree) {
      gfree->resize(p);
      for (Eigen::Index j = 0; j < p; ++j) (*gfree)[j] = -gfull[free_idx[j]];
    }
    return true;
  };

  double f;
  Eigen::VectorXd g(p);
  if (!eval(theta, &f, &g)) {
    throw NonFiniteLikelihood("log-likelihood not finite at starting values");
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(p, p);
  bool first_update = true;
  MaximizeResult out;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd d = -(H * g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      first_update = true;
      d = -g;
      slope = g.dot(d);
      if (!(slope < 0.0)) break;  // zero gradient handled above
    }
    double alpha = 1.0;
    double f_new = 0.0;
    Eigen::VectorXd theta_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      theta_new = theta;
      for (Eigen::Index j = 0; j < p; ++j) {
        theta_new[free_idx[j]] += alpha * d[j];
      }
      if (eval(theta_new, &f_new, nullptr) &&
          f_new <= f + kArmijoC1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No progress possible along this direction at machine precision.
      break;
    }
    Eigen::VectorXd g_new(p);
    double f_check;
    if (!eval(theta_new, &f_check, &g_new)) break;
    Eigen::VectorXd s = alpha * d;
    Eigen::VectorXd yv = g_new - g;
    double sy = s.dot(yv);
    if (sy > 1e-14 * s.norm() * yv.norm()) {
      if (first_update) {
        H = (sy / yv.squaredNorm()) * Eigen::MatrixXd::Identity(p, p);
        first_update = false;
      }
      Eigen::VectorXd Hy = H * yv;
      double rho = 1.0 / sy;
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      H -= rho * (s * Hy.transpose() + Hy * s.transpose());
      H += rho * (rho * yv.dot(Hy) + 1.0) * (s * s.transpose());
    }
    double df = f - f_new;
    theta = std::move(theta_new);
    f = f_new;
    g = std::move(g_new);
    // Accept the relative-change stop only once the score is genuinely small;
    // a tiny Armijo step with a large gradient is slow progress, not an
    // optimum, and stopping there inflates downstream Monte Carlo spread.
    if (df <= opt.loglik_rel_tol * (std::fabs(f) + 1.0) &&
        g.lpNorm<Eigen::Infinity>() < 1e-6 * (1.0 + std::fabs(f))) {
      out.converged = true;
      ++it;
      break;
    }
  }
  if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tol) out.converged = true;
  out.theta = std::move(theta);
  out.ll = -f;
  out.grad = -g;
  out.iterations = it;
  return out;
}

std::vector<Eigen::Index> all_indices(Eigen::Index p) {
  std::vector<Eigen::Index> idx(p);
  for (Eigen::Index i = 0; i < p; ++i) idx[i] = i;
  return idx;
}

FitResult finalize_fit(const RegressionModel& model, const MaximizeResult& mr,
                       const FitOptions& options) {
  FitResult r;
  r.theta = ParamVector::from_stacked(mr.theta, model.n_beta());
  r.extra = model.kernel().extra();
  r.loglik = mr.ll + static_cast<double>(model.n()) *
                         model.kernel().log_normalizing_constant();
  r.gradient_norm = mr.grad.lpNorm<Eigen::Infinity>();
  r.iterations = mr.iterations;
  r.converged = mr.converged;
  Eigen::MatrixXd info;
  try {
    info = options.expected_information_covariance
               ? expected_information(model, r.theta)
               : observed_information(model, r.theta);
  } catch (const Error&) {
    r.covariance_ok = false;
    return r;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (lu.isInvertible()) {
    r.covariance = lu.inverse();
    r.covariance_ok = r.covariance.allFinite();
  }
  return r;
}

}  // namespace

RegressionModel::RegressionModel(Eigen::VectorXd y, Eigen::MatrixXd X,
                                 Eigen::MatrixXd W, double q,
                                 DensityKernel kernel)
    : y_(std::move(y)),
      X_(std::move(X)),
      W_(std::move(W)),
      q_(q),
      kernel_(std::move(kernel)) {
  const auto n = y_.size();
  if (X_.rows() != n || W_.rows() != n) {
    throw DomainError("RegressionModel: design row count != response length");
  }
  if (n <= X_.cols() + W_.cols()) {
    throw RankDeficientDesign("RegressionModel: need n > k+l+2 observations");
  }
  if (!(q_ > 0.0 && q_ < 1.0)) {
    throw QuantileOutOfRange("RegressionModel: q must lie in (0,1)");
  }
  if ((y_.array() <= 0.0).any() || !y_.allFinite()) {
    throw DomainError("RegressionModel: responses must be strictly positive");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrx(X_);
  if (qrx.rank() < X_.cols()) {
    throw RankDeficientDesign("RegressionModel: X is rank deficient");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrw(W_);
  if (qrw.rank() < W_.cols()) {
    throw RankDeficientDesign("RegressionModel: W is rank deficient");
  }
  log_y_ = y_.array().log().matrix();
  z_q_ = kernel_.quantile(q_);
}

RegressionModel RegressionModel::with_kernel(DensityKernel kernel) const {
  return RegressionModel(y_, X_, W_, q_, std::move(kernel));
}

Eigen::VectorXd ParamVector::stacked() const {
  Eigen::VectorXd out(beta.size() + tau.size());
  out << beta, tau;
  return out;
}

ParamVector ParamVector::from_stacked(const Eigen::VectorXd& theta,
                                      Eigen::Index n_beta) {
  ParamVector p;
  p.beta = theta.head(n_beta);
  p.tau = theta.tail(theta.size() - n_beta);
  return p;
}

double loglik(const RegressionModel& model, const ParamVector& theta) {
  double ll;
  if (!evaluate(model, theta.stacked(), &ll, nullptr)) {
    throw NonFiniteLikelihood("log-likelihood not finite at given parameters");
  }
  return ll;
}

double full_loglik(const RegressionModel& model, const ParamVector& theta) {
  return loglik(model, theta) + static_cast<double>(model.n()) *
                                    model.kernel().log_normalizing_constant();
}

Eigen::VectorXd score(const RegressionModel& model, const ParamVector& theta) {
  double ll;
  Eigen::VectorXd g;
  if (!evaluate(model, theta.stacked(), &ll, &g)) {
    throw NonFiniteLikelihood("score not finite at given parameters");
  }
  return g;
}

Eigen::MatrixXd expected_information(const RegressionModel& model,
                                     const ParamVector& theta,
                                     const FisherWeights& weights) {
  const auto nb = model.n_beta();
  const auto nt = model.n_tau();
  Eigen::VectorXd inv_phi =
      (-(model.W() * theta.tau).array()).exp().matrix();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(nb + nt, nb + nt);
  info.topLeftCorner(nb, nb) =
      weights.d_g * model.X().transpose() * inv_phi.asDiagonal() * model.X();
  info.bottomRightCorner(nt, nt) =
      0.25 * weights.f_g * model.W().transpose() * model.W();
  return info;
}

Eigen::MatrixXd expected_information(const RegressionModel& model,
                                     const ParamVector& theta) {
  return expected_information(model, theta,
                              model.kernel().fisher_weights(model.q()));
}

Eigen::MatrixXd observed_information(const RegressionModel& model,
                                     const ParamVector& theta) {
  const Eigen::VectorXd th = theta.stacked();
  const auto p = th.size();
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd J(p, p);
  Eigen::VectorXd tp, tm;
  for (Eigen::Index j = 0; j < p; ++j) {
    double h = base * (1.0 + std::fabs(th[j]));
    tp = th;
    tp[j] += h;
    tm = th;
    tm[j] -= h;
    double ll;
    Eigen::VectorXd gp, gm;
    if (!evaluate(model, tp, &ll, &gp) || !evaluate(model, tm, &ll, &gm)) {
      throw NonFiniteLikelihood(
          "observed_information: likelihood not finite near theta");
    }
    J.col(j) = -(gp - gm) / (2.0 * h);
  }
  return 0.5 * (J + J.transpose());
}

ParamVector init_params(const RegressionModel& model) {
  ParamVector p;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(model.X());
  p.beta = qr.solve(model.log_y());
  Eigen::VectorXd resid = model.log_y() - model.X() * p.beta;
  double ms = resid.squaredNorm() / static_cast<double>(model.n());
  ms = std::max(ms, 1e-300);
  p.tau = Eigen::VectorXd::Zero(model.n_tau());
  p.tau[0] = std::log(ms);
  // Move the location intercept from the median scale to the q-quantile
  // scale; exact stationary point for the log-normal kernel.
  p.beta[0] += std::sqrt(ms) * model.z_q();
  return p;
}

FitResult fit(const RegressionModel& model, const FitOptions& options) {
  Eigen::VectorXd theta0 = init_params(model).stacked();
  MaximizeResult mr =
      maximize(model, std::move(theta0), all_indices(model.n_params()), options);
  return finalize_fit(model, mr, options);
}

FitResult fit_restricted(const RegressionModel& model,
                         const std::vector<int>& fixed_indices,
                         const std::vector<double>& fixed_values,
                         const FitOptions& options) {
  if (fixed_indices.size() != fixed_values.size()) {
    throw DomainError("fit_restricted: indices/values size mismatch");
  }
  const auto p = model.n_params();
  std::vector<bool> fixed(static_cast<std::size_t>(p), false);
  for (int idx : fixed_indices) {
    if (idx < 0 || idx >= p) {
      throw DomainError("fit_restricted: parameter index out of range");
    }
    fixed[static_cast<std::size_t>(idx)] = true;
  }

  // Restricted least-squares start: regress the offset-adjusted response on
  // the free quantile-predictor columns.
  const auto nb = model.n_beta();
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < fixed_indices.size(); ++i) {
    theta0[fixed_indices[i]] = fixed_values[i];
  }
  std::vector<Eigen::Index> free_beta, free_idx;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!fixed[static_cast<std::size_t>(j)]) {
      free_idx.push_back(j);
      if (j < nb) free_beta.push_back(j);
    }
  }
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(model.n());
  for (Eigen::Index j = 0; j < nb; ++j) {
    if (fixed[static_cast<std::size_t>(j)]) {
      offset += theta0[j] * model.X().col(j);
    }
  }
  Eigen::VectorXd resid = model.log_y() - offset;
  if (!free_beta.empty()) {
    Eigen::MatrixXd Xf(model.n(), static_cast<Eigen::Index>(free_beta.size()));
    for (std::size_t j = 0; j < free_beta.size(); ++j) {
      Xf.col(static_cast<Eigen::Index>(j)) = model.X().col(free_beta[j]);
    }
    Eigen::VectorXd bf = Xf.colPivHouseholderQr().solve(resid);
    for (std::size_t j = 0; j < free_beta.size(); ++j) {
      theta0[free_beta[j]] = bf[static_cast<Eigen::Index>(j)];
    }
    resid -= Xf * bf;
  }
  double ms = std::max(resid.squaredNorm() / static_cast<double>(model.n()),
                       1e-300);
  if (!fixed[static_cast<std::size_t>(nb)]) {
    theta0[nb] = std::log(ms);
  }
  if (!fixed[0]) {
    theta0[0] += std::sqrt(ms) * model.z_q();
  }

  MaximizeResult mr = maximize(model, std::move(theta0), free_idx, options);
  return finalize_fit(model, mr, options);
}

ProfileResult profile_extra_parameter(
    const RegressionModel& model, const std::vector<std::vector<double>>& grid,
    const FitOptions& options) {
  if (grid.empty()) {
    throw DomainError("profile_extra_parameter: empty grid");
  }
  ProfileResult out;
  bool have_best = false;
  bool best_converged = false;
  for (const auto& extras : grid) {
    ProfilePoint pt;
    pt.extra = extras;
    try {
      RegressionModel candidate =
          model.with_kernel(DensityKernel(model.kernel().family(), extras));
      FitResult fr = fit(candidate, options);
      pt.loglik = fr.loglik;
      pt.converged = fr.converged;
      // Converged fits outrank non-converged ones; ties keep the earlier
      // (smaller) grid entry.
      bool better =
          !have_best ||
          (fr.converged && !best_converged) ||
          (fr.converged == best_converged && fr.loglik > out.best.loglik);
      if (better) {
        out.best = std::move(fr);
        have_best = true;
        best_converged = pt.converged;
      }
    } catch (const Error&) {
      pt.failed = true;
    }
    out.points.push_back(std::move(pt));
  }
  if (!have_best) {
    throw AllGridPointsFailed(
        "profile_extra_parameter: no grid point produced a fit");
  }
  return out;
}

std::vector<std::vector<double>> default_extra_grid(Family family) {
  std::vector<std::vector<double>> grid;
  switch (family) {
    case Family::LogNormal:
      grid.push_back({});
      break;
    case Family::LogStudentT:
    case Family::LogSlash:
      for (int i = 1; i <= 10; ++i) grid.push_back({static_cast<double>(i)});
      break;
    case Family::LogPowerExponential:
      for (int i = -9; i <= 10; ++i) grid.push_back({i / 10.0});
      break;
    case Family::LogHyperbolic:
      for (int i = 1; i <= 10; ++i) grid.push_back({0.5 * i});
      break;
    case Family::LogContaminatedNormal:
      for (int i = 1; i <= 9; ++i) {
        for (int j = 1; j <= 9; ++j) grid.push_back({i / 10.0, j / 10.0});
      }
      break;
    case Family::ExtendedBirnbaumSaunders:
      for (double v : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0}) grid.push_back({v});
      break;
    case Family::ExtendedBirnbaumSaundersT:
      for (double v : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (int j = 1; j <= 10; ++j) grid.push_back({v, static_cast<double>(j)});
      }
      break;
  }
  return grid;
}

}  // namespace qlsr
