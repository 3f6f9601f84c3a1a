#ifndef QLSR_REGRESS_HPP
#define QLSR_REGRESS_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qlsr/kernels.hpp"

namespace qlsr {

// Quantile regression data: log Q_i = x_i' beta, log phi_i = w_i' tau, with
// the response's 100q-th quantile modeled through the kernel's standard law.
// X and W carry explicit intercept columns. Immutable once constructed.
class RegressionModel {
 public:
  RegressionModel(Eigen::VectorXd y, Eigen::MatrixXd X, Eigen::MatrixXd W,
                  double q, DensityKernel kernel);

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& log_y() const { return log_y_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& W() const { return W_; }
  double q() const { return q_; }
  double z_q() const { return z_q_; }
  const DensityKernel& kernel() const { return kernel_; }

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index n_beta() const { return X_.cols(); }
  Eigen::Index n_tau() const { return W_.cols(); }
  Eigen::Index n_params() const { return X_.cols() + W_.cols(); }

  // Same data and level, different kernel (used by grid profiling and
  // cross-family model comparison).
  RegressionModel with_kernel(DensityKernel kernel) const;

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXd log_y_;
  Eigen::MatrixXd X_;
  Eigen::MatrixXd W_;
  double q_;
  double z_q_;
  DensityKernel kernel_;
};

struct ParamVector {
  Eigen::VectorXd beta;
  Eigen::VectorXd tau;

  Eigen::VectorXd stacked() const;
  static ParamVector from_stacked(const Eigen::VectorXd& theta,
                                  Eigen::Index n_beta);
};

struct FitOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-8;       // max-norm of the score
  double loglik_rel_tol = 1e-12;    // relative change stop
  bool expected_information_covariance = false;
};

struct FitResult {
  ParamVector theta;
  std::vector<double> extra;        // kernel shape parameters used
  double loglik = 0.0;              // full log-likelihood (constant included)
  Eigen::MatrixXd covariance;       // inverse information at the optimum
  bool covariance_ok = false;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Sum of log g(z_i^2) - log(phi_i)/2; the constant n*log(xi_nc) is excluded
// here and added where full likelihoods are compared (FitResult, criteria).
double loglik(const RegressionModel& model, const ParamVector& theta);
double full_loglik(const RegressionModel& model, const ParamVector& theta);

// Analytic score, stacked (d/dbeta..., d/dtau...).
Eigen::VectorXd score(const RegressionModel& model, const ParamVector& theta);

// Block-diagonal expected information diag{X' D X, W' F W / 4}.
Eigen::MatrixXd expected_information(const RegressionModel& model,
                                     const ParamVector& theta);
Eigen::MatrixXd expected_information(const RegressionModel& model,
                                     const ParamVector& theta,
                                     const FisherWeights& weights);

// Negative Hessian via central differences of the analytic score,
// symmetrized.
Eigen::MatrixXd observed_information(const RegressionModel& model,
                                     const ParamVector& theta);

// Least-squares starting values; exact MLE for the log-normal kernel with
// constant dispersion.
ParamVector init_params(const RegressionModel& model);

FitResult fit(const RegressionModel& model, const FitOptions& options = {});

// Maximum likelihood with the listed coordinates of the stacked parameter
// vector held fixed (beta indices 0..k, tau indices k+1..k+l+1).
FitResult fit_restricted(const RegressionModel& model,
                         const std::vector<int>& fixed_indices,
                         const std::vector<double>& fixed_values,
                         const FitOptions& options = {});

struct ProfilePoint {
  std::vector<double> extra;
  double loglik = 0.0;
  bool converged = false;
  bool failed = false;
};

struct ProfileResult {
  FitResult best;
  std::vector<ProfilePoint> points;
};

// Two-step shape estimation: fit theta on every grid point, keep the fit
// with the largest full log-likelihood (ties keep the earlier grid entry).
ProfileResult profile_extra_parameter(const RegressionModel& model,
                                      const std::vector<std::vector<double>>& grid,
                                      const FitOptions& options = {});

// Default shape grids per family (a single empty entry for log-no).
std::vector<std::vector<double>> default_extra_grid(Family family);

}  // namespace qlsr

#endif
