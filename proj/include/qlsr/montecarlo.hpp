#ifndef QLSR_MONTECARLO_HPP
#define QLSR_MONTECARLO_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlsr/diagnostics.hpp"
#include "qlsr/inference.hpp"
#include "qlsr/kernels.hpp"

namespace qlsr {

// Runs `body(i)` for i in [0, n) over `threads` workers; results must be
// written to per-index slots so the outcome is independent of scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

// Thread-count resolution: explicit value, else QLSR_THREADS, else hardware.
int resolve_threads(int requested);

struct Study1Config {
  Family family = Family::LogNormal;
  std::vector<double> extra;
  double q = 0.25;
  int n = 200;
  int replications = 1000;
  double beta0 = 1.5, beta1 = 0.5, tau0 = 1.0, tau1 = 0.5;
  std::uint64_t seed = 1;
  bool redraw_covariates = true;     // fresh covariates each replication
  bool evaluate_candidates = true;   // cross-family criteria step
  int threads = 0;
};

struct ParamPerformance {
  std::string name;
  double truth = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  double cp = 0.0;
};

struct Study1Report {
  Study1Config config;
  std::vector<ParamPerformance> params;
  // Means over replications of each per-replication descriptive statistic.
  ResidualSummary gcs_means;
  ResidualSummary rq_means;
  // Fraction of replications where each criterion picked the generating
  // family, and whether the three criteria agreed replication by replication.
  double aic_success = 0.0, bic_success = 0.0, aicc_success = 0.0;
  bool selections_identical = true;
  int candidate_fit_failures = 0;
  int dropped = 0;
  int completed = 0;
};

Study1Report run_study1(const Study1Config& cfg);

struct Study2Config {
  Family family = Family::LogNormal;
  std::vector<double> extra;
  double q = 0.5;
  int n = 200;
  int replications = 2000;
  int r = 3;  // number of leading slope coefficients fixed to 0 under H0
  std::vector<double> alphas = {0.01, 0.05, 0.10};
  std::vector<double> deltas = {0.0, 1.0, 2.0, 3.0, 4.0};
  double phi = 3.0;
  std::uint64_t seed = 1;
  bool redraw_covariates = true;
  int threads = 0;
};

// Statistic order in Study2Report tables.
enum class Study2Statistic { Wald = 0, LR = 1, Score = 2, ScoreExpected = 3, Gradient = 4 };
constexpr int kStudy2StatisticCount = 5;
std::string_view study2_statistic_name(Study2Statistic s);

struct Study2Report {
  Study2Config config;
  // rates[delta_index][statistic][alpha_index]; delta = 0 rows are the size.
  std::vector<std::array<std::vector<double>, kStudy2StatisticCount>> rates;
  std::vector<int> dropped;  // per delta
  int completed = 0;
};

Study2Report run_study2(const Study2Config& cfg);

struct Aggregates {
  Eigen::VectorXd bias;
  Eigen::VectorXd mse;
  Eigen::VectorXd cp;
};

// Sample-average bias/MSE and interval coverage across replications.
Aggregates aggregate(const std::vector<Eigen::VectorXd>& estimates,
                     const std::vector<Eigen::VectorXd>& lower,
                     const std::vector<Eigen::VectorXd>& upper,
                     const Eigen::VectorXd& truth);

// CSV / JSON serialization (schemas documented in the README).
std::string study1_csv(const Study1Report& report);
std::string study1_json(const Study1Report& report);
std::string study2_csv(const Study2Report& report);
std::string study2_json(const Study2Report& report);

}  // namespace qlsr

#endif
