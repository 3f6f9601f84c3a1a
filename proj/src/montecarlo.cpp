#include "qlsr/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qlsr/csv.hpp"
#include "qlsr/errors.hpp"
#include "qlsr/numeric.hpp"
#include "qlsr/rng.hpp"

namespace qlsr {

using nlohmann::json;

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QLSR_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

constexpr std::uint64_t kCovariateStream = 0xC0FA0B1E5ULL;

// Simulated design + response for one Study-1 replication.
struct SimData {
  Eigen::MatrixXd X, W;
  Eigen::VectorXd y;
};

SimData draw_study1_data(const Study1Config& cfg, const DensityKernel& kernel,
                         double z_q, Rng& cov_rng, Rng& noise_rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = cfg.n;
  SimData d;
  d.X = Eigen::MatrixXd::Ones(n, 2);
  d.W = Eigen::MatrixXd::Ones(n, 2);
  for (int i = 0; i < n; ++i) {
    d.X(i, 1) = unif(cov_rng) < 0.5 ? 1.0 : 0.0;
  }
  for (int i = 0; i < n; ++i) {
    d.W(i, 1) = unif(cov_rng);
  }
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    double log_q = cfg.beta0 + cfg.beta1 * d.X(i, 1);
    double sp = std::exp(0.5 * (cfg.tau0 + cfg.tau1 * d.W(i, 1)));
    d.y[i] = std::exp(log_q + sp * (kernel.sample(noise_rng) - z_q));
  }
  return d;
}

struct Study1Slot {
  bool ok = false;
  Eigen::VectorXd estimate, lower, upper;
  ResidualSummary gcs, rq;
  int selected[3] = {-1, -1, -1};  // AIC, BIC, AICc winners (family index)
  int candidate_failures = 0;
};

void add_summary(ResidualSummary& acc, const ResidualSummary& s) {
  acc.mean += s.mean;
  acc.median += s.median;
  acc.sd += s.sd;
  acc.skewness += s.skewness;
  acc.kurtosis += s.kurtosis;
}

void divide_summary(ResidualSummary& acc, double m) {
  acc.mean /= m;
  acc.median /= m;
  acc.sd /= m;
  acc.skewness /= m;
  acc.kurtosis /= m;
}

}  // namespace

std::string_view study2_statistic_name(Study2Statistic s) {
  switch (s) {
    case Study2Statistic::Wald:
      return "wald";
    case Study2Statistic::LR:
      return "lr";
    case Study2Statistic::Score:
      return "score";
    case Study2Statistic::ScoreExpected:
      return "score-expected";
    case Study2Statistic::Gradient:
      return "gradient";
  }
  return "?";
}

Study1Report run_study1(const Study1Config& cfg) {
  if (cfg.replications < 1) {
    throw DomainError("run_study1: replications must be >= 1");
  }
  const DensityKernel kernel(cfg.family, cfg.extra);
  const double z_q = kernel.quantile(cfg.q);
  const int M = cfg.replications;

  // Candidate kernels for the criteria step: the generating family keeps its
  // configured shape, the others use their reference shapes.
  std::vector<DensityKernel> candidates;
  if (cfg.evaluate_candidates) {
    for (Family f : all_families()) {
      candidates.emplace_back(
          f, f == cfg.family ? cfg.extra : reference_extras(f));
    }
  }

  // A fixed design is drawn once from a dedicated stream.
  SimData fixed;
  if (!cfg.redraw_covariates) {
    Rng cov_rng = substream(cfg.seed, kCovariateStream);
    Rng dummy = cov_rng;
    fixed = draw_study1_data(cfg, kernel, z_q, cov_rng, dummy);
  }

  std::vector<Study1Slot> slots(static_cast<std::size_t>(M));
  parallel_for(M, resolve_threads(cfg.threads), [&](int rep) {
    Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(rep));
    SimData data;
    if (cfg.redraw_covariates) {
      data = draw_study1_data(cfg, kernel, z_q, rng, rng);
    } else {
      data.X = fixed.X;
      data.W = fixed.W;
      data.y.resize(cfg.n);
      for (int i = 0; i < cfg.n; ++i) {
        double log_q = cfg.beta0 + cfg.beta1 * data.X(i, 1);
        double sp = std::exp(0.5 * (cfg.tau0 + cfg.tau1 * data.W(i, 1)));
        data.y[i] = std::exp(log_q + sp * (kernel.sample(rng) - z_q));
      }
    }
    Study1Slot& slot = slots[static_cast<std::size_t>(rep)];
    try {
      RegressionModel model(data.y, data.X, data.W, cfg.q, kernel);
      FitResult fr = fit(model);
      if (!fr.converged || !fr.covariance_ok) return;
      auto cis = confidence_intervals(fr, 0.95);
      auto p = static_cast<Eigen::Index>(cis.size());
      slot.estimate.resize(p);
      slot.lower.resize(p);
      slot.upper.resize(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        slot.estimate[j] = cis[static_cast<std::size_t>(j)].estimate;
        slot.lower[j] = cis[static_cast<std::size_t>(j)].lower;
        slot.upper[j] = cis[static_cast<std::size_t>(j)].upper;
      }
      slot.gcs = gcs_residuals(model, fr).summary;
      slot.rq = rq_residuals(model, fr).summary;
      if (cfg.evaluate_candidates) {
        const int n_params = static_cast<int>(model.n_params());
        double best[3] = {1e300, 1e300, 1e300};
        for (std::size_t c = 0; c < candidates.size(); ++c) {
          try {
            const bool is_generating =
                candidates[c].family() == cfg.family &&
                candidates[c].extra() == cfg.extra;
            FitResult cf =
                is_generating ? fr : fit(model.with_kernel(candidates[c]));
            if (!cf.converged) {
              ++slot.candidate_failures;
              continue;
            }
            auto ic = information_criteria(cf, cfg.n, n_params);
            const double vals[3] = {ic.aic, ic.bic, ic.aicc};
            for (int k = 0; k < 3; ++k) {
              if (vals[k] < best[k]) {
                best[k] = vals[k];
                slot.selected[k] = static_cast<int>(c);
              }
            }
          } catch (const Error&) {
            ++slot.candidate_failures;
          }
        }
      }
      slot.ok = true;
    } catch (const Error&) {
      slot.ok = false;
    }
  });

  // Deterministic reduction in replication order.
  std::vector<Eigen::VectorXd> est, lo, hi;
  Study1Report report;
  report.config = cfg;
  int generating_index = 0;
  for (std::size_t c = 0; c < all_families().size(); ++c) {
    if (all_families()[c] == cfg.family) generating_index = static_cast<int>(c);
  }
  int succ[3] = {0, 0, 0};
  for (const auto& slot : slots) {
    if (!slot.ok) {
      ++report.dropped;
      continue;
    }
    est.push_back(slot.estimate);
    lo.push_back(slot.lower);
    hi.push_back(slot.upper);
    add_summary(report.gcs_means, slot.gcs);
    add_summary(report.rq_means, slot.rq);
    report.candidate_fit_failures += slot.candidate_failures;
    if (cfg.evaluate_candidates) {
      for (int k = 0; k < 3; ++k) {
        if (slot.selected[k] == generating_index) ++succ[k];
      }
      if (slot.selected[0] != slot.selected[1] ||
          slot.selected[0] != slot.selected[2]) {
        report.selections_identical = false;
      }
    }
  }
  report.completed = static_cast<int>(est.size());
  if (report.completed == 0 ||
      report.dropped * 20 > M) {  // > 5% non-convergence
    throw ExcessiveNonConvergence(
        "run_study1: " + std::to_string(report.dropped) + " of " +
        std::to_string(M) + " replications dropped");
  }
  double m = static_cast<double>(report.completed);
  divide_summary(report.gcs_means, m);
  divide_summary(report.rq_means, m);
  if (cfg.evaluate_candidates) {
    report.aic_success = succ[0] / m;
    report.bic_success = succ[1] / m;
    report.aicc_success = succ[2] / m;
  }

  Eigen::VectorXd truth(4);
  truth << cfg.beta0, cfg.beta1, cfg.tau0, cfg.tau1;
  Aggregates agg = aggregate(est, lo, hi, truth);
  const char* names[4] = {"beta0", "beta1", "tau0", "tau1"};
  for (int j = 0; j < 4; ++j) {
    report.params.push_back({names[j], truth[j], agg.bias[j], agg.mse[j],
                             agg.cp[j]});
  }
  return report;
}

Study2Report run_study2(const Study2Config& cfg) {
  if (cfg.replications < 1) {
    throw DomainError("run_study2: replications must be >= 1");
  }
  if (cfg.r < 1 || cfg.r > 3) {
    throw DomainError("run_study2: r must be 1, 2 or 3");
  }
  for (double a : cfg.alphas) {
    if (!(a > 0.0 && a <= 1.0)) {
      throw DomainError("run_study2: alpha levels must lie in (0,1]");
    }
  }
  const DensityKernel kernel(cfg.family, cfg.extra);
  const double z_q = kernel.quantile(cfg.q);
  const FisherWeights fw = kernel.fisher_weights(cfg.q);
  const int M = cfg.replications;
  const int threads = resolve_threads(cfg.threads);

  std::vector<double> critical(cfg.alphas.size());
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
    critical[a] =
        numeric::chi_squared_upper_quantile(cfg.alphas[a], cfg.r);
  }
  Hypothesis h;
  for (int j = 1; j <= cfg.r; ++j) h.indices.push_back(j);

  Eigen::MatrixXd fixed_X;
  if (!cfg.redraw_covariates) {
    Rng cov_rng = substream(cfg.seed, kCovariateStream);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    fixed_X = Eigen::MatrixXd::Ones(cfg.n, 4);
    for (int j = 1; j <= 3; ++j) {
      for (int i = 0; i < cfg.n; ++i) {
        fixed_X(i, j) = unif(cov_rng) < 0.5 ? 1.0 : 0.0;
      }
    }
  }

  Study2Report report;
  report.config = cfg;
  report.rates.resize(cfg.deltas.size());
  report.dropped.assign(cfg.deltas.size(), 0);

  for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
    const double delta = cfg.deltas[d];
    Eigen::VectorXd beta(4);
    beta[0] = 1.0;
    for (int j = 1; j <= 3; ++j) beta[j] = j <= cfg.r ? delta : 1.0;

    struct Slot {
      bool ok = false;
      double stats[kStudy2StatisticCount] = {0, 0, 0, 0, 0};
    };
    std::vector<Slot> slots(static_cast<std::size_t>(M));
    parallel_for(M, threads, [&](int rep) {
      Rng rng = substream(cfg.seed, d * static_cast<std::uint64_t>(M) +
                                        static_cast<std::uint64_t>(rep));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      Eigen::MatrixXd X;
      if (cfg.redraw_covariates) {
        X = Eigen::MatrixXd::Ones(cfg.n, 4);
        for (int j = 1; j <= 3; ++j) {
          for (int i = 0; i < cfg.n; ++i) {
            X(i, j) = unif(rng) < 0.5 ? 1.0 : 0.0;
          }
        }
      } else {
        X = fixed_X;
      }
      Eigen::MatrixXd W = Eigen::MatrixXd::Ones(cfg.n, 1);
      Eigen::VectorXd y(cfg.n);
      double sp = std::sqrt(cfg.phi);
      for (int i = 0; i < cfg.n; ++i) {
        y[i] = std::exp(X.row(i).dot(beta) +
                        sp * (kernel.sample(rng) - z_q));
      }
      Slot& slot = slots[static_cast<std::size_t>(rep)];
      try {
        RegressionModel model(y, X, W, cfg.q, kernel);
        FitResult full = fit(model);
        FitResult null =
            fit_restricted(model, h.indices, h.values_or_zero());
        if (!full.converged || !null.converged || !full.covariance_ok) return;
        TestBattery b = test_battery(model, h, full, null, &fw);
        slot.stats[0] = b.wald.statistic;
        slot.stats[1] = b.lr.statistic;
        slot.stats[2] = b.score_observed.statistic;
        slot.stats[3] = b.score_expected.statistic;
        slot.stats[4] = b.gradient.statistic;
        slot.ok = true;
      } catch (const Error&) {
        slot.ok = false;
      }
    });

    for (int s = 0; s < kStudy2StatisticCount; ++s) {
      report.rates[d][static_cast<std::size_t>(s)].assign(cfg.alphas.size(),
                                                          0.0);
    }
    int completed = 0;
    for (const auto& slot : slots) {
      if (!slot.ok) {
        ++report.dropped[d];
        continue;
      }
      ++completed;
      for (int s = 0; s < kStudy2StatisticCount; ++s) {
        for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
          if (slot.stats[s] > critical[a]) {
            report.rates[d][static_cast<std::size_t>(s)][a] += 1.0;
          }
        }
      }
    }
    if (completed == 0 || report.dropped[d] * 20 > M) {
      throw ExcessiveNonConvergence(
          "run_study2: " + std::to_string(report.dropped[d]) + " of " +
          std::to_string(M) + " replications dropped at delta=" +
          std::to_string(delta));
    }
    for (int s = 0; s < kStudy2StatisticCount; ++s) {
      for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        report.rates[d][static_cast<std::size_t>(s)][a] /= completed;
      }
    }
    report.completed += completed;
  }
  return report;
}

Aggregates aggregate(const std::vector<Eigen::VectorXd>& estimates,
                     const std::vector<Eigen::VectorXd>& lower,
                     const std::vector<Eigen::VectorXd>& upper,
                     const Eigen::VectorXd& truth) {
  if (estimates.empty()) {
    throw DomainError("aggregate: need at least one replication");
  }
  if (estimates.size() != lower.size() || estimates.size() != upper.size()) {
    throw DomainError("aggregate: replication count mismatch");
  }
  const auto p = truth.size();
  Aggregates a;
  a.bias = Eigen::VectorXd::Zero(p);
  a.mse = Eigen::VectorXd::Zero(p);
  a.cp = Eigen::VectorXd::Zero(p);
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    Eigen::VectorXd diff = estimates[r] - truth;
    a.bias += diff;
    a.mse += diff.cwiseProduct(diff);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (lower[r][j] <= truth[j] && truth[j] <= upper[r][j]) a.cp[j] += 1.0;
    }
  }
  double m = static_cast<double>(estimates.size());
  a.bias /= m;
  a.mse /= m;
  a.cp /= m;
  return a;
}

std::string study1_csv(const Study1Report& r) {
  std::ostringstream os;
  os << "table,row,bias,mse,cp\n";
  for (const auto& p : r.params) {
    os << "estimates," << p.name << "," << csv::format_double(p.bias) << ","
       << csv::format_double(p.mse) << "," << csv::format_double(p.cp) << "\n";
  }
  os << "\ntable,kind,mean,median,sd,skewness,kurtosis\n";
  auto resid_row = [&os](const char* kind, const ResidualSummary& s) {
    os << "residuals," << kind << "," << csv::format_double(s.mean) << ","
       << csv::format_double(s.median) << "," << csv::format_double(s.sd)
       << "," << csv::format_double(s.skewness) << ","
       << csv::format_double(s.kurtosis) << "\n";
  };
  resid_row("gcs", r.gcs_means);
  resid_row("rq", r.rq_means);
  if (r.config.evaluate_candidates) {
    os << "\ntable,criterion,success_rate\n";
    os << "criteria,aic," << csv::format_double(r.aic_success) << "\n";
    os << "criteria,bic," << csv::format_double(r.bic_success) << "\n";
    os << "criteria,aicc," << csv::format_double(r.aicc_success) << "\n";
  }
  return os.str();
}

namespace {

json summary_json(const ResidualSummary& s) {
  return json{{"mean", s.mean},
              {"median", s.median},
              {"sd", s.sd},
              {"skewness", s.skewness},
              {"kurtosis", s.kurtosis}};
}

}  // namespace

std::string study1_json(const Study1Report& r) {
  json j;
  j["command"] = "sim-estimation";
  j["family"] = std::string(family_tag(r.config.family));
  j["extra"] = r.config.extra;
  j["q"] = r.config.q;
  j["n"] = r.config.n;
  j["replications"] = r.config.replications;
  j["seed"] = r.config.seed;
  j["dropped"] = r.dropped;
  j["completed"] = r.completed;
  json params = json::array();
  for (const auto& p : r.params) {
    params.push_back({{"name", p.name},
                      {"truth", p.truth},
                      {"bias", p.bias},
                      {"mse", p.mse},
                      {"cp", p.cp}});
  }
  j["estimates"] = params;
  j["residuals"] = {{"gcs", summary_json(r.gcs_means)},
                    {"rq", summary_json(r.rq_means)}};
  if (r.config.evaluate_candidates) {
    j["criteria"] = {{"aic", r.aic_success},
                     {"bic", r.bic_success},
                     {"aicc", r.aicc_success},
                     {"selections_identical", r.selections_identical},
                     {"candidate_fit_failures", r.candidate_fit_failures}};
  }
  return j.dump(2) + "\n";
}

std::string study2_csv(const Study2Report& r) {
  std::ostringstream os;
  os << "delta,statistic,alpha,rate\n";
  for (std::size_t d = 0; d < r.config.deltas.size(); ++d) {
    for (int s = 0; s < kStudy2StatisticCount; ++s) {
      for (std::size_t a = 0; a < r.config.alphas.size(); ++a) {
        os << csv::format_double(r.config.deltas[d]) << ","
           << study2_statistic_name(static_cast<Study2Statistic>(s)) << ","
           << csv::format_double(r.config.alphas[a]) << ","
           << csv::format_double(r.rates[d][static_cast<std::size_t>(s)][a])
           << "\n";
      }
    }
  }
  return os.str();
}

std::string study2_json(const Study2Report& r) {
  json j;
  j["command"] = "sim-tests";
  j["family"] = std::string(family_tag(r.config.family));
  j["extra"] = r.config.extra;
  j["q"] = r.config.q;
  j["n"] = r.config.n;
  j["r"] = r.config.r;
  j["phi"] = r.config.phi;
  j["replications"] = r.config.replications;
  j["seed"] = r.config.seed;
  j["alphas"] = r.config.alphas;
  j["deltas"] = r.config.deltas;
  j["dropped"] = r.dropped;
  json rows = json::array();
  for (std::size_t d = 0; d < r.config.deltas.size(); ++d) {
    for (int s = 0; s < kStudy2StatisticCount; ++s) {
      for (std::size_t a = 0; a < r.config.alphas.size(); ++a) {
        rows.push_back(
            {{"delta", r.config.deltas[d]},
             {"statistic",
              std::string(study2_statistic_name(static_cast<Study2Statistic>(s)))},
             {"alpha", r.config.alphas[a]},
             {"rate", r.rates[d][static_cast<std::size_t>(s)][a]}});
      }
    }
  }
  j["rates"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace qlsr
