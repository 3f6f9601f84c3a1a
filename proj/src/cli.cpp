#include "qlsr/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "qlsr/csv.hpp"
#include "qlsr/diagnostics.hpp"
#include "qlsr/errors.hpp"
#include "qlsr/inference.hpp"
#include "qlsr/montecarlo.hpp"
#include "qlsr/regress.hpp"

namespace qlsr::cli {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& cell : split(s, ',')) {
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') {
      throw ParseError("expected a real number, got '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::vector<double>> parse_grid(const std::string& s) {
  std::vector<std::vector<double>> grid;
  for (const auto& tuple : split(s, ';')) {
    if (tuple.empty()) continue;
    grid.push_back(parse_reals(tuple));
  }
  if (grid.empty()) throw ParseError("--theta-grid parsed to an empty grid");
  return grid;
}

void write_output(const std::string& path, const std::string& content,
                  std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << content;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open output file '" + path + "'");
  f << content;
}

std::vector<double> q_levels_or_default(const CommonArgs& args) {
  if (args.q_levels.empty()) return {0.5};
  for (double q : args.q_levels) {
    if (!(q > 0.0 && q < 1.0)) {
      throw QuantileOutOfRange("quantile level " + std::to_string(q) +
                               " outside (0,1)");
    }
  }
  return args.q_levels;
}

struct LoadedData {
  Eigen::VectorXd y;
  Eigen::MatrixXd X, W;
  std::vector<std::string> beta_names, tau_names;
};

LoadedData load_dataset(const FitArgs& args) {
  if (args.data.empty()) throw ParseError("--data is required");
  if (args.response.empty()) throw ParseError("--response is required");
  csv::Table t = csv::read_table_file(args.data);
  if (t.rows() == 0) throw ParseError("dataset has no rows");

  LoadedData d;
  const auto& yc = t.column(args.response);
  d.y = Eigen::Map<const Eigen::VectorXd>(yc.data(),
                                          static_cast<Eigen::Index>(yc.size()));
  for (double v : yc) {
    if (!(v > 0.0)) {
      throw DomainError("response column '" + args.response +
                        "' must be strictly positive");
    }
  }
  auto design = [&](const std::string& names, std::vector<std::string>* used) {
    std::vector<const std::vector<double>*> cols;
    if (!names.empty()) {
      for (const auto& name : split(names, ',')) {
        cols.push_back(&t.column(name));
        used->push_back(name);
      }
    }
    Eigen::MatrixXd M(d.y.size(), 1 + static_cast<Eigen::Index>(cols.size()));
    M.col(0).setOnes();
    for (std::size_t j = 0; j < cols.size(); ++j) {
      M.col(static_cast<Eigen::Index>(j) + 1) = Eigen::Map<const Eigen::VectorXd>(
          cols[j]->data(), static_cast<Eigen::Index>(cols[j]->size()));
    }
    return M;
  };
  d.X = design(args.quantile_covars, &d.beta_names);
  d.W = design(args.dispersion_covars, &d.tau_names);
  return d;
}

struct QFit {
  double q = 0.0;
  std::optional<ProfileResult> profile;
  std::optional<RegressionModel> model;
  std::string error;
};

// Fit at one quantile level: plain fit when the shape is pinned, grid
// profiling otherwise.
QFit fit_one_level(const LoadedData& d, const FitArgs& args, Family family,
                   double q) {
  QFit out;
  out.q = q;
  try {
    std::vector<std::vector<double>> grid;
    if (extra_parameter_count(family) == 0) {
      grid = {{}};
    } else if (!args.theta.empty()) {
      grid = {args.theta};
    } else if (!args.theta_grid.empty()) {
      grid = parse_grid(args.theta_grid);
    } else {
      grid = default_extra_grid(family);
    }
    RegressionModel base(d.y, d.X, d.W, q,
                         DensityKernel(family, grid.front()));
    ProfileResult pr = profile_extra_parameter(base, grid);
    if (!pr.best.converged) {
      throw NonConvergence("fit did not converge at q=" + std::to_string(q));
    }
    out.model = base.with_kernel(
        DensityKernel(family, pr.best.extra));
    out.profile = std::move(pr);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

std::vector<std::string> parameter_names(const LoadedData& d) {
  std::vector<std::string> names;
  names.push_back("beta0");
  for (std::size_t j = 0; j < d.beta_names.size(); ++j) {
    names.push_back("beta" + std::to_string(j + 1) + ":" + d.beta_names[j]);
  }
  names.push_back("tau0");
  for (std::size_t j = 0; j < d.tau_names.size(); ++j) {
    names.push_back("tau" + std::to_string(j + 1) + ":" + d.tau_names[j]);
  }
  return names;
}

}  // namespace

int cmd_fit(const FitArgs& args, std::ostream& out_stream, std::ostream& err) {
  try {
    Family family = family_from_tag(args.family);
    LoadedData d = load_dataset(args);
    auto levels = q_levels_or_default(args);
    auto names = parameter_names(d);

    std::ostringstream estimates, tests, criteria, residuals, profile_os;
    estimates << "q,parameter,estimate,std_error\n";
    tests << "q,parameter,test,statistic,df,p_value\n";
    criteria << "q,family,extra,loglik,aic,bic,aicc,converged,iterations\n";
    residuals << "q,kind,mean,median,sd,skewness,kurtosis\n";
    profile_os << "q,extra,loglik,converged\n";
    json jq = json::array();
    bool any_error = false;

    for (double q : levels) {
      QFit qa = fit_one_level(d, args, family, q);
      if (!qa.error.empty()) {
        any_error = true;
        err << "error: q=" << q << ": " << qa.error << "\n";
        jq.push_back({{"q", q}, {"error", qa.error}});
        continue;
      }
      const RegressionModel& model = *qa.model;
      const FitResult& fr = qa.profile->best;
      auto cis = confidence_intervals(fr, 0.95);
      auto ic = information_criteria(fr, static_cast<int>(model.n()),
                                     static_cast<int>(model.n_params()));
      ResidualReport gcs = gcs_residuals(model, fr);
      ResidualReport rq = rq_residuals(model, fr);

      json jfit;
      jfit["q"] = q;
      jfit["family"] = std::string(family_tag(family));
      jfit["extra"] = fr.extra;
      jfit["loglik"] = fr.loglik;
      jfit["aic"] = ic.aic;
      jfit["bic"] = ic.bic;
      jfit["aicc"] = ic.aicc;
      jfit["converged"] = fr.converged;
      jfit["iterations"] = fr.iterations;
      json jest = json::array();
      for (std::size_t j = 0; j < cis.size(); ++j) {
        estimates << csv::format_double(q) << "," << names[j] << ","
                  << csv::format_double(cis[j].estimate) << ","
                  << csv::format_double(cis[j].std_error) << "\n";
        jest.push_back({{"name", names[j]},
                        {"estimate", cis[j].estimate},
                        {"std_error", cis[j].std_error}});
      }
      jfit["estimates"] = jest;

      // Zero-coefficient battery for every non-intercept coefficient.
      json jtests = json::array();
      std::vector<int> tested;
      for (Eigen::Index j = 1; j < model.n_beta(); ++j) {
        tested.push_back(static_cast<int>(j));
      }
      for (Eigen::Index j = model.n_beta() + 1; j < model.n_params(); ++j) {
        tested.push_back(static_cast<int>(j));
      }
      for (int idx : tested) {
        Hypothesis h;
        h.indices = {idx};
        FitResult restricted =
            fit_restricted(model, h.indices, h.values_or_zero());
        if (!restricted.converged) {
          any_error = true;
          err << "error: q=" << q << ": restricted fit for " << names[idx]
              << " did not converge\n";
          continue;
        }
        TestBattery b = test_battery(model, h, fr, restricted);
        for (const TestResult* tr :
             {&b.wald, &b.lr, &b.score_expected, &b.score_observed,
              &b.gradient}) {
          tests << csv::format_double(q) << "," << names[idx] << ","
                << test_kind_name(tr->kind) << ","
                << csv::format_double(tr->statistic) << "," << tr->df << ","
                << csv::format_double(tr->p_value) << "\n";
          jtests.push_back({{"parameter", names[idx]},
                            {"test", std::string(test_kind_name(tr->kind))},
                            {"statistic", tr->statistic},
                            {"df", tr->df},
                            {"p_value", tr->p_value}});
        }
      }
      jfit["tests"] = jtests;

      std::string extra_str;
      for (std::size_t e = 0; e < fr.extra.size(); ++e) {
        if (e) extra_str += ";";
        extra_str += csv::format_double(fr.extra[e]);
      }
      criteria << csv::format_double(q) << "," << family_tag(family) << ","
               << (extra_str.empty() ? "-" : extra_str) << ","
               << csv::format_double(fr.loglik) << ","
               << csv::format_double(ic.aic) << ","
               << csv::format_double(ic.bic) << ","
               << csv::format_double(ic.aicc) << "," << fr.converged << ","
               << fr.iterations << "\n";

      auto resid_row = [&](const char* kind, const ResidualSummary& s) {
        residuals << csv::format_double(q) << "," << kind << ","
                  << csv::format_double(s.mean) << ","
                  << csv::format_double(s.median) << ","
                  << csv::format_double(s.sd) << ","
                  << csv::format_double(s.skewness) << ","
                  << csv::format_double(s.kurtosis) << "\n";
      };
      resid_row("gcs", gcs.summary);
      resid_row("rq", rq.summary);
      jfit["residuals"] = {
          {"gcs",
           {{"mean", gcs.summary.mean},
            {"median", gcs.summary.median},
            {"sd", gcs.summary.sd},
            {"skewness", gcs.summary.skewness},
            {"kurtosis", gcs.summary.kurtosis}}},
          {"rq",
           {{"mean", rq.summary.mean},
            {"median", rq.summary.median},
            {"sd", rq.summary.sd},
            {"skewness", rq.summary.skewness},
            {"kurtosis", rq.summary.kurtosis}}}};

      json jprofile = json::array();
      for (const auto& pt : qa.profile->points) {
        std::string pe;
        for (std::size_t e = 0; e < pt.extra.size(); ++e) {
          if (e) pe += ";";
          pe += csv::format_double(pt.extra[e]);
        }
        profile_os << csv::format_double(q) << "," << (pe.empty() ? "-" : pe)
                   << ","
                   << (pt.failed ? "nan" : csv::format_double(pt.loglik))
                   << "," << (pt.failed ? false : pt.converged) << "\n";
        jprofile.push_back({{"extra", pt.extra},
                            {"loglik", pt.failed
                                           ? json()
                                           : json(pt.loglik)},
                            {"converged", pt.converged},
                            {"failed", pt.failed}});
      }
      jfit["profile"] = jprofile;
      jq.push_back(jfit);
    }

    if (args.format == "json") {
      json j;
      j["command"] = "fit";
      j["seed"] = args.seed;
      j["fits"] = jq;
      write_output(args.out, j.dump(2) + "\n", out_stream);
    } else {
      std::string all = estimates.str() + "\n" + tests.str() + "\n" +
                        criteria.str() + "\n" + residuals.str() + "\n" +
                        profile_os.str();
      write_output(args.out, all, out_stream);
    }
    return any_error ? 2 : 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_envelope(const EnvelopeArgs& args, std::ostream& out_stream,
                 std::ostream& err) {
  try {
    if (args.sims < 19) {
      throw DomainError("--sims must be at least 19");
    }
    if (!(args.band >= 0.0 && args.band < 1.0)) {
      throw DomainError("--band must lie in [0,1)");
    }
    Family family = family_from_tag(args.family);
    LoadedData d = load_dataset(args);
    auto levels = q_levels_or_default(args);
    std::vector<ResidualKind> kinds;
    if (args.kind == "gcs") {
      kinds = {ResidualKind::GCS};
    } else if (args.kind == "rq") {
      kinds = {ResidualKind::RQ};
    } else if (args.kind == "both") {
      kinds = {ResidualKind::GCS, ResidualKind::RQ};
    } else {
      throw ParseError("--kind must be gcs, rq or both");
    }

    std::ostringstream csv_os;
    csv_os << "q,kind,index,residual,theoretical,lower,upper\n";
    json jenv = json::array();
    for (double q : levels) {
      QFit qa = fit_one_level(d, args, family, q);
      if (!qa.error.empty()) {
        err << "error: q=" << q << ": " << qa.error << "\n";
        return 2;
      }
      for (ResidualKind kind : kinds) {
        EnvelopeData env = qq_envelope(*qa.model, qa.profile->best, kind,
                                       args.sims, args.band, args.seed);
        const char* kname = kind == ResidualKind::GCS ? "gcs" : "rq";
        for (std::size_t i = 0; i < env.ordered.size(); ++i) {
          csv_os << csv::format_double(q) << "," << kname << "," << (i + 1)
                 << "," << csv::format_double(env.ordered[i]) << ","
                 << csv::format_double(env.theoretical[i]) << ","
                 << csv::format_double(env.lower[i]) << ","
                 << csv::format_double(env.upper[i]) << "\n";
        }
        jenv.push_back({{"q", q},
                        {"kind", kname},
                        {"band", env.band},
                        {"simulations", env.simulations},
                        {"failed_refits", env.failed_refits},
                        {"residual", env.ordered},
                        {"theoretical", env.theoretical},
                        {"lower", env.lower},
                        {"upper", env.upper}});
      }
    }
    if (args.format == "json") {
      json j;
      j["command"] = "envelope";
      j["seed"] = args.seed;
      j["envelopes"] = jenv;
      write_output(args.out, j.dump(2) + "\n", out_stream);
    } else {
      write_output(args.out, csv_os.str(), out_stream);
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sim_estimation(const SimEstimationArgs& args, std::ostream& out_stream,
                       std::ostream& err) {
  try {
    if (args.reps < 1) throw DomainError("--reps must be >= 1");
    Study1Config cfg;
    cfg.family = family_from_tag(args.family);
    cfg.extra = args.theta.empty() ? reference_extras(cfg.family) : args.theta;
    auto levels = q_levels_or_default(args);
    if (levels.size() != 1) {
      throw DomainError("sim-estimation takes a single --q");
    }
    cfg.q = levels[0];
    cfg.n = args.n;
    cfg.replications = args.reps;
    cfg.beta0 = args.beta0;
    cfg.beta1 = args.beta1;
    cfg.tau0 = args.tau0;
    cfg.tau1 = args.tau1;
    cfg.seed = args.seed;
    cfg.redraw_covariates = !args.fixed_design;
    cfg.evaluate_candidates = !args.no_candidates;
    cfg.threads = args.threads;
    Study1Report report = run_study1(cfg);
    write_output(args.out,
                 args.format == "json" ? study1_json(report)
                                       : study1_csv(report),
                 out_stream);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sim_tests(const SimTestsArgs& args, std::ostream& out_stream,
                  std::ostream& err) {
  try {
    if (args.reps < 1) throw DomainError("--reps must be >= 1");
    Study2Config cfg;
    cfg.family = family_from_tag(args.family);
    cfg.extra = args.theta.empty() ? reference_extras(cfg.family) : args.theta;
    auto levels = q_levels_or_default(args);
    if (levels.size() != 1) {
      throw DomainError("sim-tests takes a single --q");
    }
    cfg.q = levels[0];
    cfg.n = args.n;
    cfg.replications = args.reps;
    cfg.r = args.r;
    cfg.alphas = args.alphas;
    cfg.deltas = args.deltas;
    cfg.phi = args.phi;
    cfg.seed = args.seed;
    cfg.redraw_covariates = !args.fixed_design;
    cfg.threads = args.threads;
    Study2Report report = run_study2(cfg);
    write_output(args.out,
                 args.format == "json" ? study2_json(report)
                                       : study2_csv(report),
                 out_stream);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--family", args.family,
                  "kernel family: log-no, log-t, log-pe, log-hp, log-sl, "
                  "log-cn, ebs, ebs-t");
  cmd->add_option("--theta", args.theta,
                  "fixed shape parameter(s), comma separated")
      ->delimiter(',');
  cmd->add_option("--theta-grid", args.theta_grid,
                  "shape grid: tuples split by ';', values by ','");
  cmd->add_option("--q", args.q_levels, "quantile level(s)")->delimiter(',');
  cmd->add_option("--q-grid", args.q_levels, "quantile level grid")
      ->delimiter(',');
  cmd->add_option("--format", args.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", args.out, "output path ('-' for stdout)");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (default: QLSR_THREADS or hardware)");
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"quantile regression for log-symmetric distributions"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit models from a CSV dataset");
  add_common(fit_cmd, fit_args);
  fit_cmd->add_option("--data", fit_args.data, "CSV dataset path")->required();
  fit_cmd->add_option("--response", fit_args.response, "response column")
      ->required();
  fit_cmd->add_option("--quantile-covars", fit_args.quantile_covars,
                      "comma-separated quantile-predictor columns");
  fit_cmd->add_option("--dispersion-covars", fit_args.dispersion_covars,
                      "comma-separated dispersion-predictor columns");

  EnvelopeArgs env_args;
  auto* env_cmd =
      app.add_subcommand("envelope", "simulated-envelope residual QQ data");
  add_common(env_cmd, env_args);
  env_cmd->add_option("--data", env_args.data, "CSV dataset path")->required();
  env_cmd->add_option("--response", env_args.response, "response column")
      ->required();
  env_cmd->add_option("--quantile-covars", env_args.quantile_covars,
                      "comma-separated quantile-predictor columns");
  env_cmd->add_option("--dispersion-covars", env_args.dispersion_covars,
                      "comma-separated dispersion-predictor columns");
  env_cmd->add_option("--sims", env_args.sims, "number of simulated refits")
      ->check(CLI::Range(19, 1000000));
  env_cmd->add_option("--band", env_args.band, "pointwise band level");
  env_cmd->add_option("--kind", env_args.kind, "gcs, rq or both");

  SimEstimationArgs est_args;
  auto* est_cmd = app.add_subcommand(
      "sim-estimation", "estimator/criteria/residual simulation study");
  add_common(est_cmd, est_args);
  est_cmd->add_option("--n", est_args.n, "sample size")->check(CLI::PositiveNumber);
  est_cmd->add_option("--reps", est_args.reps, "Monte Carlo replications")
      ->check(CLI::PositiveNumber);
  est_cmd->add_option("--beta0", est_args.beta0, "true quantile intercept");
  est_cmd->add_option("--beta1", est_args.beta1, "true quantile slope");
  est_cmd->add_option("--tau0", est_args.tau0, "true dispersion intercept");
  est_cmd->add_option("--tau1", est_args.tau1, "true dispersion slope");
  est_cmd->add_flag("--fixed-design", est_args.fixed_design,
                    "draw covariates once and reuse them");
  est_cmd->add_flag("--no-candidates", est_args.no_candidates,
                    "skip the cross-family criteria step");

  SimTestsArgs test_args;
  auto* test_cmd =
      app.add_subcommand("sim-tests", "test size/power simulation study");
  add_common(test_cmd, test_args);
  test_cmd->add_option("--n", test_args.n, "sample size")
      ->check(CLI::PositiveNumber);
  test_cmd->add_option("--reps", test_args.reps, "Monte Carlo replications")
      ->check(CLI::PositiveNumber);
  test_cmd->add_option("--r", test_args.r, "coefficients under H0")
      ->check(CLI::Range(1, 3));
  test_cmd->add_option("--alphas", test_args.alphas, "nominal levels")
      ->delimiter(',');
  test_cmd->add_option("--deltas", test_args.deltas, "alternative magnitudes")
      ->delimiter(',');
  test_cmd->add_option("--phi", test_args.phi, "true dispersion");
  test_cmd->add_flag("--fixed-design", test_args.fixed_design,
                     "draw covariates once and reuse them");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (fit_cmd->parsed()) return cmd_fit(fit_args, std::cout, std::cerr);
  if (env_cmd->parsed()) return cmd_envelope(env_args, std::cout, std::cerr);
  if (est_cmd->parsed()) {
    return cmd_sim_estimation(est_args, std::cout, std::cerr);
  }
  if (test_cmd->parsed()) return cmd_sim_tests(test_args, std::cout, std::cerr);
  return 1;
}

}  // namespace qlsr::cli
