#ifndef QLSR_CLI_HPP
#define QLSR_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qlsr::cli {

struct CommonArgs {
  std::string family = "log-no";
  std::vector<double> theta;      // fixed shape parameters
  std::string theta_grid;         // "1;2;3" or "0.1,0.2;0.3,0.4"
  std::vector<double> q_levels;   // from --q / --q-grid; default {0.5}
  std::string format = "csv";     // csv | json
  std::string out;                // empty or "-": stdout
  std::uint64_t seed = 1;
  int threads = 0;
};

struct FitArgs : CommonArgs {
  std::string data;
  std::string response;
  std::string quantile_covars;    // comma-separated column names
  std::string dispersion_covars;
};

struct EnvelopeArgs : FitArgs {
  int sims = 100;
  double band = 0.95;
  std::string kind = "both";      // gcs | rq | both
};

struct SimEstimationArgs : CommonArgs {
  int n = 200;
  int reps = 1000;
  double beta0 = 1.5, beta1 = 0.5, tau0 = 1.0, tau1 = 0.5;
  bool fixed_design = false;
  bool no_candidates = false;
};

struct SimTestsArgs : CommonArgs {
  int n = 200;
  int reps = 2000;
  int r = 3;
  std::vector<double> alphas = {0.01, 0.05, 0.10};
  std::vector<double> deltas = {0.0, 1.0, 2.0, 3.0, 4.0};
  double phi = 3.0;
  bool fixed_design = false;
};

// Command entry points; they write the report to `out` (or the --out path)
// and errors to `err`, returning the process exit code.
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_envelope(const EnvelopeArgs& args, std::ostream& out,
                 std::ostream& err);
int cmd_sim_estimation(const SimEstimationArgs& args, std::ostream& out,
                       std::ostream& err);
int cmd_sim_tests(const SimTestsArgs& args, std::ostream& out,
                  std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace qlsr::cli

#endif
