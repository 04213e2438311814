#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rica/estimators.hpp"

namespace rica {

// Generating-process labels A..I of the simulation study, plus the clean
// analogues H0/I0 of the contaminated setups (same latent draws and triple
// selection, contamination pass disabled).
bool valid_setup(const std::string& setup);

// The fixed 3x3 mixing matrix used throughout the simulations.
Eigen::MatrixXd default_mixing();

struct SimConfig {
  std::string setup = "A";
  int n = 1000;
  int reps = 100;  // M
  std::uint64_t seed = 0;
  Eigen::MatrixXd mixing;  // empty means default_mixing()
  std::vector<std::string> estimators;
  double c = 20.0;
  double lambda_max = 10.0;
  int steps = 1;

  void validate() const;  // throws ConfigError
};

struct SimCell {
  int rep = 0;
  std::string estimator;
  bool ok = false;
  double amari = 0.0;
  double mdi = 0.0;
  double runtime_ms = 0.0;
  std::string flags;
};

struct SimResult {
  SimConfig cfg;
  std::vector<SimCell> cells;  // replication-major, estimator order within
};

// One replication's data: latent columns drawn i.i.d. from the setup's
// component densities (median zero), mixed by L; setups H/I multiply whole
// observations by a U[-5,5] factor with probability 2%/5% after mixing.
struct Generated {
  Eigen::MatrixXd x;       // n x 3
  Eigen::MatrixXd truth;   // the mixing matrix used
  int contaminated = 0;    // number of contaminated observations
  std::vector<std::string> components;  // names of the drawn triple
};

Generated generate(const std::string& setup, int n, std::uint64_t seed,
                   const Eigen::MatrixXd* mixing = nullptr);

// Runs every estimator on every replication; failures are recorded per cell
// and never abort the sweep. Replications run in parallel into private
// slots, so the result is independent of the thread count.
SimResult run_experiment(const SimConfig& cfg);

// CSV with header setup,n,rep,estimator,amari,mdi,runtime_ms,flags; empty
// amari/mdi fields on failed cells. include_runtime=false replaces the
// runtime column with 0 for byte-stable comparisons.
void write_csv(const SimResult& result, std::ostream& os, bool include_runtime = true);

// JSON with q25/median/q75/q95 per estimator, recomputable from the CSV rows.
std::string summary_json(const SimResult& result);

// key=value configuration text; '#' starts a comment, [section] lines are
// allowed and ignored.
SimConfig parse_config(std::istream& is);
SimConfig load_config(const std::string& path);

}  // namespace rica
