#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rica/algebra.hpp"
#include "rica/cross_info.hpp"
#include "rica/preliminary.hpp"
#include "rica/ranks.hpp"
#include "rica/scores.hpp"

namespace rica {

// Lambda-grid line-search knobs. The grid is {0, 1/c, 2/c, ...} up to
// lambda_max; c doubles as the discretization constant of the preliminary.
struct LineSearchOptions {
  double c = 20.0;
  double lambda_max = 10.0;
};

// Positivity guard: entries of |T| below this multiple of the median |T|
// have their line search skipped and their update zeroed.
inline constexpr double kPositivityGuard = 1e-4;

// Guard on the alpha/beta denominators.
inline constexpr double kDenominatorGuard = 1e-8;

// The matrix evaluated together with its rank statistic during a line search.
// which = gamma uses the (r,s) step factor and observes entry (r,s); the rho
// variant uses the (s,r) step factor and observes entry (s,r).
enum class PerturbKind { kGamma, kRho };

Eigen::MatrixXd perturbed_matrix(const Eigen::MatrixXd& l_tilde, const Eigen::MatrixXd& t,
                                 int r, int s, double lambda, int n, PerturbKind which);

// h(lambda): product of the base and perturbed rank-statistic entries.
// Throws SingularPerturbation when the perturbed matrix loses rank.
double h_mapping(const Eigen::MatrixXd& l_tilde, const ScoreTable& table,
                 const Eigen::MatrixXd& x, const Eigen::MatrixXd& t_base, int r, int s,
                 double lambda, PerturbKind which);

// One calibrated line search over any h. Used with the synthetic linear-h
// oracle in tests and with the real h mappings in estimate_cross_info.
struct Calibration {
  double value = 0.0;  // the estimated cross-information quantity
  SearchStatus status = SearchStatus::kOk;
  double lambda_lo = 0.0, lambda_hi = 0.0;
  double h_lo = 0.0, h_hi = 0.0;
};

Calibration calibrate_line_search(const std::function<double(double)>& h,
                                  const LineSearchOptions& opt);

// All 2k(k-1) line searches; independent searches run in parallel, each with
// its own ranking workspace.
CrossInfoEstimates estimate_cross_info(const MixingMatrix& l_tilde, const ScoreFamily& scores,
                                       const Eigen::MatrixXd& x, const LineSearchOptions& opt = {});

struct OneStepResult {
  MixingMatrix estimate;
  Eigen::MatrixXd alpha_hat;  // zeroed diagonal and guarded entries
  Eigen::MatrixXd beta_hat;
  Eigen::MatrixXd N_hat;
  Eigen::MatrixXd T;
  int halvings = 0;                // step halvings on singular updates
  std::vector<std::string> flags;  // human-readable event notes
};

// Single rank-based correction of a canonical preliminary, re-normalized to
// canonical form.
OneStepResult one_step(const MixingMatrix& l_tilde, const ScoreFamily& scores,
                       const Eigen::MatrixXd& x, const CrossInfoEstimates& ci);

// Data-driven multistep estimation -------------------------------------------

enum class ReferenceScores { kSkewT, kGaussian };

struct REstimatorOptions {
  int steps = 1;
  double c = 20.0;
  double lambda_max = 10.0;
  bool discretize_preliminary = true;
  ReferenceScores scores = ReferenceScores::kSkewT;
};

struct StepDiagnostics {
  int step = 0;
  Eigen::MatrixXd T;
  std::vector<SkewTParams> omega;      // fitted per component (skew-t scores)
  std::vector<bool> gaussian_fallback; // per component
  CrossInfoEstimates ci;
  int halvings = 0;
  std::vector<std::string> flags;
};

struct REstimatorResult {
  MixingMatrix estimate;
  std::vector<Eigen::MatrixXd> path;  // estimates at steps 0..T (0 = preliminary)
  std::vector<double> ae_trace;       // vs. truth at steps 0..T, when truth given
  std::vector<StepDiagnostics> steps;
  std::string flags() const;
};

// Per step: residuals, componentwise skew-t MLE, ranks, cross-information
// line searches, one-step update. MLE failures fall back to Gaussian scores
// for that component (flagged).
REstimatorResult data_driven_r_estimator(const Eigen::MatrixXd& x, const MixingMatrix& prelim,
                                         const REstimatorOptions& opt = {},
                                         const Eigen::MatrixXd* truth = nullptr);

}  // namespace rica
