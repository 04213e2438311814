#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>

#include "rica/restimator.hpp"

namespace rica {

// Parsed estimator descriptor. Grammar:
//   fobi
//   fastica
//   twoscatter(tyler,huber)        scatters: cov | cov4 | tyler | huber
//   r(prelim=fobi,steps=5,scores=skewt[,c=20,lambda_max=10])
// Tyler and Huber scatters inside twoscatter are symmetrized (evaluated at
// pairwise differences), as required for asymmetric components.
struct EstimatorSpec {
  enum class Kind { kFobi, kFastIca, kTwoScatter, kR };
  Kind kind = Kind::kFobi;
  std::string label;

  std::string scatter_a, scatter_b;          // twoscatter
  std::shared_ptr<EstimatorSpec> preliminary;  // r(...)
  int steps = 1;
  ReferenceScores scores = ReferenceScores::kSkewT;
  std::optional<double> c;
  std::optional<double> lambda_max;
};

EstimatorSpec parse_estimator(const std::string& text);

struct RunKnobs {
  double c = 20.0;
  double lambda_max = 10.0;
  std::uint64_t seed = 0;  // consumed only by estimators that may restart
};

struct EstimatorOutcome {
  Eigen::MatrixXd estimate;
  std::string flags;
};

// Runs one estimator on an n x k sample. Estimation errors propagate as
// rica::Error subclasses.
EstimatorOutcome run_estimator(const EstimatorSpec& spec, const Eigen::MatrixXd& x,
                               const RunKnobs& knobs);

}  // namespace rica
