#pragma once

#include <Eigen/Dense>

#include "rica/algebra.hpp"
#include "rica/scores.hpp"

namespace rica {

// Componentwise ranks of the residual rows; each column is a permutation of
// 1..n. Ties (zero-probability for continuous data, pervasive for pixel
// data) are resolved by first occurrence and counted.
struct ResidualRanks {
  Eigen::MatrixXi ranks;  // n x k
  int n = 0;
  int k = 0;
  long tie_count = 0;

  double tie_fraction() const {
    return n > 0 ? static_cast<double>(tie_count) / (static_cast<double>(n) * k) : 0.0;
  }
};

// The zero-diagonal rank-score cross-product matrix and the vectorized
// central sequence derived from it.
struct RankStatistic {
  Eigen::MatrixXd T;      // k x k, diag(T) = 0
  DiagFreeVector delta;   // C (I (x) L^{-1})' vec(T)
};

// Residuals of the mixing model: row i is L^{-1}(x_i - mu).
Eigen::MatrixXd residuals(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu,
                          const Eigen::MatrixXd& l);
Eigen::MatrixXd residuals(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu,
                          const MixingMatrix& l);

ResidualRanks component_ranks(const Eigen::MatrixXd& z);
ResidualRanks component_ranks_serial(const Eigen::MatrixXd& z);

// T from precomputed score grids; depends on the data only through ranks.
RankStatistic rank_statistic(const ResidualRanks& ranks, const ScoreTable& table,
                             const Eigen::MatrixXd& l);
RankStatistic rank_statistic(const ResidualRanks& ranks, const ScoreFamily& scores,
                             const MixingMatrix& l);

}  // namespace rica
