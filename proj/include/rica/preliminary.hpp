#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>

#include "rica/algebra.hpp"

namespace rica {

// Symmetrization builds all n(n-1)/2 pairwise differences; above this sample
// size the call is refused rather than silently thrashing memory.
inline constexpr int kSymmetrizeBudget = 5000;

struct ScatterMatrix {
  Eigen::MatrixXd entries;  // symmetric positive definite
  std::string kind;
};

// Scatter functionals --------------------------------------------------------

ScatterMatrix cov_scatter(const Eigen::MatrixXd& x);
ScatterMatrix cov_scatter_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& center);
ScatterMatrix cov4_scatter(const Eigen::MatrixXd& x);
ScatterMatrix cov4_scatter_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& center);

// Tyler's shape estimator: fixed point of V -> (k/n) sum d d'/(d'V^{-1}d),
// normalized to trace k.
ScatterMatrix tyler_scatter(const Eigen::MatrixXd& x, const Eigen::VectorXd& center,
                            int max_iter = 500, double tol = 1e-9);

// Huber M-estimator of scatter with weights min(1, chi2_{k,0.9}/t^2),
// normalized to trace k.
ScatterMatrix huber_m_scatter(const Eigen::MatrixXd& x, const Eigen::VectorXd& center,
                              int max_iter = 500, double tol = 1e-9);

using CenteredScatterFn =
    std::function<ScatterMatrix(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

// Evaluates the scatter functional at all pairwise differences, center 0.
ScatterMatrix symmetrize(const CenteredScatterFn& fn, const Eigen::MatrixXd& x,
                         int budget_n = kSymmetrizeBudget);

Eigen::VectorXd columnwise_median(const Eigen::MatrixXd& x);

// Mixing-matrix estimators -----------------------------------------------------

// Simultaneous diagonalization of two scatters: the returned canonical mixing
// matrix B^{-1} satisfies B SA B' = I and B SB B' diagonal.
MixingMatrix two_scatter_estimator(const ScatterMatrix& sa, const ScatterMatrix& sb);

MixingMatrix fobi(const Eigen::MatrixXd& x);

struct FastIcaReport {
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

// Symmetric fastICA with log-cosh scores, identity initial demixing matrix,
// seeded random orthogonal restarts on non-convergence.
MixingMatrix fastica_symmetric(const Eigen::MatrixXd& x, int max_iter = 200, double tol = 1e-6,
                               std::uint64_t seed = 0, FastIcaReport* report = nullptr);

// Snaps each off-diagonal entry to the (c sqrt(n))^{-1} grid (away from
// zero); the diagonal stays one.
Eigen::MatrixXd discretize_matrix(const Eigen::MatrixXd& l, double c, int n);
MixingMatrix discretize(const MixingMatrix& l, double c, int n);

}  // namespace rica
