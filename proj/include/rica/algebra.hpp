#pragma once

#include <Eigen/Dense>

#include "rica/cross_info.hpp"
#include "rica/errors.hpp"

namespace rica {

// Default relative tolerance for matrix comparisons.
inline constexpr double kMatrixTol = 1e-9;

// Tolerance below which two dominance pivots are considered tied.
inline constexpr double kDominanceTieTol = 1e-12;

// A mixing matrix in canonical form: unit diagonal, column-dominance
// ordering, nonsingular. Instances can only be obtained through the
// canonical-form map or by validating an already canonical matrix, so every
// MixingMatrix satisfies its invariants by construction.
class MixingMatrix {
 public:
  // Canonical-form normalization of an arbitrary nonsingular matrix.
  static MixingMatrix normalized(const Eigen::MatrixXd& m);

  // Wraps a matrix that is already canonical; throws if re-normalizing
  // would change it.
  static MixingMatrix from_canonical(const Eigen::MatrixXd& m);

  static MixingMatrix identity(int k);

  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  explicit MixingMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

// Vector of the k(k-1) off-diagonal entries, column-stacked.
struct DiagFreeVector {
  Eigen::VectorXd values;
  int dim = 0;
};

// Core of the canonical-form map: rescale columns to unit norm, reorder them
// by greedy dominance, rescale to unit diagonal. Throws SingularMatrix or
// AmbiguousOrdering.
Eigen::MatrixXd pi_normalize(const Eigen::MatrixXd& m);

DiagFreeVector vecd_o(const Eigen::MatrixXd& m);
Eigen::MatrixXd matd_o(const DiagFreeVector& v);
Eigen::MatrixXd matd_o(const Eigen::VectorXd& values, int k);

// Stacks the off-diagonal entries of m column-wise (equals C * vec(m) for
// any m, and vecd_o for zero-diagonal m).
Eigen::VectorXd offdiag_stack(const Eigen::MatrixXd& m);

// The k(k-1) x k^2 binary selection matrix with C * vec(M) = vecd_o(M) for
// zero-diagonal M.
Eigen::MatrixXd selection_matrix(int k);

// Performance metrics ------------------------------------------------------

// Permutation/scale-invariant discrepancy in [0,1].
double amari_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// (1/sqrt(k-1)) * min over permutations, with per-row optimal scaling, of
// the Frobenius distance between P D est^{-1} truth and the identity.
double min_distance_index(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth);

// Information-matrix plumbing ----------------------------------------------

// C (I_k (x) L^{-1})' G (I_k (x) L^{-1}) C' for a k^2 x k^2 matrix G.
Eigen::MatrixXd information_sandwich(const Eigen::MatrixXd& L, const Eigen::MatrixXd& G);

// The k^2 x k^2 kernel of the cross-information matrix, assembled from the
// estimated (or exact) gamma*/rho* tables.
Eigen::MatrixXd cross_info_kernel(const Eigen::MatrixXd& gamma_star,
                                  const Eigen::MatrixXd& rho_star);

// Cross-information matrix of the estimator expansion.
Eigen::MatrixXd gamma_star_matrix(const MixingMatrix& L, const CrossInfoEstimates& ci);

namespace detail {
void check_square(const Eigen::MatrixXd& m, const char* what);
void check_invertible(const Eigen::MatrixXd& m, const char* what);
}  // namespace detail

}  // namespace rica
