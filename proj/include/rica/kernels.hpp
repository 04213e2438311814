#pragma once

// Data-parallel inner loops with serial reference twins. The parallel
// versions reduce fixed-size blocks and combine them in block order, so
// results are bit-identical to the serial versions for any thread count.

#include <Eigen/Dense>
#include <vector>

namespace rica::kernels {

// All n(n-1)/2 distinct pairwise differences x_i - x_j (i < j), row per pair.
Eigen::MatrixXd pairwise_differences(const Eigen::MatrixXd& x);
Eigen::MatrixXd pairwise_differences_serial(const Eigen::MatrixXd& x);

enum class MWeight { kTyler, kHuber };

// One M-estimation step: sum of w(q_i) d_i d_i' over the rows of d, with
// q_i = d_i' vinv d_i. Tyler weight is k/q, Huber weight min(1, cut/q).
Eigen::MatrixXd m_step_sum(const Eigen::MatrixXd& d, const Eigen::MatrixXd& vinv,
                           MWeight kind, double cut);
Eigen::MatrixXd m_step_sum_serial(const Eigen::MatrixXd& d, const Eigen::MatrixXd& vinv,
                                  MWeight kind, double cut);

// Ranks (1-based) of one column, ties resolved by first occurrence;
// tie_count returns the number of tied adjacent pairs.
void argsort_ranks(const Eigen::VectorXd& col, int* out_ranks, long* tie_count);

}  // namespace rica::kernels
