#include "rica/kernels.hpp"

#include <algorithm>
#include <numeric>

#include "rica/parallel.hpp"

namespace rica::kernels {

namespace {

inline Eigen::Index pair_offset(Eigen::Index i, Eigen::Index n) {
  // rows before the block of pairs (i, i+1..n-1)
  return i * n - i * (i + 1) / 2;
}

inline double m_weight(MWeight kind, double q, double k, double cut) {
  if (kind == MWeight::kTyler) return k / q;
  return q <= cut ? 1.0 : cut / q;
}

}  // namespace

Eigen::MatrixXd pairwise_differences_serial(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), k = x.cols();
  Eigen::MatrixXd d(n * (n - 1) / 2, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index row = pair_offset(i, n);
    for (Eigen::Index j = i + 1; j < n; ++j) d.row(row++) = x.row(i) - x.row(j);
  }
  return d;
}

Eigen::MatrixXd pairwise_differences(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), k = x.cols();
  Eigen::MatrixXd d(n * (n - 1) / 2, k);
  par::for_each_index(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    Eigen::Index row = pair_offset(i, n);
    for (Eigen::Index j = i + 1; j < n; ++j) d.row(row++) = x.row(i) - x.row(j);
  });
  return d;
}

Eigen::MatrixXd m_step_sum_serial(const Eigen::MatrixXd& d, const Eigen::MatrixXd& vinv,
                                  MWeight kind, double cut) {
  const Eigen::Index n = d.rows(), k = d.cols();
  const double kd = static_cast<double>(k);
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd part(k, k);
  for (Eigen::Index lo = 0; lo < n; lo += static_cast<Eigen::Index>(par::kSumBlock)) {
    const Eigen::Index hi = std::min<Eigen::Index>(lo + par::kSumBlock, n);
    part.setZero();
    for (Eigen::Index i = lo; i < hi; ++i) {
      const auto row = d.row(i);
      const double q = row * vinv * row.transpose();
      part.noalias() += m_weight(kind, q, kd, cut) * row.transpose() * row;
    }
    total += part;
  }
  return total;
}

Eigen::MatrixXd m_step_sum(const Eigen::MatrixXd& d, const Eigen::MatrixXd& vinv,
                           MWeight kind, double cut) {
  const Eigen::Index n = d.rows(), k = d.cols();
  const double kd = static_cast<double>(k);
  const std::size_t nblocks = (static_cast<std::size_t>(n) + par::kSumBlock - 1) / par::kSumBlock;
  std::vector<Eigen::MatrixXd> parts(nblocks);
  par::for_each_index(nblocks, [&](std::size_t b) {
    const Eigen::Index lo = static_cast<Eigen::Index>(b * par::kSumBlock);
    const Eigen::Index hi = std::min<Eigen::Index>(lo + par::kSumBlock, n);
    Eigen::MatrixXd part = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = lo; i < hi; ++i) {
      const auto row = d.row(i);
      const double q = row * vinv * row.transpose();
      part.noalias() += m_weight(kind, q, kd, cut) * row.transpose() * row;
    }
    parts[b] = std::move(part);
  });
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(k, k);
  for (const auto& p : parts) total += p;  // fixed combine order
  return total;
}

void argsort_ranks(const Eigen::VectorXd& col, int* out_ranks, long* tie_count) {
  const Eigen::Index n = col.size();
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return col(a) < col(b); });
  long ties = 0;
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    out_ranks[idx[static_cast<std::size_t>(pos)]] = static_cast<int>(pos) + 1;
    if (pos > 0 && col(idx[static_cast<std::size_t>(pos)]) == col(idx[static_cast<std::size_t>(pos - 1)]))
      ++ties;
  }
  if (tie_count) *tie_count = ties;
}

}  // namespace rica::kernels
