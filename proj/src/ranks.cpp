#include "rica/ranks.hpp"

#include <atomic>
#include <cmath>

#include "rica/kernels.hpp"
#include "rica/parallel.hpp"

namespace rica {

Eigen::MatrixXd residuals(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu,
                          const Eigen::MatrixXd& l) {
  detail::check_square(l, "residuals");
  if (x.cols() != l.rows()) throw DimensionMismatch("residuals: data/matrix dimensions");
  if (mu.size() != 0 && mu.size() != x.cols()) throw DimensionMismatch("residuals: mu length");

  Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
  if (!lu.isInvertible()) throw SingularMatrix("residuals: singular mixing matrix");
  const Eigen::MatrixXd linv_t = lu.inverse().transpose();

  Eigen::MatrixXd centered = x;
  if (mu.size() != 0) centered.rowwise() -= mu.transpose();
  return centered * linv_t;  // row i becomes L^{-1}(x_i - mu)
}

Eigen::MatrixXd residuals(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu,
                          const MixingMatrix& l) {
  return residuals(x, mu, l.matrix());
}

namespace {

ResidualRanks component_ranks_impl(const Eigen::MatrixXd& z, bool parallel) {
  ResidualRanks out;
  out.n = static_cast<int>(z.rows());
  out.k = static_cast<int>(z.cols());
  if (out.n < 1) throw DimensionMismatch("component_ranks: empty data");
  out.ranks.resize(out.n, out.k);
  std::vector<long> ties(static_cast<std::size_t>(out.k), 0);
  auto body = [&](std::size_t j) {
    std::vector<int> col_ranks(static_cast<std::size_t>(out.n));
    kernels::argsort_ranks(z.col(static_cast<Eigen::Index>(j)), col_ranks.data(), &ties[j]);
    for (int i = 0; i < out.n; ++i) out.ranks(i, static_cast<Eigen::Index>(j)) = col_ranks[static_cast<std::size_t>(i)];
  };
  if (parallel) {
    par::for_each_index(static_cast<std::size_t>(out.k), body);
  } else {
    par::for_each_index_serial(static_cast<std::size_t>(out.k), body);
  }
  for (long t : ties) out.tie_count += t;
  return out;
}

}  // namespace

ResidualRanks component_ranks(const Eigen::MatrixXd& z) { return component_ranks_impl(z, true); }

ResidualRanks component_ranks_serial(const Eigen::MatrixXd& z) {
  return component_ranks_impl(z, false);
}

RankStatistic rank_statistic(const ResidualRanks& ranks, const ScoreTable& table,
                             const Eigen::MatrixXd& l) {
  const int n = ranks.n, k = ranks.k;
  if (table.n != n || table.k != k) throw DimensionMismatch("rank_statistic: table size");
  if (l.rows() != k || l.cols() != k) throw DimensionMismatch("rank_statistic: matrix size");
  if (n < 2) throw InvalidParams("rank_statistic: need n >= 2");

  const double root_n = std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int r = 0; r < k; ++r) {
    const Eigen::VectorXd& jr = table.J[static_cast<std::size_t>(r)];
    for (int s = 0; s < k; ++s) {
      if (r == s) continue;
      const Eigen::VectorXd& qs = table.Q[static_cast<std::size_t>(s)];
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += jr(ranks.ranks(i, r) - 1) * qs(ranks.ranks(i, s) - 1);
      t(r, s) = (acc - n * table.Jbar(r) * table.Qbar(s)) / root_n;
    }
  }

  RankStatistic out;
  out.T = std::move(t);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
  if (!lu.isInvertible()) throw SingularMatrix("rank_statistic: singular mixing matrix");
  out.delta.dim = k;
  out.delta.values = offdiag_stack(lu.inverse().transpose() * out.T);
  return out;
}

RankStatistic rank_statistic(const ResidualRanks& ranks, const ScoreFamily& scores,
                             const MixingMatrix& l) {
  if (scores.dim() != ranks.k) throw DimensionMismatch("rank_statistic: family size");
  return rank_statistic(ranks, scores.table(ranks.n), l.matrix());
}

}  // namespace rica
