#include "rica/preliminary.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "rica/kernels.hpp"
#include "rica/rng.hpp"

namespace rica {

namespace {

void check_data(const Eigen::MatrixXd& x, const char* what) {
  if (x.rows() < 2 || x.cols() < 1) throw DimensionMismatch(std::string(what) + ": too little data");
  if (!x.allFinite()) throw InvalidParams(std::string(what) + ": non-finite data");
}

void check_full_rank_spd(const Eigen::MatrixXd& s, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * lmax) {
    throw RankDeficientData(std::string(what) + ": scatter not positive definite");
  }
}

// symmetric inverse square root of an SPD matrix
Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& s, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * lmax) {
    throw RankDeficientData(std::string(what) + ": matrix not positive definite");
  }
  return eig.eigenvectors() *
         eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// Tyler's weights are scale-free, so its iterates are renormalized to trace k
// every step (the equation only identifies shape). The Huber cutoff is not
// scale-free: its raw fixed point is iterated as-is to keep exact affine
// equivariance, and the result is trace-normalized only on output.
ScatterMatrix m_scatter(const Eigen::MatrixXd& x, const Eigen::VectorXd& center,
                        kernels::MWeight kind, double cut, int max_iter, double tol,
                        const char* label) {
  check_data(x, label);
  const Eigen::Index n = x.rows(), k = x.cols();
  if (center.size() != k) throw DimensionMismatch(std::string(label) + ": center length");
  Eigen::MatrixXd d = x.rowwise() - center.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.row(i).norm() == 0.0) {
      throw InvalidParams(std::string(label) + ": observation equal to the center");
    }
  }
  const bool renormalize = kind == kernels::MWeight::kTyler;

  Eigen::MatrixXd v = cov_scatter_at(x, center).entries;
  if (renormalize) v *= static_cast<double>(k) / v.trace();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) throw RankDeficientData(std::string(label) + ": iterate lost rank");
    const Eigen::MatrixXd vinv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd next = kernels::m_step_sum(d, vinv, kind, cut) / static_cast<double>(n);
    if (!(next.trace() > 0.0) || !next.allFinite()) {
      throw RankDeficientData(std::string(label) + ": degenerate update");
    }
    if (renormalize) next *= static_cast<double>(k) / next.trace();
    const double delta = (next - v).norm() / v.norm();
    v = next;
    if (delta < tol) {
      check_full_rank_spd(v, label);
      v *= static_cast<double>(k) / v.trace();
      return {v, label};
    }
  }
  throw NonConvergence(std::string(label) + ": fixed-point iteration did not converge");
}

}  // namespace

Eigen::VectorXd columnwise_median(const Eigen::MatrixXd& x) {
  Eigen::VectorXd med(x.cols());
  std::vector<double> buf(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) buf[static_cast<std::size_t>(i)] = x(i, j);
    const std::size_t n = buf.size();
    std::nth_element(buf.begin(), buf.begin() + n / 2, buf.end());
    double hi = buf[n / 2];
    if (n % 2 == 0) {
      std::nth_element(buf.begin(), buf.begin() + n / 2 - 1, buf.end());
      med(j) = 0.5 * (buf[n / 2 - 1] + hi);
    } else {
      med(j) = hi;
    }
  }
  return med;
}

ScatterMatrix cov_scatter_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& center) {
  check_data(x, "cov_scatter");
  const Eigen::MatrixXd d = x.rowwise() - center.transpose();
  ScatterMatrix s{(d.transpose() * d) / static_cast<double>(x.rows()), "cov"};
  check_full_rank_spd(s.entries, "cov_scatter");
  return s;
}

ScatterMatrix cov_scatter(const Eigen::MatrixXd& x) {
  check_data(x, "cov_scatter");
  if (x.rows() <= x.cols()) throw RankDeficientData("cov_scatter: need n > k");
  return cov_scatter_at(x, x.colwise().mean());
}

ScatterMatrix cov4_scatter_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& center) {
  check_data(x, "cov4_scatter");
  const Eigen::Index n = x.rows(), k = x.cols();
  const Eigen::MatrixXd d = x.rowwise() - center.transpose();
  const ScatterMatrix cov = cov_scatter_at(x, center);
  Eigen::LLT<Eigen::MatrixXd> llt(cov.entries);
  if (llt.info() != Eigen::Success) throw RankDeficientData("cov4_scatter: covariance not SPD");
  // Mahalanobis weight (d' S^{-1} d) per observation
  const Eigen::MatrixXd sol = llt.solve(d.transpose());  // k x n
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = d.row(i) * sol.col(i);
    acc.noalias() += w * d.row(i).transpose() * d.row(i);
  }
  ScatterMatrix s{acc / static_cast<double>(n), "cov4"};
  check_full_rank_spd(s.entries, "cov4_scatter");
  return s;
}

ScatterMatrix cov4_scatter(const Eigen::MatrixXd& x) {
  check_data(x, "cov4_scatter");
  if (x.rows() <= x.cols()) throw RankDeficientData("cov4_scatter: need n > k");
  return cov4_scatter_at(x, x.colwise().mean());
}

ScatterMatrix tyler_scatter(const Eigen::MatrixXd& x, const Eigen::VectorXd& center,
                            int max_iter, double tol) {
  const Eigen::Index k = x.cols();
  if (x.rows() <= k * (k - 1)) throw InvalidParams("tyler_scatter: need n > k(k-1)");
  return m_scatter(x, center, kernels::MWeight::kTyler, 0.0, max_iter, tol, "tyler");
}

ScatterMatrix huber_m_scatter(const Eigen::MatrixXd& x, const Eigen::VectorXd& center,
                              int max_iter, double tol) {
  const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(x.cols()));
  const double cut = boost::math::quantile(chi2, 0.9);
  return m_scatter(x, center, kernels::MWeight::kHuber, cut, max_iter, tol, "huber");
}

ScatterMatrix symmetrize(const CenteredScatterFn& fn, const Eigen::MatrixXd& x, int budget_n) {
  check_data(x, "symmetrize");
  if (x.rows() > budget_n) {
    std::ostringstream os;
    os << "symmetrize: n = " << x.rows() << " exceeds the pairwise budget of " << budget_n;
    throw BudgetExceeded(os.str());
  }
  const Eigen::MatrixXd diffs = kernels::pairwise_differences(x);
  ScatterMatrix s = fn(diffs, Eigen::VectorXd::Zero(x.cols()));
  s.kind = "symmetrized-" + s.kind;
  return s;
}

MixingMatrix two_scatter_estimator(const ScatterMatrix& sa, const ScatterMatrix& sb) {
  const Eigen::Index k = sa.entries.rows();
  if (sb.entries.rows() != k) throw DimensionMismatch("two_scatter_estimator");
  check_full_rank_spd(sa.entries, "two_scatter_estimator(SA)");
  check_full_rank_spd(sb.entries, "two_scatter_estimator(SB)");

  const Eigen::MatrixXd w = inv_sqrt_spd(sa.entries, "two_scatter_estimator");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * sb.entries * w);
  // descending generalized eigenvalues (= generalized kurtoses)
  Eigen::VectorXd vals = eig.eigenvalues().reverse();
  Eigen::MatrixXd vecs = eig.eigenvectors().rowwise().reverse();
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    const double scale = std::max({std::abs(vals(i)), std::abs(vals(i + 1)), 1e-12});
    if (std::abs(vals(i) - vals(i + 1)) <= 1e-6 * scale) {
      throw DegenerateKurtoses("two_scatter_estimator: coinciding generalized kurtoses");
    }
  }
  const Eigen::MatrixXd unmix = vecs.transpose() * w;
  return MixingMatrix::normalized(unmix.inverse());
}

MixingMatrix fobi(const Eigen::MatrixXd& x) {
  if (x.cols() == 1) return MixingMatrix::identity(1);
  return two_scatter_estimator(cov_scatter(x), cov4_scatter(x));
}

MixingMatrix fastica_symmetric(const Eigen::MatrixXd& x, int max_iter, double tol,
                               std::uint64_t seed, FastIcaReport* report) {
  check_data(x, "fastica");
  const Eigen::Index n = x.rows(), k = x.cols();
  if (n <= k) throw RankDeficientData("fastica: need n > k");

  const Eigen::MatrixXd whiten = inv_sqrt_spd(cov_scatter(x).entries, "fastica");
  Eigen::MatrixXd y = (x.rowwise() - x.colwise().mean()) * whiten;  // n x k, identity cov

  FastIcaReport rep;
  const boost::math::normal_distribution<double> std_normal;
  RngStream restart_rng(substream_seed(seed, 0, "fastica-restart"));

  auto orthonormalize = [&](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    return inv_sqrt_spd(m * m.transpose(), "fastica") * m;
  };

  Eigen::MatrixXd w_final;
  bool done = false;
  for (int attempt = 0; attempt <= 3 && !done; ++attempt) {
    Eigen::MatrixXd w;
    if (attempt == 0) {
      w = Eigen::MatrixXd::Identity(k, k);
    } else {
      // seeded random orthogonal restart
      Eigen::MatrixXd g(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
          g(i, j) = boost::math::quantile(std_normal, restart_rng.uniform());
      w = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
      ++rep.restarts;
    }
    try {
      for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd wn(k, k);
        for (Eigen::Index p = 0; p < k; ++p) {
          const Eigen::VectorXd u = y * w.row(p).transpose();
          const Eigen::ArrayXd g = u.array().tanh();
          const double gprime_mean = (1.0 - g.square()).mean();
          wn.row(p) = (y.transpose() * g.matrix()).transpose() / static_cast<double>(n) -
                      gprime_mean * w.row(p);
        }
        wn = orthonormalize(wn);
        const double drift = (1.0 - (wn * w.transpose()).diagonal().array().abs()).maxCoeff();
        w = wn;
        ++rep.iterations;
        if (drift < tol) {
          rep.converged = true;
          done = true;
          break;
        }
      }
      w_final = w;
    } catch (const Error&) {
      // degenerate directions (rows collapsing); counts as a failed attempt
      continue;
    }
  }
  if (report) *report = rep;
  if (!done) throw NonConvergence("fastica: no convergence after restarts");

  const Eigen::MatrixXd unmix = w_final * whiten;  // rows estimate sources
  return MixingMatrix::normalized(unmix.inverse());
}

Eigen::MatrixXd discretize_matrix(const Eigen::MatrixXd& l, double c, int n) {
  detail::check_square(l, "discretize");
  if (!(c > 0.0) || n < 1) throw InvalidParams("discretize: c > 0 and n >= 1");
  const double grid = c * std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd out = l;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      if (i == j) {
        out(i, j) = 1.0;
        continue;
      }
      const double v = l(i, j);
      // fuzzed ceiling keeps on-grid entries fixed under floating-point noise
      out(i, j) = v == 0.0 ? 0.0
                           : std::copysign(std::ceil(grid * std::abs(v) - 1e-9) / grid, v);
    }
  }
  return out;
}

MixingMatrix discretize(const MixingMatrix& l, double c, int n) {
  return MixingMatrix::from_canonical(discretize_matrix(l.matrix(), c, n));
}

}  // namespace rica
