#include "rica/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace rica {

namespace detail {

void check_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionMismatch(os.str());
  }
  if (!m.allFinite()) throw InvalidParams(std::string(what) + ": non-finite entries");
}

void check_invertible(const Eigen::MatrixXd& m, const char* what) {
  check_square(m, what);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw SingularMatrix(std::string(what) + ": singular matrix");
}

}  // namespace detail

Eigen::MatrixXd pi_normalize(const Eigen::MatrixXd& m) {
  detail::check_invertible(m, "pi_normalize");
  const int k = static_cast<int>(m.rows());

  // Columns rescaled to unit Euclidean norm; only their absolute values
  // matter for the ordering step.
  Eigen::MatrixXd b(k, k);
  for (int j = 0; j < k; ++j) {
    const double norm = m.col(j).norm();
    if (norm <= 0.0) throw SingularMatrix("pi_normalize: zero column");
    b.col(j) = m.col(j).cwiseAbs() / norm;
  }

  // Greedy column assignment: position i takes the unassigned column with
  // the largest row-i magnitude. This is the unique permutation satisfying
  // the strict dominance constraints when no tie occurs.
  std::vector<int> perm(k, -1);
  std::vector<bool> used(k, false);
  for (int i = 0; i < k; ++i) {
    int best = -1;
    double best_v = -1.0, second_v = -1.0;
    for (int c = 0; c < k; ++c) {
      if (used[c]) continue;
      const double v = b(i, c);
      if (v > best_v) {
        second_v = best_v;
        best_v = v;
        best = c;
      } else if (v > second_v) {
        second_v = v;
      }
    }
    if (best_v <= 0.0) throw AmbiguousOrdering("pi_normalize: no dominant column for row");
    if (second_v >= 0.0 && best_v - second_v <= kDominanceTieTol * best_v) {
      std::ostringstream os;
      os << "pi_normalize: dominance tie at row " << i;
      throw AmbiguousOrdering(os.str());
    }
    perm[i] = best;
    used[best] = true;
  }

  // Unit-diagonal rescaling. The column-norm factor cancels, so the result
  // depends on m only through the chosen permutation.
  Eigen::MatrixXd out(k, k);
  for (int j = 0; j < k; ++j) {
    const double pivot = m(j, perm[j]);
    out.col(j) = m.col(perm[j]) / pivot;
  }
  return out;
}

MixingMatrix MixingMatrix::normalized(const Eigen::MatrixXd& m) {
  return MixingMatrix(pi_normalize(m));
}

MixingMatrix MixingMatrix::from_canonical(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd renorm = pi_normalize(m);
  if (((renorm - m).cwiseAbs().maxCoeff()) > kMatrixTol * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw InvalidParams("from_canonical: matrix is not canonical");
  }
  return MixingMatrix(std::move(renorm));
}

MixingMatrix MixingMatrix::identity(int k) {
  return MixingMatrix(Eigen::MatrixXd::Identity(k, k));
}

DiagFreeVector vecd_o(const Eigen::MatrixXd& m) {
  detail::check_square(m, "vecd_o");
  const int k = static_cast<int>(m.rows());
  DiagFreeVector v;
  v.dim = k;
  v.values = offdiag_stack(m);
  return v;
}

Eigen::VectorXd offdiag_stack(const Eigen::MatrixXd& m) {
  const int k = static_cast<int>(m.rows());
  Eigen::VectorXd out(k * (k - 1));
  int idx = 0;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      if (i != j) out(idx++) = m(i, j);
  return out;
}

Eigen::MatrixXd matd_o(const Eigen::VectorXd& values, int k) {
  if (values.size() != static_cast<Eigen::Index>(k) * (k - 1)) {
    throw DimensionMismatch("matd_o: vector length does not match dimension");
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  int idx = 0;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      if (i != j) m(i, j) = values(idx++);
  return m;
}

Eigen::MatrixXd matd_o(const DiagFreeVector& v) { return matd_o(v.values, v.dim); }

Eigen::MatrixXd selection_matrix(int k) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k * (k - 1), k * k);
  int row = 0;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      if (i != j) c(row++, j * k + i) = 1.0;
  return c;
}

double amari_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  detail::check_invertible(a, "amari_error");
  detail::check_invertible(b, "amari_error");
  if (a.rows() != b.rows()) throw DimensionMismatch("amari_error: dimension mismatch");
  const int k = static_cast<int>(a.rows());
  if (k == 1) return 0.0;
  const Eigen::MatrixXd w = (b.fullPivLu().solve(a)).cwiseAbs();
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += w.row(i).sum() / w.row(i).maxCoeff() - 1.0;
  for (int j = 0; j < k; ++j) acc += w.col(j).sum() / w.col(j).maxCoeff() - 1.0;
  return acc / (2.0 * k * (k - 1));
}

double min_distance_index(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
  detail::check_invertible(est, "min_distance_index");
  detail::check_invertible(truth, "min_distance_index");
  if (est.rows() != truth.rows()) throw DimensionMismatch("min_distance_index");
  const int k = static_cast<int>(est.rows());
  if (k == 1) return 0.0;
  if (k > 8) throw Unsupported("min_distance_index: exact minimization limited to k <= 8");

  const Eigen::MatrixXd g = est.fullPivLu().solve(truth);

  // cost of sending row i to position j, after the optimal row scaling
  Eigen::MatrixXd cost(k, k);
  for (int i = 0; i < k; ++i) {
    const double rn2 = g.row(i).squaredNorm();
    for (int j = 0; j < k; ++j) cost(i, j) = 1.0 - g(i, j) * g(i, j) / rn2;
  }

  std::vector<int> sigma(k);
  std::iota(sigma.begin(), sigma.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < k; ++i) total += cost(i, sigma[i]);
    best = std::min(best, total);
  } while (std::next_permutation(sigma.begin(), sigma.end()));

  return std::sqrt(std::max(0.0, best)) / std::sqrt(static_cast<double>(k - 1));
}

Eigen::MatrixXd information_sandwich(const Eigen::MatrixXd& L, const Eigen::MatrixXd& G) {
  detail::check_invertible(L, "information_sandwich");
  const int k = static_cast<int>(L.rows());
  if (G.rows() != k * k || G.cols() != k * k) {
    throw DimensionMismatch("information_sandwich: kernel must be k^2 x k^2");
  }
  const Eigen::MatrixXd linv = L.inverse();
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(k * k, k * k);
  for (int j = 0; j < k; ++j) kron.block(j * k, j * k, k, k) = linv;
  const Eigen::MatrixXd c = selection_matrix(k);
  return c * kron.transpose() * G * kron * c.transpose();
}

Eigen::MatrixXd cross_info_kernel(const Eigen::MatrixXd& gamma_star,
                                  const Eigen::MatrixXd& rho_star) {
  const int k = static_cast<int>(gamma_star.rows());
  if (rho_star.rows() != k || gamma_star.cols() != k || rho_star.cols() != k) {
    throw DimensionMismatch("cross_info_kernel");
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k * k, k * k);
  for (int p = 0; p < k; ++p) {
    for (int q = 0; q < k; ++q) {
      if (p == q) continue;
      // vec position of entry (q,p) is p*k+q
      g(p * k + q, p * k + q) += gamma_star(q, p);
      g(p * k + q, q * k + p) += rho_star(p, q);
    }
  }
  return g;
}

Eigen::MatrixXd gamma_star_matrix(const MixingMatrix& L, const CrossInfoEstimates& ci) {
  if (ci.dim() != L.dim()) throw DimensionMismatch("gamma_star_matrix");
  if (!ci.gamma_star.allFinite() || !ci.rho_star.allFinite()) {
    throw InvalidParams("gamma_star_matrix: non-finite cross-information estimates");
  }
  return information_sandwich(L.matrix(), cross_info_kernel(ci.gamma_star, ci.rho_star));
}

// cross_info.hpp bits ------------------------------------------------------

const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::kOk: return "ok";
    case SearchStatus::kNoSignChange: return "no-sign-change";
    case SearchStatus::kGuardSkipped: return "guard-skipped";
    case SearchStatus::kSingular: return "singular-perturbation";
  }
  return "?";
}

CrossInfoEstimates CrossInfoEstimates::zeros(int k) {
  CrossInfoEstimates ci;
  ci.gamma_star = Eigen::MatrixXd::Zero(k, k);
  ci.rho_star = Eigen::MatrixXd::Zero(k, k);
  ci.gamma_status.setZero(k, k);
  ci.rho_status.setZero(k, k);
  return ci;
}

bool CrossInfoEstimates::all_ok() const {
  return gamma_status.maxCoeff() == 0 && rho_status.maxCoeff() == 0;
}

std::string CrossInfoEstimates::flag_summary() const {
  std::ostringstream os;
  const int k = dim();
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r == s) continue;
      if (gstatus(r, s) != SearchStatus::kOk)
        os << "g[" << r << "," << s << "]=" << to_string(gstatus(r, s)) << ";";
      if (rstatus(r, s) != SearchStatus::kOk)
        os << "r[" << r << "," << s << "]=" << to_string(rstatus(r, s)) << ";";
    }
  }
  return os.str();
}

}  // namespace rica
