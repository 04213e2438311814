#include "rica/restimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rica/kernels.hpp"
#include "rica/parallel.hpp"

namespace rica {

namespace {

double median_abs_offdiag(const Eigen::MatrixXd& t) {
  std::vector<double> v;
  const Eigen::Index k = t.rows();
  v.reserve(static_cast<std::size_t>(k * (k - 1)));
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index s = 0; s < k; ++s)
      if (r != s) v.push_back(std::abs(t(r, s)));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Eigen::MatrixXd perturbed_matrix(const Eigen::MatrixXd& l_tilde, const Eigen::MatrixXd& t,
                                 int r, int s, double lambda, int n, PerturbKind which) {
  detail::check_square(l_tilde, "perturbed_matrix");
  const int k = static_cast<int>(l_tilde.rows());
  if (r == s || r < 0 || s < 0 || r >= k || s >= k) {
    throw InvalidParams("perturbed_matrix: need distinct indices in range");
  }
  const double factor = which == PerturbKind::kGamma ? t(r, s) : t(s, r);
  const double coef = lambda * factor / std::sqrt(static_cast<double>(n));
  // only column s moves: L(e_r e_s' - diag(L e_r e_s')) has column s equal to
  // L.col(r) - L(s,r) L.col(s), which keeps the unit diagonal intact
  Eigen::MatrixXd out = l_tilde;
  out.col(s) += coef * (l_tilde.col(r) - l_tilde(s, r) * l_tilde.col(s));
  return out;
}

double h_mapping(const Eigen::MatrixXd& l_tilde, const ScoreTable& table,
                 const Eigen::MatrixXd& x, const Eigen::MatrixXd& t_base, int r, int s,
                 double lambda, PerturbKind which) {
  const int n = static_cast<int>(x.rows());
  const Eigen::MatrixXd pert = perturbed_matrix(l_tilde, t_base, r, s, lambda, n, which);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(pert);
  if (!lu.isInvertible()) throw SingularPerturbation("h_mapping: perturbed matrix singular");
  const Eigen::MatrixXd pinv = lu.inverse();

  // the observed entry involves only residual components r and s
  const Eigen::VectorXd zr = x * pinv.row(r).transpose();
  const Eigen::VectorXd zs = x * pinv.row(s).transpose();
  std::vector<int> rank_r(static_cast<std::size_t>(n)), rank_s(static_cast<std::size_t>(n));
  kernels::argsort_ranks(zr, rank_r.data(), nullptr);
  kernels::argsort_ranks(zs, rank_s.data(), nullptr);

  const int jrow = which == PerturbKind::kGamma ? r : s;  // J-score component
  const int qcol = which == PerturbKind::kGamma ? s : r;  // quantile component
  const std::vector<int>& jranks = which == PerturbKind::kGamma ? rank_r : rank_s;
  const std::vector<int>& qranks = which == PerturbKind::kGamma ? rank_s : rank_r;

  const Eigen::VectorXd& jg = table.J[static_cast<std::size_t>(jrow)];
  const Eigen::VectorXd& qg = table.Q[static_cast<std::size_t>(qcol)];
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += jg(jranks[static_cast<std::size_t>(i)] - 1) * qg(qranks[static_cast<std::size_t>(i)] - 1);
  const double entry =
      (acc - n * table.Jbar(jrow) * table.Qbar(qcol)) / std::sqrt(static_cast<double>(n));

  const double base = which == PerturbKind::kGamma ? t_base(r, s) : t_base(s, r);
  return base * entry;
}

Calibration calibrate_line_search(const std::function<double(double)>& h,
                                  const LineSearchOptions& opt) {
  if (!(opt.c > 0.0) || !(opt.lambda_max > 0.0)) {
    throw InvalidParams("calibrate_line_search: need c > 0 and lambda_max > 0");
  }
  Calibration cal;
  double lam_prev = 0.0, h_prev = 0.0;
  bool have_positive = false;
  const long jmax = static_cast<long>(std::floor(opt.lambda_max * opt.c + 1e-9));
  for (long j = 0; j <= jmax; ++j) {
    const double lam = static_cast<double>(j) / opt.c;
    double v;
    bool singular = false;
    try {
      v = h(lam);
    } catch (const SingularPerturbation&) {
      v = 0.0;  // treated as a sign change at this lambda
      singular = true;
    }
    if (v > 0.0 && !singular) {
      lam_prev = lam;
      h_prev = v;
      have_positive = true;
      continue;
    }
    // crossing found (h <= 0 counts as crossed)
    if (!have_positive) {
      // h(0) should be positive almost surely; treat as unusable search
      cal.status = SearchStatus::kNoSignChange;
      cal.value = 1.0 / opt.lambda_max;
      return cal;
    }
    cal.lambda_lo = lam_prev;
    cal.lambda_hi = lam;
    cal.h_lo = h_prev;
    cal.h_hi = std::min(v, 0.0);
    const double inverse = lam_prev + (1.0 / opt.c) * h_prev / (h_prev - cal.h_hi);
    cal.value = 1.0 / inverse;
    cal.status = singular ? SearchStatus::kSingular : SearchStatus::kOk;
    return cal;
  }
  cal.status = SearchStatus::kNoSignChange;
  cal.lambda_lo = lam_prev;
  cal.h_lo = h_prev;
  cal.value = 1.0 / opt.lambda_max;  // smallest detectable curvature
  return cal;
}

CrossInfoEstimates estimate_cross_info(const MixingMatrix& l_tilde, const ScoreFamily& scores,
                                       const Eigen::MatrixXd& x, const LineSearchOptions& opt) {
  const int k = l_tilde.dim();
  const int n = static_cast<int>(x.rows());
  if (scores.dim() != k || x.cols() != k) throw DimensionMismatch("estimate_cross_info");
  const ScoreTable& table = scores.table(n);

  const Eigen::MatrixXd& l = l_tilde.matrix();
  const Eigen::MatrixXd z = residuals(x, Eigen::VectorXd(), l);
  const RankStatistic base = rank_statistic(component_ranks(z), table, l);
  const double guard = kPositivityGuard * median_abs_offdiag(base.T);

  CrossInfoEstimates ci = CrossInfoEstimates::zeros(k);
  ci.grid_constant = opt.c;
  ci.brackets.resize(static_cast<std::size_t>(2 * k * (k - 1)));

  struct Task {
    int r, s;
    PerturbKind which;
  };
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(2 * k * (k - 1)));
  for (int r = 0; r < k; ++r)
    for (int s = 0; s < k; ++s)
      if (r != s) {
        tasks.push_back({r, s, PerturbKind::kGamma});
        tasks.push_back({r, s, PerturbKind::kRho});
      }

  std::vector<Calibration> results(tasks.size());
  par::for_each_index(tasks.size(), [&](std::size_t ti) {
    const Task& t = tasks[ti];
    const double driving =
        t.which == PerturbKind::kGamma ? base.T(t.r, t.s) : base.T(t.s, t.r);
    Calibration cal;
    if (std::abs(driving) <= guard) {
      cal.status = SearchStatus::kGuardSkipped;
      cal.value = 1.0 / opt.lambda_max;
    } else {
      cal = calibrate_line_search(
          [&](double lam) { return h_mapping(l, table, x, base.T, t.r, t.s, lam, t.which); },
          opt);
    }
    results[ti] = cal;
  });

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Task& t = tasks[ti];
    const Calibration& cal = results[ti];
    if (t.which == PerturbKind::kGamma) {
      ci.gamma_star(t.r, t.s) = cal.value;
      ci.gamma_status(t.r, t.s) = static_cast<std::uint8_t>(cal.status);
    } else {
      ci.rho_star(t.r, t.s) = cal.value;
      ci.rho_status(t.r, t.s) = static_cast<std::uint8_t>(cal.status);
    }
    ci.brackets[ti] = {t.r, t.s, t.which == PerturbKind::kRho,
                       cal.lambda_lo, cal.lambda_hi, cal.h_lo, cal.h_hi};
  }
  return ci;
}

OneStepResult one_step(const MixingMatrix& l_tilde, const ScoreFamily& scores,
                       const Eigen::MatrixXd& x, const CrossInfoEstimates& ci) {
  const int k = l_tilde.dim();
  const int n = static_cast<int>(x.rows());
  if (ci.dim() != k || scores.dim() != k || x.cols() != k) throw DimensionMismatch("one_step");
  if (!ci.gamma_star.allFinite() || !ci.rho_star.allFinite()) {
    throw InvalidParams("one_step: non-finite cross-information estimates");
  }

  const Eigen::MatrixXd& l = l_tilde.matrix();
  const ScoreTable& table = scores.table(n);
  const Eigen::MatrixXd z = residuals(x, Eigen::VectorXd(), l);
  const RankStatistic stat = rank_statistic(component_ranks(z), table, l);

  OneStepResult out{MixingMatrix::identity(k), Eigen::MatrixXd::Zero(k, k),
                    Eigen::MatrixXd::Zero(k, k), Eigen::MatrixXd::Zero(k, k), stat.T, 0, {}};

  for (int p = 0; p < k; ++p) {
    for (int q = 0; q < k; ++q) {
      if (p == q) continue;
      const bool guarded = ci.gstatus(p, q) == SearchStatus::kGuardSkipped ||
                           ci.rstatus(p, q) == SearchStatus::kGuardSkipped;
      const double den = ci.gamma_star(p, q) * ci.gamma_star(q, p) -
                         ci.rho_star(p, q) * ci.rho_star(q, p);
      if (guarded) {
        std::ostringstream os;
        os << "update(" << p << "," << q << ") zeroed: positivity guard";
        out.flags.push_back(os.str());
        continue;
      }
      if (std::abs(den) < kDenominatorGuard) {
        std::ostringstream os;
        os << "update(" << p << "," << q << ") zeroed: near-singular gain denominator";
        out.flags.push_back(os.str());
        continue;
      }
      out.alpha_hat(p, q) = ci.gamma_star(p, q) / den;
      out.beta_hat(p, q) = -ci.rho_star(p, q) / den;
    }
  }

  out.N_hat = (out.alpha_hat.transpose().cwiseProduct(stat.T)) +
              (out.beta_hat.transpose().cwiseProduct(stat.T.transpose()));

  Eigen::MatrixXd inner = out.N_hat - (l * out.N_hat).diagonal().asDiagonal().toDenseMatrix();
  Eigen::MatrixXd update = l * inner / std::sqrt(static_cast<double>(n));
  for (int halve = 0; halve <= 10; ++halve) {
    try {
      out.estimate = MixingMatrix::normalized(l + update);
      out.halvings = halve;
      if (halve > 0) out.flags.push_back("update halved " + std::to_string(halve) + "x");
      return out;
    } catch (const Error&) {
      update *= 0.5;
    }
  }
  throw SingularUpdate("one_step: update kept a singular/ambiguous matrix after 10 halvings");
}

std::string REstimatorResult::flags() const {
  std::ostringstream os;
  for (const auto& st : steps) {
    for (std::size_t j = 0; j < st.gaussian_fallback.size(); ++j) {
      if (st.gaussian_fallback[j]) os << "step" << st.step << ":gauss-fallback[" << j << "];";
    }
    const std::string ci_flags = st.ci.flag_summary();
    if (!ci_flags.empty()) os << "step" << st.step << ":" << ci_flags;
    for (const auto& f : st.flags) os << "step" << st.step << ":" << f << ";";
  }
  return os.str();
}

REstimatorResult data_driven_r_estimator(const Eigen::MatrixXd& x, const MixingMatrix& prelim,
                                         const REstimatorOptions& opt,
                                         const Eigen::MatrixXd* truth) {
  const int k = prelim.dim();
  const int n = static_cast<int>(x.rows());
  if (x.cols() != k) throw DimensionMismatch("data_driven_r_estimator");
  if (opt.steps < 0) throw InvalidParams("data_driven_r_estimator: steps >= 0");

  REstimatorResult out{MixingMatrix::identity(k), {}, {}, {}};
  MixingMatrix current = prelim;
  if (opt.discretize_preliminary) {
    try {
      current = discretize(prelim, opt.c, n);
    } catch (const Error&) {
      // dominance ordering too fragile to snap; keep the raw preliminary
      StepDiagnostics d;
      d.step = 0;
      d.flags.push_back("discretization skipped: canonical form not preserved");
      out.steps.push_back(std::move(d));
    }
  }
  out.path.push_back(current.matrix());
  if (truth) out.ae_trace.push_back(amari_error(current.matrix(), *truth));

  const LineSearchOptions ls{opt.c, opt.lambda_max};
  std::vector<SkewTParams> warm(static_cast<std::size_t>(k));
  std::vector<bool> have_warm(static_cast<std::size_t>(k), false);
  for (int t = 1; t <= opt.steps; ++t) {
    StepDiagnostics diag;
    diag.step = t;
    diag.gaussian_fallback.assign(static_cast<std::size_t>(k), false);

    // residuals under the current estimate, centered at componentwise medians
    Eigen::MatrixXd z = residuals(x, Eigen::VectorXd(), current.matrix());
    const Eigen::VectorXd med = columnwise_median(z);
    z.rowwise() -= med.transpose();

    std::vector<ScorePtr> comps(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      if (opt.scores == ReferenceScores::kGaussian) {
        comps[static_cast<std::size_t>(j)] = make_gaussian();
        continue;
      }
      try {
        SkewTFitReport rep;
        const SkewTParams* seed = have_warm[static_cast<std::size_t>(j)]
                                      ? &warm[static_cast<std::size_t>(j)]
                                      : nullptr;
        const SkewTParams w = fit_skew_t_mle(z.col(j), &rep, seed);
        warm[static_cast<std::size_t>(j)] = w;
        have_warm[static_cast<std::size_t>(j)] = true;
        diag.omega.push_back(w);
        comps[static_cast<std::size_t>(j)] = make_skew_t(w, /*standardize=*/false);
      } catch (const Error&) {
        diag.gaussian_fallback[static_cast<std::size_t>(j)] = true;
        const double sd = std::sqrt((z.col(j).array() - z.col(j).mean()).square().mean());
        comps[static_cast<std::size_t>(j)] = make_gaussian(0.0, sd > 0.0 ? sd : 1.0);
        diag.omega.push_back(SkewTParams{});
      }
    }
    const ScoreFamily fitted(std::move(comps));

    diag.ci = estimate_cross_info(current, fitted, x, ls);
    OneStepResult step = one_step(current, fitted, x, diag.ci);
    diag.T = step.T;
    diag.halvings = step.halvings;
    for (auto& f : step.flags) diag.flags.push_back(std::move(f));

    current = step.estimate;
    out.path.push_back(current.matrix());
    if (truth) out.ae_trace.push_back(amari_error(current.matrix(), *truth));
    out.steps.push_back(std::move(diag));
  }

  out.estimate = current;
  return out;
}

}  // namespace rica
