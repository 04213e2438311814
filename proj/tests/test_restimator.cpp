#include <doctest.h>

#include "rica/restimator.hpp"
#include "rica/rng.hpp"
#include "rica/simharness.hpp"

using namespace rica;

namespace {

Eigen::MatrixXd paper_l() {
  Eigen::MatrixXd l(3, 3);
  l << 1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0;
  return l;
}

Eigen::MatrixXd gaussian_mixed(int n, std::uint64_t seed, const Eigen::MatrixXd& l) {
  RngStream rng(seed);
  const auto g = make_gaussian();
  Eigen::MatrixXd z(n, l.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < l.cols(); ++j) z(i, j) = g->sample(rng);
  return z * l.transpose();
}

}  // namespace

TEST_CASE("perturbed matrix") {
  // lambda = 0 returns the matrix bit-identically
  const Eigen::MatrixXd l = paper_l();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(3, 3);
  t << 0, 1.5, -2, 0.7, 0, 0.4, -1, 2.2, 0;
  CHECK((perturbed_matrix(l, t, 0, 1, 0.0, 500, PerturbKind::kGamma) - l).cwiseAbs().maxCoeff() ==
        0.0);

  // hand case: k=2, identity, T_01 = 2, lambda = 1, n = 4
  Eigen::MatrixXd t2(2, 2);
  t2 << 0, 2, -3, 0;
  const Eigen::MatrixXd p =
      perturbed_matrix(Eigen::MatrixXd::Identity(2, 2), t2, 0, 1, 1.0, 4, PerturbKind::kGamma);
  Eigen::MatrixXd expect(2, 2);
  expect << 1, 1, 0, 1;
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-15);

  // the rho variant drives the step with the transposed entry
  const Eigen::MatrixXd pr =
      perturbed_matrix(Eigen::MatrixXd::Identity(2, 2), t2, 0, 1, 1.0, 4, PerturbKind::kRho);
  Eigen::MatrixXd expect_r(2, 2);
  expect_r << 1, -1.5, 0, 1;
  CHECK((pr - expect_r).cwiseAbs().maxCoeff() < 1e-15);

  // unit diagonal preserved for a general canonical matrix
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      if (r == s) continue;
      const Eigen::MatrixXd q = perturbed_matrix(l, t, r, s, 2.7, 123, PerturbKind::kGamma);
      CHECK(q.diagonal().isOnes(1e-14));
    }
}

TEST_CASE("h mapping at lambda 0 is the squared entry") {
  const Eigen::MatrixXd l = paper_l();
  const Eigen::MatrixXd x = gaussian_mixed(300, 17, l);
  const ScoreFamily fam({make_gaussian(), make_gaussian(), make_gaussian()});
  const ScoreTable& tab = fam.table(300);
  const RankStatistic st = rank_statistic(component_ranks(residuals(x, Eigen::VectorXd(), l)), tab, l);
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      if (r == s) continue;
      CHECK(h_mapping(l, tab, x, st.T, r, s, 0.0, PerturbKind::kGamma) ==
            st.T(r, s) * st.T(r, s));
      CHECK(h_mapping(l, tab, x, st.T, r, s, 0.0, PerturbKind::kRho) ==
            st.T(s, r) * st.T(s, r));
    }
}

TEST_CASE("line-search calibration on the synthetic linear oracle") {
  // exactly linear h with slope parameter 0.5: the interpolated root is exact
  auto h = [](double lam) { return (1.0 - 0.5 * lam) * 4.0; };
  for (double c : {10.0, 20.0, 40.0}) {
    const Calibration cal = calibrate_line_search(h, {c, 10.0});
    CHECK(cal.status == SearchStatus::kOk);
    CHECK(cal.value == doctest::Approx(0.5).epsilon(1e-12));
  }
  // grid refinement changes nothing on the linear oracle
  const double v1 = calibrate_line_search(h, {20.0, 10.0}).value;
  const double v2 = calibrate_line_search(h, {40.0, 10.0}).value;
  CHECK(std::abs(v1 - v2) <= 2.0 / (20.0 * std::sqrt(400.0)));

  // a slope that never crosses by lambda_max falls back to 1/lambda_max
  const Calibration none = calibrate_line_search([](double) { return 1.0; }, {20.0, 10.0});
  CHECK(none.status == SearchStatus::kNoSignChange);
  CHECK(none.value == doctest::Approx(0.1).epsilon(1e-12));

  // mildly curved h still lands near the inverse root
  auto hc = [](double lam) { return (1.0 - 0.8 * lam + 0.01 * lam * lam) * 2.5; };
  const Calibration cc = calibrate_line_search(hc, {20.0, 10.0});
  CHECK(cc.status == SearchStatus::kOk);
  CHECK(cc.value == doctest::Approx(1.0 / 1.266) .epsilon(0.02));
}

TEST_CASE("h decreases linearly with the predicted slope (Gaussian data)") {
  const Eigen::MatrixXd l = paper_l();
  const ScoreFamily fam({make_gaussian(), make_gaussian(), make_gaussian()});
  const double gamma_star = 1.0;  // Gaussian f = g

  std::vector<double> ratios;
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::MatrixXd x = gaussian_mixed(2000, 600 + rep, l);
    const ScoreTable& tab = fam.table(2000);
    const RankStatistic st =
        rank_statistic(component_ranks(residuals(x, Eigen::VectorXd(), l)), tab, l);
    // least-squares slope of h over lambda in {0, 0.25, ..., 2}
    double sxx = 0.0, sxy = 0.0, sx = 0.0, sy = 0.0;
    int m = 0;
    for (double lam = 0.0; lam <= 2.0 + 1e-9; lam += 0.25) {
      const double hv = h_mapping(l, tab, x, st.T, 0, 1, lam, PerturbKind::kGamma);
      sx += lam;
      sy += hv;
      sxx += lam * lam;
      sxy += lam * hv;
      ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double predicted = -gamma_star * st.T(0, 1) * st.T(0, 1);
    if (std::abs(predicted) > 0.05) ratios.push_back(slope / predicted);
  }
  REQUIRE(ratios.size() > 10);
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[ratios.size() / 2] == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("a sign change is found for almost every Gaussian replication") {
  const Eigen::MatrixXd l = paper_l();
  const ScoreFamily fam({make_gaussian(), make_gaussian(), make_gaussian()});
  int found = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const Eigen::MatrixXd x = gaussian_mixed(500, 900 + rep, l);
    const ScoreTable& tab = fam.table(500);
    const RankStatistic st =
        rank_statistic(component_ranks(residuals(x, Eigen::VectorXd(), l)), tab, l);
    const Calibration cal = calibrate_line_search(
        [&](double lam) { return h_mapping(l, tab, x, st.T, 0, 1, lam, PerturbKind::kGamma); },
        {20.0, 10.0});
    if (cal.status == SearchStatus::kOk) ++found;
  }
  CHECK(found >= static_cast<int>(0.95 * reps));
}

TEST_CASE("cross-information estimation on Gaussian data") {
  const Eigen::MatrixXd l = paper_l();
  const ScoreFamily fam({make_gaussian(), make_gaussian(), make_gaussian()});
  const MixingMatrix lm = MixingMatrix::from_canonical(l);

  std::vector<double> rho01;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd x = gaussian_mixed(2000, 1500 + rep, l);
    const CrossInfoEstimates ci = estimate_cross_info(lm, fam, x, {20.0, 10.0});
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) {
        if (r == s) continue;
        CHECK(ci.gamma_star(r, s) > 0.0);
        CHECK(ci.rho_star(r, s) > 0.0);
      }
    rho01.push_back(ci.rho_star(0, 1));
  }
  std::sort(rho01.begin(), rho01.end());
  CHECK(rho01[10] > 0.6);
  CHECK(rho01[10] < 1.6);
}

TEST_CASE("one step: gain algebra, zero-update fixed point, route equivalence") {
  const Eigen::MatrixXd l = paper_l();
  const MixingMatrix lm = MixingMatrix::from_canonical(l);
  const ScoreFamily fam({make_gaussian(), make_gaussian(), make_gaussian()});
  const Eigen::MatrixXd x = gaussian_mixed(500, 77, l);
  const int n = 500;

  CrossInfoEstimates ci = CrossInfoEstimates::zeros(3);
  ci.gamma_star << 0, 1.1, 0.9, 1.3, 0, 1.0, 0.8, 1.2, 0;
  ci.rho_star << 0, 0.9, 1.1, 0.95, 0, 1.05, 1.0, 0.85, 0;

  const OneStepResult step = one_step(lm, fam, x, ci);

  // hand-checked gain entries
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      if (p == q) {
        CHECK(step.alpha_hat(p, q) == 0.0);
        continue;
      }
      const double den = ci.gamma_star(p, q) * ci.gamma_star(q, p) -
                         ci.rho_star(p, q) * ci.rho_star(q, p);
      CHECK(step.alpha_hat(p, q) == doctest::Approx(ci.gamma_star(p, q) / den).epsilon(1e-12));
      CHECK(step.beta_hat(p, q) == doctest::Approx(-ci.rho_star(p, q) / den).epsilon(1e-12));
      CHECK(step.N_hat(p, q) ==
            doctest::Approx(step.alpha_hat(q, p) * step.T(p, q) +
                            step.beta_hat(q, p) * step.T(q, p))
                .epsilon(1e-12));
    }

  // route equivalence with the inverse-information form
  const Eigen::MatrixXd gamma = gamma_star_matrix(lm, ci);
  const RankStatistic st =
      rank_statistic(component_ranks(residuals(x, Eigen::VectorXd(), l)), fam.table(n), l);
  const Eigen::VectorXd route_b =
      offdiag_stack(l) + gamma.fullPivLu().solve(st.delta.values) / std::sqrt(double(n));
  const Eigen::MatrixXd inner = step.N_hat - (l * step.N_hat).diagonal().asDiagonal().toDenseMatrix();
  const Eigen::VectorXd route_a = offdiag_stack(l + l * inner / std::sqrt(double(n)));
  CHECK((route_a - route_b).cwiseAbs().maxCoeff() < 1e-8);

  // all searches guarded: the update vanishes and the input is returned exactly
  CrossInfoEstimates guarded = CrossInfoEstimates::zeros(3);
  guarded.gamma_star.setOnes();
  guarded.rho_star.setZero();
  guarded.gamma_status.setConstant(static_cast<std::uint8_t>(SearchStatus::kGuardSkipped));
  const OneStepResult fixed = one_step(lm, fam, x, guarded);
  CHECK((fixed.estimate.matrix() - l).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fixed.N_hat.cwiseAbs().maxCoeff() == 0.0);

  // near-singular denominator is zeroed and flagged
  CrossInfoEstimates bad = CrossInfoEstimates::zeros(3);
  bad.gamma_star.setOnes();
  bad.rho_star.setOnes();  // gamma*gamma - rho*rho = 0
  const OneStepResult zeroed = one_step(lm, fam, x, bad);
  CHECK(zeroed.N_hat.cwiseAbs().maxCoeff() == 0.0);
  CHECK(!zeroed.flags.empty());
}

TEST_CASE("data-driven estimator basics") {
  const Eigen::MatrixXd l = paper_l();

  // T = 0 steps returns the (discretized) preliminary unchanged
  const Generated gen = generate("B", 400, 2024);
  const MixingMatrix prelim = fobi(gen.x);
  REstimatorOptions opt;
  opt.steps = 0;
  const REstimatorResult r0 = data_driven_r_estimator(gen.x, prelim, opt, &gen.truth);
  CHECK(r0.path.size() == 1);
  CHECK(r0.ae_trace.size() == 1);
  CHECK((r0.estimate.matrix() - discretize(prelim, opt.c, 400).matrix()).cwiseAbs().maxCoeff() ==
        0.0);

  REstimatorOptions opt1;
  opt1.steps = 1;
  const REstimatorResult r1 = data_driven_r_estimator(gen.x, prelim, opt1, &gen.truth);
  CHECK(r1.path.size() == 2);
  CHECK(r1.steps.size() == 1);
  CHECK(r1.steps[0].omega.size() == 3);
  CHECK_NOTHROW(MixingMatrix::from_canonical(r1.estimate.matrix()));

  // Gaussian reference scores skip the fitting stage
  REstimatorOptions optg;
  optg.steps = 1;
  optg.scores = ReferenceScores::kGaussian;
  CHECK_NOTHROW(data_driven_r_estimator(gen.x, prelim, optg));
}
