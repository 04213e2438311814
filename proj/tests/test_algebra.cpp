#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "rica/algebra.hpp"

using namespace rica;

namespace {

Eigen::MatrixXd paper_l() {
  Eigen::MatrixXd l(3, 3);
  l << 1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0;
  return l;
}

Eigen::MatrixXd random_nonsingular(std::mt19937_64& gen, int k) {
  std::normal_distribution<double> nd;
  while (true) {
    Eigen::MatrixXd m(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) m(i, j) = nd(gen);
    if (std::abs(m.determinant()) > 1e-3) return m;
  }
}

// random observational-equivalence transform m -> m D1 P D2
Eigen::MatrixXd random_equivalent(const Eigen::MatrixXd& m, std::mt19937_64& gen) {
  const int k = static_cast<int>(m.rows());
  std::uniform_real_distribution<double> ud(0.2, 3.0);
  std::bernoulli_distribution flip(0.5);
  Eigen::MatrixXd d1 = Eigen::MatrixXd::Zero(k, k), d2 = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    d1(i, i) = ud(gen) * (flip(gen) ? -1.0 : 1.0);
    d2(i, i) = ud(gen) * (flip(gen) ? -1.0 : 1.0);
  }
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;
  return m * d1 * p * d2;
}

}  // namespace

TEST_CASE("pi_normalize: identity and the simulation mixing matrix are fixed points") {
  const Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
  CHECK((pi_normalize(i3) - i3).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd l = paper_l();
  CHECK((pi_normalize(l) - l).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_NOTHROW(MixingMatrix::from_canonical(l));
}

TEST_CASE("pi_normalize collapses equivalence classes") {
  std::mt19937_64 gen(7);
  const Eigen::MatrixXd l = paper_l();
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::MatrixXd m = random_equivalent(l, gen);
    CHECK((pi_normalize(m) - l).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pi_normalize is exactly idempotent") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::MatrixXd m;
    Eigen::MatrixXd once;
    while (true) {
      m = random_nonsingular(gen, rep % 2 == 0 ? 3 : 4);
      try {
        once = pi_normalize(m);
        break;
      } catch (const AmbiguousOrdering&) {
        continue;  // re-draw the measure-zero tie cases
      }
    }
    const Eigen::MatrixXd twice = pi_normalize(once);
    CHECK((twice - once).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("pi_normalize error paths") {
  Eigen::MatrixXd sing(3, 3);
  sing << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  CHECK_THROWS_AS(pi_normalize(sing), SingularMatrix);

  // two columns with identical dominance pattern
  Eigen::MatrixXd tie(2, 2);
  tie << 1.0, 1.0, 1.0, -1.0;
  CHECK_THROWS_AS(pi_normalize(tie), AmbiguousOrdering);
}

TEST_CASE("vecd_o / matd_o") {
  const Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
  CHECK(vecd_o(i3).values.cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd z = matd_o(Eigen::VectorXd::Zero(6), 3);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);

  // entries 1..9 column-wise, diagonal omitted
  Eigen::MatrixXd m(3, 3);
  m << 1, 4, 7, 2, 5, 8, 3, 6, 9;
  Eigen::VectorXd expect(6);
  expect << 2, 3, 4, 6, 7, 8;
  CHECK((vecd_o(m).values - expect).cwiseAbs().maxCoeff() == 0.0);

  // round trips
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd v(12);
    for (int i = 0; i < 12; ++i) v(i) = nd(gen);
    CHECK((vecd_o(matd_o(v, 4)).values - v).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXd a = random_nonsingular(gen, 4);
    Eigen::MatrixXd off = a;
    off.diagonal().setZero();
    CHECK((matd_o(vecd_o(a)) - off).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("selection matrix") {
  for (int k : {2, 3, 4}) {
    const Eigen::MatrixXd c = selection_matrix(k);
    REQUIRE(c.rows() == k * (k - 1));
    REQUIRE(c.cols() == k * k);
    for (int r = 0; r < c.rows(); ++r) {
      CHECK(c.row(r).sum() == 1.0);
      CHECK(c.row(r).maxCoeff() == 1.0);
      CHECK(c.row(r).minCoeff() == 0.0);
    }
    std::mt19937_64 gen(17);
    Eigen::MatrixXd m = random_nonsingular(gen, k);
    m.diagonal().setZero();
    const Eigen::VectorXd vec = Eigen::Map<const Eigen::VectorXd>(m.data(), k * k);
    CHECK(((c * vec) - vecd_o(m).values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((offdiag_stack(m) - vecd_o(m).values).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("amari error: axioms and the 2x2 hand value") {
  std::mt19937_64 gen(23);
  const Eigen::MatrixXd a = random_nonsingular(gen, 3);
  CHECK(amari_error(a, a) < 1e-14);  // zero up to the linear-solve roundoff

  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::MatrixXd b = random_nonsingular(gen, 3);
    const Eigen::MatrixXd equiv = random_equivalent(b, gen);
    CHECK(amari_error(equiv, b) < 1e-12);
  }

  // W = B^{-1} A = [[1,.5],[.5,1]]: all four row/column terms are 1.5 - 1
  Eigen::MatrixXd w(2, 2);
  w << 1.0, 0.5, 0.5, 1.0;
  const Eigen::MatrixXd b2 = random_nonsingular(gen, 2);
  CHECK(amari_error(b2 * w, b2) == doctest::Approx(0.5).epsilon(1e-12));

  // scale-free in each argument
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd x = random_nonsingular(gen, 3);
    const Eigen::MatrixXd y = random_nonsingular(gen, 3);
    const double c = 0.1 + 5.0 * rep / 50.0;
    CHECK(amari_error(c * x, y) == doctest::Approx(amari_error(x, y)).epsilon(1e-10));
  }

  // bounds
  for (int rep = 0; rep < 1000; ++rep) {
    const double ae = amari_error(random_nonsingular(gen, 3), random_nonsingular(gen, 3));
    CHECK(ae >= 0.0);
    CHECK(ae <= 1.0);
  }
}

TEST_CASE("minimum distance index") {
  std::mt19937_64 gen(29);
  const Eigen::MatrixXd a = random_nonsingular(gen, 3);
  CHECK(min_distance_index(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  for (int rep = 0; rep < 20; ++rep) {
    CHECK(min_distance_index(random_equivalent(a, gen), a) < 1e-10);
  }

  // grid-search oracle over permutations and a coarse per-row scale grid
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd e(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) e(i, j) = nd(gen);
    const Eigen::MatrixXd est = a + 0.05 * e;
    const Eigen::MatrixXd g = est.fullPivLu().solve(a);

    double best = 1e300;
    std::vector<int> sigma{0, 1, 2};
    do {
      // coarse scale grid per row around the plain least-squares value
      std::array<std::vector<double>, 3> grids;
      for (int i = 0; i < 3; ++i) {
        const double centre = g(i, sigma[static_cast<std::size_t>(i)]) / g.row(i).squaredNorm();
        for (int t = -40; t <= 40; ++t) grids[static_cast<std::size_t>(i)].push_back(centre * (1.0 + 0.01 * t));
      }
      for (double d0 : grids[0])
        for (double d1 : grids[1])
          for (double d2 : grids[2]) {
            Eigen::MatrixXd pd = Eigen::MatrixXd::Zero(3, 3);
            pd.row(sigma[0]) = d0 * g.row(0);
            pd.row(sigma[1]) = d1 * g.row(1);
            pd.row(sigma[2]) = d2 * g.row(2);
            best = std::min(best, (pd - Eigen::MatrixXd::Identity(3, 3)).squaredNorm());
          }
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    const double oracle = std::sqrt(best) / std::sqrt(2.0);

    const double mdi = min_distance_index(est, a);
    CHECK(mdi >= 0.0);
    CHECK(mdi == doctest::Approx(oracle).epsilon(0.10));
    CHECK(mdi <= oracle + 1e-12);  // exact scaling beats the coarse grid
  }
}

TEST_CASE("cross-information matrix assembly at k = 2") {
  // gamma* = a on both pairs, rho* = 0 -> diagonal matrix diag(a, a)
  const double a = 1.7;
  CrossInfoEstimates ci = CrossInfoEstimates::zeros(2);
  ci.gamma_star << 0.0, a, a, 0.0;
  const MixingMatrix eye = MixingMatrix::identity(2);
  const Eigen::MatrixXd g1 = gamma_star_matrix(eye, ci);
  Eigen::MatrixXd expect1(2, 2);
  expect1 << a, 0.0, 0.0, a;
  CHECK((g1 - expect1).cwiseAbs().maxCoeff() < 1e-14);

  // gamma* = rho* = 1 everywhere: kernel is sum of both unit Kronecker terms
  CrossInfoEstimates ones = CrossInfoEstimates::zeros(2);
  ones.gamma_star << 0, 1, 1, 0;
  ones.rho_star << 0, 1, 1, 0;
  const Eigen::MatrixXd g2 = gamma_star_matrix(eye, ones);
  Eigen::MatrixXd expect2(2, 2);
  expect2 << 1.0, 1.0, 1.0, 1.0;
  CHECK((g2 - expect2).cwiseAbs().maxCoeff() < 1e-14);

  // direct expansion of the kernel for k = 2
  const Eigen::MatrixXd kernel = cross_info_kernel(ones.gamma_star, ones.rho_star);
  Eigen::MatrixXd expect_kernel = Eigen::MatrixXd::Zero(4, 4);
  // vec positions: entry (1,0) -> 1, entry (0,1) -> 2
  expect_kernel(1, 1) = 1.0;
  expect_kernel(2, 2) = 1.0;
  expect_kernel(1, 2) = 1.0;
  expect_kernel(2, 1) = 1.0;
  CHECK((kernel - expect_kernel).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one-dimensional edge cases") {
  Eigen::MatrixXd one(1, 1);
  one << 2.5;
  CHECK(amari_error(one, one) == 0.0);
  CHECK(min_distance_index(one, one) == 0.0);
}
