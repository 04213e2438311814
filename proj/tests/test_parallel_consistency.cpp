#include <doctest.h>

#include <sstream>

#include "rica/kernels.hpp"
#include "rica/parallel.hpp"
#include "rica/ranks.hpp"
#include "rica/restimator.hpp"
#include "rica/rng.hpp"
#include "rica/simharness.hpp"

using namespace rica;

namespace {

struct JobsGuard {
  explicit JobsGuard(int jobs) { par::set_jobs(jobs); }
  ~JobsGuard() { par::set_jobs(0); }
};

Eigen::MatrixXd random_matrix(int n, int k, std::uint64_t seed) {
  RngStream rng(seed);
  Eigen::MatrixXd m(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("parallel kernels are bit-identical to their serial references") {
  const Eigen::MatrixXd x = random_matrix(403, 3, 1);
  const Eigen::MatrixXd vinv =
      (Eigen::Vector3d(1.0, 2.0, 0.5).asDiagonal().toDenseMatrix() +
       0.1 * Eigen::MatrixXd::Ones(3, 3));

  for (int jobs : {1, 2, 4}) {
    JobsGuard guard(jobs);
    CAPTURE(jobs);
    CHECK((kernels::pairwise_differences(x) - kernels::pairwise_differences_serial(x))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    const Eigen::MatrixXd d = kernels::pairwise_differences_serial(x);
    CHECK((kernels::m_step_sum(d, vinv, kernels::MWeight::kTyler, 0.0) -
           kernels::m_step_sum_serial(d, vinv, kernels::MWeight::kTyler, 0.0))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((kernels::m_step_sum(d, vinv, kernels::MWeight::kHuber, 2.5) -
           kernels::m_step_sum_serial(d, vinv, kernels::MWeight::kHuber, 2.5))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    auto term = [](std::size_t i) { return std::sin(0.1 * static_cast<double>(i)); };
    CHECK(par::block_sum(10'000, term) == par::block_sum_serial(10'000, term));

    CHECK((component_ranks(x).ranks - component_ranks_serial(x).ranks).cwiseAbs().maxCoeff() == 0);
  }
}

TEST_CASE("thread count does not change experiment results") {
  SimConfig cfg;
  cfg.setup = "B";
  cfg.n = 150;
  cfg.reps = 4;
  cfg.seed = 5150;
  cfg.estimators = {"fobi", "r(prelim=fobi,steps=1,scores=gauss)"};

  std::string serial_csv, parallel_csv;
  {
    JobsGuard guard(1);
    std::ostringstream os;
    write_csv(run_experiment(cfg), os, /*include_runtime=*/false);
    serial_csv = os.str();
  }
  {
    JobsGuard guard(4);
    std::ostringstream os;
    write_csv(run_experiment(cfg), os, /*include_runtime=*/false);
    parallel_csv = os.str();
  }
  CHECK(serial_csv == parallel_csv);
}

TEST_CASE("thread count does not change cross-information line searches") {
  const Generated gen = generate("B", 300, 808);
  const MixingMatrix prelim = fobi(gen.x);
  const ScoreFamily fam({make_gaussian(), make_gaussian(), make_gaussian()});

  CrossInfoEstimates a, b;
  {
    JobsGuard guard(1);
    a = estimate_cross_info(prelim, fam, gen.x, {20.0, 10.0});
  }
  {
    JobsGuard guard(3);
    b = estimate_cross_info(prelim, fam, gen.x, {20.0, 10.0});
  }
  CHECK((a.gamma_star - b.gamma_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.rho_star - b.rho_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.gamma_status == b.gamma_status);
  CHECK(b.rho_status == b.rho_status);
}
