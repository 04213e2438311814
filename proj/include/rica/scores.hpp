#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rica/errors.hpp"
#include "rica/rng.hpp"

namespace rica {

// Parameters of the skew-t density
//   h(x) = (2/sigma) t_nu(z) T_{nu+1}( alpha z ((nu+1)/(nu+z^2))^{1/2} ),
// z = (x-mu)/sigma.
struct SkewTParams {
  double mu = 0.0;
  double sigma = 1.0;
  double alpha = 0.0;
  double nu = 5.0;

  void validate() const;
};

inline constexpr double kSkewTAlphaBound = 15.0;  // |alpha| box used by the MLE
inline constexpr double kSkewTNuFloor = 3.0;      // lower bound on fitted nu

// Score-moment functionals of a component density.
struct ScoreMoments {
  double s2 = 0.0;          // second moment
  double info_loc = 0.0;    // integral of phi^2 f
  double info_scale = 0.0;  // integral of z^2 phi^2 f
  double mean = 0.0;        // first moment
  double kappa = 0.0;       // integral of z phi^2 f
};

// A univariate component: density, CDF, quantile, location score phi and the
// rank score J = phi o F^{-1}. Implementations are immutable after
// construction and safe to share across threads.
class ScoreComponent {
 public:
  virtual ~ScoreComponent() = default;

  virtual const std::string& name() const { return name_; }

  virtual double pdf(double x) const = 0;
  virtual double log_pdf(double x) const;
  virtual double cdf(double x) const = 0;
  virtual double quantile(double u) const = 0;  // DomainError outside (0,1)
  virtual double phi(double x) const = 0;       // -f'/f

  double rank_score(double u) const { return phi(quantile(u)); }

  // one draw; default is inverse-CDF sampling
  virtual double sample(RngStream& rng) const;

  // quadrature over the density; throws DivergentMoment when undefined
  virtual ScoreMoments moments() const;

  // M such that phi(z) + M atan(z) is nondecreasing; used by the monotone
  // decomposition of phi into two nondecreasing pieces.
  virtual double monotone_split_constant() const;

  // points where the density is not smooth (quadrature panels split here)
  virtual std::vector<double> quadrature_breakpoints() const { return {}; }

 protected:
  explicit ScoreComponent(std::string name) : name_(std::move(name)) {}
  std::string name_;
};

using ScorePtr = std::shared_ptr<const ScoreComponent>;

// Approximate-score grids at a fixed sample size: J(i/(n+1)), F^{-1}(i/(n+1))
// for i = 1..n, plus their means.
struct ScoreTable {
  int n = 0;
  int k = 0;
  std::vector<Eigen::VectorXd> J;  // per component, index i-1 holds rank i
  std::vector<Eigen::VectorXd> Q;
  Eigen::VectorXd Jbar;
  Eigen::VectorXd Qbar;
};

// Bundle of k component score families. Immutable after construction; the
// per-n score tables are built lazily and cached.
class ScoreFamily {
 public:
  explicit ScoreFamily(std::vector<ScorePtr> components);

  int dim() const { return static_cast<int>(comps_.size()); }
  const ScoreComponent& component(int j) const { return *comps_.at(j); }
  ScorePtr component_ptr(int j) const { return comps_.at(j); }

  const ScoreTable& table(int n) const;

 private:
  std::vector<ScorePtr> comps_;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<ScoreTable>> cache_;
};

// Factories -----------------------------------------------------------------

ScorePtr make_gaussian(double mu = 0.0, double sigma = 1.0);
ScorePtr make_student_t(double nu);
ScorePtr make_laplace(double sigma = 1.0);
// standardize recenters the density so its median is zero
ScorePtr make_skew_laplace(double eta, double sigma = 1.0, bool standardize = true);
ScorePtr make_skew_t(const SkewTParams& p, bool standardize = false);
// fixed asymmetric bimodal mixture of two t_3 laws, median-zero / unit-MAD
ScorePtr make_mix_t3();
// sampling-only stable law (tail index gamma, skewness beta); density and
// scores are not provided
ScorePtr make_stable(double beta, double gamma);

// Density evaluations used directly by tests and fitting ---------------------

double skew_t_pdf(double x, const SkewTParams& p);
double skew_t_log_pdf(double x, const SkewTParams& p);
double skew_laplace_pdf(double x, double mu, double sigma, double eta);

// Maximum likelihood ---------------------------------------------------------

struct SkewTFitReport {
  SkewTParams init;
  double loglik_init = 0.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Componentwise skew-t MLE with alpha in [-15,15] and nu in [3, inf).
// Throws DegenerateSample for degenerate input and NonConvergence when the
// simplex search exhausts its iteration budget. An optional warm start
// competes with the moment-based initializer for the simplex seed.
SkewTParams fit_skew_t_mle(const Eigen::VectorXd& sample, SkewTFitReport* report = nullptr,
                           const SkewTParams* warm_start = nullptr);

// The k^2 x k^2 information kernel assembled from per-component score
// moments; sandwiched by algebra::information_sandwich to give the
// information matrix at a mixing matrix L.
Eigen::MatrixXd g_f_matrix(const std::vector<ScoreMoments>& moments);

// Cross-information oracle ----------------------------------------------------

struct CrossInfoPair {
  double gamma_star = 0.0;
  double rho_star = 0.0;
};

// Analytic (quadrature) cross-information quantities between reference
// scores f and actual density g, for the component pair (p, q); 0-based.
CrossInfoPair cross_info_oracle(const ScoreFamily& f, const ScoreFamily& g, int p, int q);

// Text interface ---------------------------------------------------------------

// Parses one component spec, e.g. "skewt(mu=0,sigma=1,alpha=4,nu=5)",
// "slaplace(eta=2)", "stable(beta=1,gamma=1.5)", "mixt3", "gauss", "t(nu=5)",
// "laplace". Asymmetric generator families come back median-zero.
ScorePtr parse_component(const std::string& spec);

// Comma-separated list of component specs (top-level commas only).
ScoreFamily parse_family(const std::string& spec);

}  // namespace rica
