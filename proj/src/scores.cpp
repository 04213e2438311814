#include "rica/scores.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rica/parallel.hpp"
#include "quadrature.hpp"

namespace rica {

namespace {

using boost::math::normal_distribution;
using boost::math::students_t_distribution;
using std::numbers::pi;

void check_unit_interval(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    std::ostringstream os;
    os << "quantile argument " << u << " outside (0,1)";
    throw DomainError(os.str());
  }
}

double log_student_norm(double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * pi);
}

double log_student_pdf(double z, double nu, double lognorm) {
  return lognorm - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

// log T_nu(w) with a tail approximation when the CDF underflows
double log_student_cdf(const students_t_distribution<double>& dist, double w) {
  const double c = boost::math::cdf(dist, w);
  if (c > 1e-280) return std::log(c);
  const double nu = dist.degrees_of_freedom();
  const double x = -w;  // only the far left tail underflows
  return log_student_pdf(x, nu, log_student_norm(nu)) + std::log((x * x + nu) / (x * nu));
}

}  // namespace

// SkewTParams ----------------------------------------------------------------

void SkewTParams::validate() const {
  if (!(sigma > 0.0) || !(nu > 0.0) || !std::isfinite(mu) || !std::isfinite(alpha)) {
    throw InvalidParams("skew-t parameters: need sigma > 0 and nu > 0");
  }
}

namespace {

// per-parameter cached evaluator; the MLE objective calls this n times per
// candidate, so the normalization constants are computed once
class SkewTLogDensity {
 public:
  explicit SkewTLogDensity(const SkewTParams& p)
      : mu_(p.mu),
        inv_sigma_(1.0 / p.sigma),
        alpha_(p.alpha),
        nu_(p.nu),
        skew_(p.nu + 1.0),
        lognorm_(log_student_norm(p.nu)),
        prefix_(std::log(2.0 / p.sigma)),
        root_nu1_(std::sqrt(p.nu + 1.0)) {}

  double operator()(double x) const {
    const double z = (x - mu_) * inv_sigma_;
    const double w = alpha_ * z * root_nu1_ / std::sqrt(nu_ + z * z);
    return prefix_ + lognorm_ - 0.5 * (nu_ + 1.0) * std::log1p(z * z / nu_) +
           log_student_cdf(skew_, w);
  }

 private:
  double mu_, inv_sigma_, alpha_, nu_;
  students_t_distribution<double> skew_;
  double lognorm_, prefix_, root_nu1_;
};

}  // namespace

double skew_t_log_pdf(double x, const SkewTParams& p) {
  p.validate();
  return SkewTLogDensity(p)(x);
}

double skew_t_pdf(double x, const SkewTParams& p) { return std::exp(skew_t_log_pdf(x, p)); }

double skew_laplace_pdf(double x, double mu, double sigma, double eta) {
  if (!(sigma > 0.0) || !(eta > 0.0)) throw InvalidParams("skew-Laplace: sigma, eta > 0");
  const double c = std::sqrt(2.0) / sigma * eta / (1.0 + eta * eta);
  const double d = x - mu;
  return d <= 0.0 ? c * std::exp(std::sqrt(2.0) * d / (sigma * eta))
                  : c * std::exp(-std::sqrt(2.0) * eta * d / sigma);
}

// ScoreComponent defaults ------------------------------------------------------

double ScoreComponent::log_pdf(double x) const { return std::log(pdf(x)); }

double ScoreComponent::sample(RngStream& rng) const { return quantile(rng.uniform()); }

ScoreMoments ScoreComponent::moments() const {
  const auto breaks = quadrature_breakpoints();
  ScoreMoments m;
  m.s2 = quad::over_real([this](double z) { return z * z * pdf(z); }, breaks);
  m.mean = quad::over_real([this](double z) { return z * pdf(z); }, breaks);
  m.info_loc = quad::over_real([this](double z) { double p = phi(z); return p * p * pdf(z); }, breaks);
  m.info_scale =
      quad::over_real([this](double z) { double p = z * phi(z); return p * p * pdf(z); }, breaks);
  m.kappa =
      quad::over_real([this](double z) { double p = phi(z); return z * p * p * pdf(z); }, breaks);
  if (!std::isfinite(m.s2) || !std::isfinite(m.info_loc) || !std::isfinite(m.info_scale) ||
      !std::isfinite(m.mean) || !std::isfinite(m.kappa)) {
    throw DivergentMoment(name_ + ": non-finite score moment");
  }
  return m;
}

double ScoreComponent::monotone_split_constant() const {
  // numeric bound on the negative part of phi'(z)(1+z^2)
  const double zl = quantile(1e-6), zh = quantile(1.0 - 1e-6);
  double worst = 0.0;
  const int grid = 2001;
  for (int i = 0; i < grid; ++i) {
    const double z = zl + (zh - zl) * i / (grid - 1.0);
    const double h = 1e-5 * (1.0 + std::abs(z));
    const double d = (phi(z + h) - phi(z - h)) / (2.0 * h);
    worst = std::max(worst, -d * (1.0 + z * z));
  }
  return 1.6 * worst;
}

// Gaussian ---------------------------------------------------------------------

namespace {

class GaussianScore final : public ScoreComponent {
 public:
  GaussianScore(double mu, double sigma)
      : ScoreComponent(sigma == 1.0 && mu == 0.0 ? "gauss" : "gauss(fitted)"),
        mu_(mu), sigma_(sigma), dist_(mu, sigma) {
    if (!(sigma > 0.0)) throw InvalidParams("gaussian: sigma > 0");
  }
  double pdf(double x) const override { return boost::math::pdf(dist_, x); }
  double cdf(double x) const override { return boost::math::cdf(dist_, x); }
  double quantile(double u) const override {
    check_unit_interval(u);
    return boost::math::quantile(dist_, u);
  }
  double phi(double x) const override { return (x - mu_) / (sigma_ * sigma_); }
  double monotone_split_constant() const override { return 0.0; }

 private:
  double mu_, sigma_;
  normal_distribution<double> dist_;
};

// Student-t ---------------------------------------------------------------------

class StudentTScore final : public ScoreComponent {
 public:
  explicit StudentTScore(double nu) : ScoreComponent(make_name(nu)), nu_(nu), dist_(nu) {}
  double pdf(double x) const override { return boost::math::pdf(dist_, x); }
  double cdf(double x) const override { return boost::math::cdf(dist_, x); }
  double quantile(double u) const override {
    check_unit_interval(u);
    return boost::math::quantile(dist_, u);
  }
  double phi(double x) const override { return (nu_ + 1.0) * x / (nu_ + x * x); }
  ScoreMoments moments() const override {
    if (nu_ <= 2.0) throw DivergentMoment(name_ + ": infinite second moment for nu <= 2");
    return ScoreComponent::moments();
  }

 private:
  static std::string make_name(double nu) {
    std::ostringstream os;
    os << "t(nu=" << nu << ")";
    return os.str();
  }
  double nu_;
  students_t_distribution<double> dist_;
};

// skew Laplace (Laplace when eta == 1) -------------------------------------------

class SkewLaplaceScore final : public ScoreComponent {
 public:
  SkewLaplaceScore(double eta, double sigma, bool standardize, std::string name)
      : ScoreComponent(std::move(name)), eta_(eta), sigma_(sigma) {
    if (!(eta > 0.0) || !(sigma > 0.0)) throw InvalidParams("skew-Laplace: eta, sigma > 0");
    if (standardize) shift_ = raw_quantile(0.5);
  }

  double pdf(double x) const override { return skew_laplace_pdf(x + shift_, 0.0, sigma_, eta_); }
  double cdf(double x) const override { return raw_cdf(x + shift_); }
  double quantile(double u) const override {
    check_unit_interval(u);
    return raw_quantile(u) - shift_;
  }
  double phi(double x) const override {
    const double z = x + shift_;
    const double s2 = std::sqrt(2.0);
    if (z < 0.0) return -s2 / (sigma_ * eta_);
    if (z > 0.0) return s2 * eta_ / sigma_;
    return 0.5 * s2 / sigma_ * (eta_ - 1.0 / eta_);  // kink convention: midpoint
  }
  double monotone_split_constant() const override { return 0.0; }  // phi is a step up
  std::vector<double> quadrature_breakpoints() const override { return {-shift_}; }
  double shift() const { return shift_; }

 private:
  double raw_cdf(double z) const {
    const double e2 = eta_ * eta_;
    if (z <= 0.0) return e2 / (1.0 + e2) * std::exp(std::sqrt(2.0) * z / (sigma_ * eta_));
    return 1.0 - 1.0 / (1.0 + e2) * std::exp(-std::sqrt(2.0) * eta_ * z / sigma_);
  }
  double raw_quantile(double u) const {
    const double e2 = eta_ * eta_;
    if (u <= e2 / (1.0 + e2)) return sigma_ * eta_ / std::sqrt(2.0) * std::log(u * (1.0 + e2) / e2);
    return -sigma_ / (std::sqrt(2.0) * eta_) * std::log((1.0 - u) * (1.0 + e2));
  }
  double eta_, sigma_;
  double shift_ = 0.0;
};

// skew-t --------------------------------------------------------------------------

// CDF and quantile work on the probability scale of the underlying t_nu:
// with v = T_nu(z), the CDF is the cumulative of psi(v) = 2 T_{nu+1}(w(z(v))),
// a bounded smooth integrand, accumulated once on a fixed grid. This keeps
// tail behaviour exact without infinite-domain quadrature.
class SkewTScore final : public ScoreComponent {
 public:
  SkewTScore(const SkewTParams& p, bool standardize, std::string name)
      : ScoreComponent(std::move(name)), p_(p), base_(p.nu), skew_(p.nu + 1.0) {
    p_.validate();
    build_table();
    if (standardize) shift_ = raw_quantile(0.5);
  }

  double pdf(double x) const override { return skew_t_pdf(x + shift_, p_); }
  double log_pdf(double x) const override { return skew_t_log_pdf(x + shift_, p_); }
  double cdf(double x) const override { return raw_cdf(x + shift_); }
  double quantile(double u) const override {
    check_unit_interval(u);
    return raw_quantile(u) - shift_;
  }
  double phi(double x) const override {
    const double z = (x + shift_ - p_.mu) / p_.sigma;
    const double nu = p_.nu;
    const double w = p_.alpha * z * std::sqrt((nu + 1.0) / (nu + z * z));
    const double tpdf = boost::math::pdf(skew_, w);
    const double tcdf = boost::math::cdf(skew_, w);
    double ratio;
    if (tcdf > 1e-280) {
      ratio = tpdf / tcdf;
    } else {  // far left tail: t/T ~ |w| m/(w^2+m)
      const double m = nu + 1.0;
      ratio = std::abs(w) * m / (w * w + m);
    }
    const double dw = p_.alpha * std::sqrt(nu + 1.0) * nu / std::pow(nu + z * z, 1.5);
    return ((nu + 1.0) * z / (nu + z * z) - ratio * dw) / p_.sigma;
  }
  double shift() const { return shift_; }
  const SkewTParams& params() const { return p_; }

 private:
  static constexpr int kPanels = 4096;

  double w_of_z(double z) const {
    return p_.alpha * z * std::sqrt((p_.nu + 1.0) / (p_.nu + z * z));
  }

  // d/dv of the CDF on the t_nu probability scale, in [0,2]
  double psi(double v) const {
    double w;
    if (v <= 0.0) {
      w = -p_.alpha * std::sqrt(p_.nu + 1.0);
    } else if (v >= 1.0) {
      w = p_.alpha * std::sqrt(p_.nu + 1.0);
    } else {
      w = w_of_z(boost::math::quantile(base_, v));
    }
    return 2.0 * boost::math::cdf(skew_, w);
  }

  void build_table() {
    node_.resize(kPanels + 1);
    cum_.resize(kPanels + 1);
    const double h = 1.0 / kPanels;
    for (int i = 0; i <= kPanels; ++i) node_[i] = psi(i * h);
    cum_[0] = 0.0;
    for (int i = 0; i < kPanels; ++i) {
      const double mid = psi((i + 0.5) * h);
      cum_[i + 1] = cum_[i] + h / 6.0 * (node_[i] + 4.0 * mid + node_[i + 1]);
    }
  }

  // cumulative of psi from 0 to v
  double cum_at(double v) const {
    if (v <= 0.0) return 0.0;
    if (v >= 1.0) return cum_[kPanels];
    const double h = 1.0 / kPanels;
    int cell = std::min(static_cast<int>(v * kPanels), kPanels - 1);
    const double a = cell * h;
    const double d = v - a;
    if (d <= 0.0) return cum_[cell];
    const double mid = psi(a + 0.5 * d);
    return cum_[cell] + d / 6.0 * (node_[cell] + 4.0 * mid + psi(v));
  }

  double raw_cdf(double x) const {
    const double z = (x - p_.mu) / p_.sigma;
    return cum_at(boost::math::cdf(base_, z));
  }

  double raw_quantile(double u) const {
    // bracket on the v scale from the cumulative table, then safeguarded Newton
    int lo = 0, hi = kPanels;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      (cum_[mid] <= u ? lo : hi) = mid;
    }
    const double h = 1.0 / kPanels;
    double a = lo * h, b = (lo + 1) * h;
    double fa = cum_[lo] - u, fb = cum_[lo + 1] - u;
    double v = a + (b - a) * (fa != fb ? -fa / (fb - fa) : 0.5);
    for (int it = 0; it < 60; ++it) {
      const double f = cum_at(v) - u;
      if (std::abs(f) < 1e-13) break;
      (f < 0.0 ? a : b) = v;
      (f < 0.0 ? fa : fb) = f;
      const double slope = psi(v);
      double next = slope > 0.0 ? v - f / slope : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - v) < 1e-16 && it > 4) { v = next; break; }
      v = next;
    }
    // keep the t-quantile argument strictly inside (0,1)
    v = std::clamp(v, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
    return p_.mu + p_.sigma * boost::math::quantile(base_, v);
  }

  SkewTParams p_;
  students_t_distribution<double> base_, skew_;
  std::vector<double> node_, cum_;
  double shift_ = 0.0;
};

// asymmetric bimodal t3 mixture ---------------------------------------------------

struct MixT3Config {
  double centers[2] = {-2.0, 2.0};
  double scales[2] = {1.0, 0.5};
  double weights[2] = {0.5, 0.5};
};

class MixT3Score final : public ScoreComponent {
 public:
  MixT3Score() : ScoreComponent("mixt3"), t3_(3.0) {
    shift_ = raw_quantile(0.5);
    // unit MAD: solve F(m+q) - F(m-q) = 1/2
    double lo = 1e-9, hi = 64.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (raw_cdf(shift_ + mid) - raw_cdf(shift_ - mid) < 0.5 ? lo : hi) = mid;
    }
    scale_ = 0.5 * (lo + hi);
  }

  double pdf(double x) const override { return scale_ * raw_pdf(shift_ + scale_ * x); }
  double cdf(double x) const override { return raw_cdf(shift_ + scale_ * x); }
  double quantile(double u) const override {
    check_unit_interval(u);
    return (raw_quantile(u) - shift_) / scale_;
  }
  double phi(double x) const override {
    const double y = shift_ + scale_ * x;
    return -scale_ * raw_dpdf(y) / raw_pdf(y);
  }
  double sample(RngStream& rng) const override {
    const int j = rng.uniform() < cfg_.weights[0] ? 0 : 1;
    const double z = boost::math::quantile(t3_, rng.uniform());
    return (cfg_.centers[j] + cfg_.scales[j] * z - shift_) / scale_;
  }
  // modes of the standardized density, for diagnostics and tests
  std::pair<double, double> standardized_centers() const {
    return {(cfg_.centers[0] - shift_) / scale_, (cfg_.centers[1] - shift_) / scale_};
  }

 private:
  double raw_pdf(double x) const {
    double f = 0.0;
    for (int j = 0; j < 2; ++j)
      f += cfg_.weights[j] * boost::math::pdf(t3_, (x - cfg_.centers[j]) / cfg_.scales[j]) /
           cfg_.scales[j];
    return f;
  }
  double raw_dpdf(double x) const {
    double d = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double z = (x - cfg_.centers[j]) / cfg_.scales[j];
      const double tz = boost::math::pdf(t3_, z);
      d += cfg_.weights[j] * tz * (-4.0 * z / (3.0 + z * z)) / (cfg_.scales[j] * cfg_.scales[j]);
    }
    return d;
  }
  double raw_cdf(double x) const {
    double f = 0.0;
    for (int j = 0; j < 2; ++j)
      f += cfg_.weights[j] * boost::math::cdf(t3_, (x - cfg_.centers[j]) / cfg_.scales[j]);
    return f;
  }
  double raw_quantile(double u) const {
    const double q = boost::math::quantile(t3_, u);
    double lo = std::min(cfg_.centers[0] + cfg_.scales[0] * q, cfg_.centers[1] + cfg_.scales[1] * q);
    double hi = std::max(cfg_.centers[0] + cfg_.scales[0] * q, cfg_.centers[1] + cfg_.scales[1] * q);
    if (hi - lo < 1e-12) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (raw_cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  MixT3Config cfg_;
  students_t_distribution<double> t3_;
  double shift_ = 0.0, scale_ = 1.0;
};

// stable (sampling only) ------------------------------------------------------------

class StableSampler final : public ScoreComponent {
 public:
  StableSampler(double beta, double gamma)
      : ScoreComponent(make_name(beta, gamma)), beta_(beta), gamma_(gamma) {
    if (!(gamma > 0.0 && gamma <= 2.0) || std::abs(beta) > 1.0) {
      throw InvalidParams("stable: need tail index in (0,2] and |beta| <= 1");
    }
    if (beta_ != 0.0 && gamma_ != 2.0) {
      if (gamma_ == 1.0) throw Unsupported("stable: median shift not implemented for gamma == 1");
      shift_ = median_from_transform();
    }
  }

  double pdf(double) const override { throw Unsupported("stable: density not implemented"); }
  double cdf(double) const override { throw Unsupported("stable: CDF not implemented"); }
  double quantile(double) const override { throw Unsupported("stable: quantile not implemented"); }
  double phi(double) const override { throw Unsupported("stable: scores not implemented"); }
  ScoreMoments moments() const override {
    if (gamma_ < 2.0) throw DivergentMoment("stable: infinite variance for tail index < 2");
    throw Unsupported("stable: score moments not implemented");
  }
  double monotone_split_constant() const override {
    throw Unsupported("stable: scores not implemented");
  }

  double sample(RngStream& rng) const override {
    const double v = pi * (rng.uniform() - 0.5);
    const double w = -std::log(rng.uniform());
    return cms_transform(v, w) - shift_;
  }

 private:
  static std::string make_name(double beta, double gamma) {
    std::ostringstream os;
    os << "stable(beta=" << beta << ",gamma=" << gamma << ")";
    return os.str();
  }

  double cms_transform(double v, double w) const {
    const double a = gamma_, b = beta_;
    if (a == 1.0) {
      const double h = 0.5 * pi + b * v;
      return 2.0 / pi * (h * std::tan(v) - b * std::log(0.5 * pi * w * std::cos(v) / h));
    }
    const double ta = std::tan(0.5 * pi * a);
    const double B = std::atan(b * ta) / a;
    const double S = std::pow(1.0 + b * b * ta * ta, 0.5 / a);
    return S * std::sin(a * (v + B)) / std::pow(std::cos(v), 1.0 / a) *
           std::pow(std::cos(v - a * (v + B)) / w, (1.0 - a) / a);
  }

  // factor of the transform that does not involve the exponential variate
  double angular_factor(double v) const {
    const double a = gamma_, b = beta_;
    const double ta = std::tan(0.5 * pi * a);
    const double B = std::atan(b * ta) / a;
    const double S = std::pow(1.0 + b * b * ta * ta, 0.5 / a);
    const double C = std::cos(v - a * (v + B));
    return S * std::sin(a * (v + B)) / std::pow(std::cos(v), 1.0 / a) *
           std::pow(std::abs(C), (1.0 - a) / a);
  }

  // P(X <= m), obtained by integrating the exponential variate out of the
  // sampling transform; used only to recentre the law at median zero.
  double cdf_from_transform(double m) const {
    const double a = gamma_;
    const double p = a > 1.0 ? a / (a - 1.0) : -a / (1.0 - a);
    auto conditional = [&](double v) -> double {
      const double g = angular_factor(v);
      if (!std::isfinite(g) || g == 0.0) return m >= 0.0 ? 1.0 : 0.0;
      if (g > 0.0) {
        if (m <= 0.0) return 0.0;
        const double t = std::pow(m / g, p);
        return a > 1.0 ? 1.0 - std::exp(-t) : std::exp(-t);
      }
      if (m >= 0.0) return 1.0;
      const double t = std::pow(-m / -g, p);
      return a > 1.0 ? std::exp(-t) : 1.0 - std::exp(-t);
    };
    namespace bq = boost::math::quadrature;
    double err = 0.0;
    const double integral = bq::gauss_kronrod<double, 31>::integrate(
        conditional, -0.5 * pi, 0.5 * pi, 12, 1e-10, &err);
    return integral / pi;
  }

  double median_from_transform() const {
    double lo = -64.0, hi = 64.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf_from_transform(mid) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double beta_, gamma_;
  double shift_ = 0.0;
};

}  // namespace

// factories -------------------------------------------------------------------------

ScorePtr make_gaussian(double mu, double sigma) {
  return std::make_shared<GaussianScore>(mu, sigma);
}

ScorePtr make_student_t(double nu) {
  if (!(nu > 0.0)) throw InvalidParams("student t: nu > 0");
  return std::make_shared<StudentTScore>(nu);
}

ScorePtr make_laplace(double sigma) {
  return std::make_shared<SkewLaplaceScore>(1.0, sigma, false, "laplace");
}

ScorePtr make_skew_laplace(double eta, double sigma, bool standardize) {
  std::ostringstream os;
  os << "slaplace(eta=" << eta << ")";
  return std::make_shared<SkewLaplaceScore>(eta, sigma, standardize, os.str());
}

ScorePtr make_skew_t(const SkewTParams& p, bool standardize) {
  std::ostringstream os;
  os << "skewt(mu=" << p.mu << ",sigma=" << p.sigma << ",alpha=" << p.alpha << ",nu=" << p.nu
     << ")";
  return std::make_shared<SkewTScore>(p, standardize, os.str());
}

ScorePtr make_mix_t3() { return std::make_shared<MixT3Score>(); }

ScorePtr make_stable(double beta, double gamma) {
  return std::make_shared<StableSampler>(beta, gamma);
}

// ScoreFamily --------------------------------------------------------------------------

ScoreFamily::ScoreFamily(std::vector<ScorePtr> components) : comps_(std::move(components)) {
  if (comps_.empty()) throw InvalidParams("ScoreFamily: need at least one component");
  for (const auto& c : comps_)
    if (!c) throw InvalidParams("ScoreFamily: null component");
}

const ScoreTable& ScoreFamily::table(int n) const {
  if (n < 1) throw InvalidParams("ScoreTable: n >= 1");
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(n);
  if (it != cache_.end()) return *it->second;

  auto tab = std::make_shared<ScoreTable>();
  tab->n = n;
  tab->k = dim();
  tab->J.resize(dim());
  tab->Q.resize(dim());
  tab->Jbar.resize(dim());
  tab->Qbar.resize(dim());
  for (int j = 0; j < dim(); ++j) {
    Eigen::VectorXd& jj = tab->J[j];
    Eigen::VectorXd& qq = tab->Q[j];
    jj.resize(n);
    qq.resize(n);
    const ScoreComponent& c = *comps_[j];
    for (int i = 1; i <= n; ++i) {
      const double q = c.quantile(i / (n + 1.0));
      qq(i - 1) = q;
      jj(i - 1) = c.phi(q);
    }
    tab->Jbar(j) = jj.mean();
    tab->Qbar(j) = qq.mean();
  }
  auto [pos, ok] = cache_.emplace(n, std::move(tab));
  (void)ok;
  return *pos->second;
}

// skew-t maximum likelihood --------------------------------------------------------------

namespace {

struct SimplexPoint {
  Eigen::Vector4d theta;
  double value = 0.0;
};

// theta = (mu, log sigma, alpha, log(nu - 3)); alpha is projected into its box
SkewTParams theta_to_params(Eigen::Vector4d t) {
  SkewTParams p;
  p.mu = t(0);
  p.sigma = std::exp(std::clamp(t(1), -30.0, 30.0));
  p.alpha = std::clamp(t(2), -kSkewTAlphaBound, kSkewTAlphaBound);
  p.nu = kSkewTNuFloor + std::exp(std::clamp(t(3), -12.0, 16.0));
  return p;
}

double neg_loglik(const Eigen::VectorXd& x, const Eigen::Vector4d& theta) {
  const SkewTLogDensity logpdf(theta_to_params(theta));
  const double nll = -par::block_sum(static_cast<std::size_t>(x.size()), [&](std::size_t i) {
    return logpdf(x(static_cast<Eigen::Index>(i)));
  });
  return std::isfinite(nll) ? nll : 1e100;
}

double sample_quantile_sorted(const std::vector<double>& s, double p) {
  const double h = (s.size() - 1) * p;
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + (h - i) * (s[i + 1] - s[i]);
}

}  // namespace

SkewTParams fit_skew_t_mle(const Eigen::VectorXd& sample, SkewTFitReport* report,
                           const SkewTParams* warm_start) {
  const Eigen::Index n = sample.size();
  if (n < 20) throw InvalidParams("fit_skew_t_mle: need at least 20 observations");
  if (!sample.allFinite()) throw InvalidParams("fit_skew_t_mle: non-finite observations");

  std::vector<double> sorted(sample.data(), sample.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double med = sample_quantile_sorted(sorted, 0.5);
  const double iqr = sample_quantile_sorted(sorted, 0.75) - sample_quantile_sorted(sorted, 0.25);
  if (!(iqr > 0.0)) throw DegenerateSample("fit_skew_t_mle: zero interquartile range");

  // moment-based initializer
  const double mean = sample.mean();
  const double var = (sample.array() - mean).square().mean();
  const double sd = std::sqrt(var);
  const double skew = ((sample.array() - mean) / sd).cube().mean();
  const double kurt = ((sample.array() - mean) / sd).pow(4).mean() - 3.0;
  SkewTParams init;
  init.mu = med;
  init.sigma = std::max(iqr / 1.349, 1e-8);
  init.alpha = std::abs(skew) < 0.05 ? 0.0 : std::clamp(3.0 * skew, -10.0, 10.0);
  init.nu = std::clamp(4.0 + 6.0 / std::max(kurt, 0.08), 3.2, 100.0);

  Eigen::Vector4d t0(init.mu, std::log(init.sigma), init.alpha, std::log(init.nu - kSkewTNuFloor));

  // Nelder-Mead with box projection handled inside the objective
  const double f0 = neg_loglik(sample, t0);
  if (warm_start != nullptr && warm_start->sigma > 0.0 && warm_start->nu > kSkewTNuFloor) {
    const Eigen::Vector4d tw(warm_start->mu, std::log(warm_start->sigma),
                             std::clamp(warm_start->alpha, -kSkewTAlphaBound, kSkewTAlphaBound),
                             std::log(warm_start->nu - kSkewTNuFloor));
    if (neg_loglik(sample, tw) < f0) t0 = tw;  // better seed; contract still vs. f0
  }
  std::vector<SimplexPoint> simplex(5);
  simplex[0] = {t0, f0};
  const Eigen::Vector4d steps(0.5 * init.sigma, 0.3, 1.0, 0.7);
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d t = t0;
    t(i) += steps(i);
    simplex[i + 1] = {t, neg_loglik(sample, t)};
  }

  const int max_iter = 500;
  int iter = 0;
  bool converged = false;
  auto by_value = [](const SimplexPoint& a, const SimplexPoint& b) { return a.value < b.value; };
  for (; iter < max_iter; ++iter) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    if (std::abs(simplex[4].value - simplex[0].value) <
        1e-9 * (1.0 + std::abs(simplex[0].value))) {
      converged = true;
      break;
    }
    Eigen::Vector4d centroid = Eigen::Vector4d::Zero();
    for (int i = 0; i < 4; ++i) centroid += simplex[i].theta;
    centroid /= 4.0;

    const Eigen::Vector4d xr = centroid + (centroid - simplex[4].theta);
    const double fr = neg_loglik(sample, xr);
    if (fr < simplex[0].value) {
      const Eigen::Vector4d xe = centroid + 2.0 * (centroid - simplex[4].theta);
      const double fe = neg_loglik(sample, xe);
      simplex[4] = fe < fr ? SimplexPoint{xe, fe} : SimplexPoint{xr, fr};
    } else if (fr < simplex[3].value) {
      simplex[4] = {xr, fr};
    } else {
      const Eigen::Vector4d xc = centroid + 0.5 * (simplex[4].theta - centroid);
      const double fc = neg_loglik(sample, xc);
      if (fc < simplex[4].value) {
        simplex[4] = {xc, fc};
      } else {
        for (int i = 1; i < 5; ++i) {
          simplex[i].theta = simplex[0].theta + 0.5 * (simplex[i].theta - simplex[0].theta);
          simplex[i].value = neg_loglik(sample, simplex[i].theta);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(), by_value);

  if (report) {
    report->init = init;
    report->loglik_init = -f0;
    report->loglik = -simplex[0].value;
    report->iterations = iter;
    report->converged = converged;
  }
  if (!converged) throw NonConvergence("fit_skew_t_mle: simplex iteration budget exhausted");
  return theta_to_params(simplex[0].theta);
}

// information kernel -----------------------------------------------------------------------

Eigen::MatrixXd g_f_matrix(const std::vector<ScoreMoments>& moments) {
  const int k = static_cast<int>(moments.size());
  if (k < 1) throw InvalidParams("g_f_matrix: empty moment list");
  for (const auto& m : moments) {
    if (!std::isfinite(m.s2) || !std::isfinite(m.info_loc) || !std::isfinite(m.info_scale) ||
        !std::isfinite(m.mean) || !std::isfinite(m.kappa)) {
      throw DivergentMoment("g_f_matrix: non-finite score moments");
    }
  }
  auto vec_pos = [k](int row, int col) { return col * k + row; };
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k * k, k * k);
  for (int j = 0; j < k; ++j) {
    g(vec_pos(j, j), vec_pos(j, j)) += moments[static_cast<std::size_t>(j)].info_scale - 1.0;
  }
  for (int p = 0; p < k; ++p) {
    for (int q = 0; q < k; ++q) {
      if (p == q) continue;
      const auto& mp = moments[static_cast<std::size_t>(p)];
      const auto& mq = moments[static_cast<std::size_t>(q)];
      // gamma_{qp} (e_p e_p' (x) e_q e_q') + (e_p e_q' (x) e_q e_p')
      g(vec_pos(q, p), vec_pos(q, p)) += mq.info_loc * mp.s2;
      g(vec_pos(q, p), vec_pos(p, q)) += 1.0;
      // e_p e_q' (x) (varsigma_{pq} e_q e_q' + varsigma_{qp} e_p e_p')
      g(vec_pos(q, p), vec_pos(q, q)) += mp.mean * mq.kappa;
      g(vec_pos(p, p), vec_pos(p, q)) += mq.mean * mp.kappa;
      // varrho_{jpq} (e_p e_q' (x) e_j e_j') over j distinct from p and q
      for (int j = 0; j < k; ++j) {
        if (j == p || j == q) continue;
        const auto& mj = moments[static_cast<std::size_t>(j)];
        g(vec_pos(j, p), vec_pos(j, q)) += mj.info_loc * mp.mean * mq.mean;
      }
    }
  }
  return g;
}

// cross-information oracle -----------------------------------------------------------------

CrossInfoPair cross_info_oracle(const ScoreFamily& f, const ScoreFamily& g, int p, int q) {
  if (p == q) throw InvalidParams("cross_info_oracle: need p != q");
  if (f.dim() != g.dim() || p < 0 || q < 0 || p >= f.dim() || q >= f.dim()) {
    throw DimensionMismatch("cross_info_oracle: bad component indices");
  }
  const ScoreComponent& fp = f.component(p);
  const ScoreComponent& gp = g.component(p);
  const ScoreComponent& fq = f.component(q);
  const ScoreComponent& gq = g.component(q);

  // quadrature panels split where any involved score has a kink
  auto kink_images = [](std::initializer_list<const ScoreComponent*> comps) {
    std::vector<double> u;
    for (const ScoreComponent* c : comps)
      for (double b : c->quadrature_breakpoints()) u.push_back(c->cdf(b));
    return u;
  };
  const auto breaks_p = kink_images({&fp, &gp});
  const auto breaks_q = kink_images({&fq, &gq});

  const double loc_product = quad::over_unit(
      [&](double u) { return fp.rank_score(u) * gp.rank_score(u); }, breaks_p);
  const double quant_product =
      quad::over_unit([&](double u) { return fq.quantile(u) * gq.quantile(u); }, breaks_q);
  const double mean_f = quad::over_unit([&](double u) { return fq.quantile(u); }, breaks_q);
  const double mean_g = quad::over_unit([&](double u) { return gq.quantile(u); }, breaks_q);

  CrossInfoPair out;
  out.gamma_star = loc_product * (quant_product - mean_f * mean_g);
  out.rho_star =
      quad::over_unit([&](double u) { return fp.quantile(u) * fp.phi(gp.quantile(u)); },
                      breaks_p) *
      quad::over_unit([&](double u) { return fq.rank_score(u) * gq.quantile(u); }, breaks_q);
  if (!std::isfinite(out.gamma_star) || !std::isfinite(out.rho_star)) {
    throw QuadratureFailure("cross_info_oracle: non-finite result");
  }
  return out;
}

// text interface ------------------------------------------------------------------------------

namespace {

std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::map<std::string, double> parse_args(const std::string& body, const std::string& what) {
  std::map<std::string, double> args;
  if (strip(body).empty()) return args;
  for (const auto& piece : split_top_level(body)) {
    const auto eq = piece.find('=');
    if (eq == std::string::npos) throw ParseError(what + ": expected key=value, got '" + piece + "'");
    const std::string key = strip(piece.substr(0, eq));
    try {
      args[key] = std::stod(strip(piece.substr(eq + 1)));
    } catch (const std::exception&) {
      throw ParseError(what + ": bad numeric value in '" + piece + "'");
    }
  }
  return args;
}

double arg_or(const std::map<std::string, double>& args, const std::string& key, double dflt) {
  auto it = args.find(key);
  return it == args.end() ? dflt : it->second;
}

double required_arg(const std::map<std::string, double>& args, const std::string& key,
                    const std::string& what) {
  auto it = args.find(key);
  if (it == args.end()) throw ParseError(what + ": missing argument '" + key + "'");
  return it->second;
}

}  // namespace

ScorePtr parse_component(const std::string& spec) {
  const std::string s = strip(spec);
  std::string head = s, body;
  const auto open = s.find('(');
  if (open != std::string::npos) {
    if (s.back() != ')') throw ParseError("unbalanced parentheses in '" + s + "'");
    head = strip(s.substr(0, open));
    body = s.substr(open + 1, s.size() - open - 2);
  }
  const auto args = parse_args(body, head);

  if (head == "gauss" || head == "normal") return make_gaussian();
  if (head == "laplace") return make_laplace(arg_or(args, "sigma", 1.0));
  if (head == "t") return make_student_t(required_arg(args, "nu", head));
  if (head == "cauchy") return make_student_t(1.0);
  if (head == "slaplace") {
    return make_skew_laplace(required_arg(args, "eta", head), arg_or(args, "sigma", 1.0), true);
  }
  if (head == "skewt") {
    SkewTParams p;
    p.mu = arg_or(args, "mu", 0.0);
    p.sigma = arg_or(args, "sigma", 1.0);
    p.alpha = arg_or(args, "alpha", 0.0);
    p.nu = required_arg(args, "nu", head);
    return make_skew_t(p, /*standardize=*/true);
  }
  if (head == "mixt3") return make_mix_t3();
  if (head == "stable") {
    return make_stable(required_arg(args, "beta", head), required_arg(args, "gamma", head));
  }
  throw ParseError("unknown score family '" + head + "'");
}

ScoreFamily parse_family(const std::string& spec) {
  std::vector<ScorePtr> comps;
  for (const auto& piece : split_top_level(spec)) comps.push_back(parse_component(piece));
  return ScoreFamily(std::move(comps));
}

}  // namespace rica
