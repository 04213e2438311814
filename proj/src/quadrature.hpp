#pragma once

// Internal quadrature helpers shared by the score families.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rica/errors.hpp"

namespace rica::quad {

// Adaptive integral of f over the real line, split at the given breakpoints.
inline double over_real(const std::function<double(double)>& f,
                        std::vector<double> breaks = {}, double tol = 1e-10) {
  namespace bq = boost::math::quadrature;
  std::sort(breaks.begin(), breaks.end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> segs;
  double lo = -inf;
  for (double b : breaks) {
    segs.emplace_back(lo, b);
    lo = b;
  }
  segs.emplace_back(lo, inf);

  double total = 0.0;
  for (auto [a, b] : segs) {
    double err = 0.0;
    const double v = bq::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol, &err);
    if (!std::isfinite(v)) throw QuadratureFailure("non-finite integral");
    total += v;
  }
  return total;
}

// Integral over (0,1), split at interior break points (images of density
// kinks); tolerant of integrable endpoint singularities.
inline double over_unit(const std::function<double(double)>& f, std::vector<double> breaks = {},
                        double tol = 1e-9) {
  namespace bq = boost::math::quadrature;
  bq::tanh_sinh<double> integrator;
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> edges{0.0};
  for (double b : breaks) {
    if (b > edges.back() + 1e-14 && b < 1.0 - 1e-14) edges.push_back(b);
  }
  edges.push_back(1.0);

  double total = 0.0, err_total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    double err = 0.0, l1 = 0.0;
    total += integrator.integrate(f, edges[i], edges[i + 1], tol, &err, &l1);
    err_total += err;
  }
  if (!std::isfinite(total)) throw QuadratureFailure("non-finite unit-interval integral");
  if (err_total > 1e-5 * (1.0 + std::abs(total))) {
    throw QuadratureFailure("unit-interval quadrature did not converge");
  }
  return total;
}

}  // namespace rica::quad
