#include "perslab/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "perslab/errors.hpp"

namespace perslab {

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 15, 1e-13, &error);
  if (!std::isfinite(value) || error > abs_tol) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "]: error estimate " << error << " above tolerance " << abs_tol;
    throw NonConvergenceError(msg.str());
  }
  return value;
}

double integrate_power_weight(const std::function<double(double)>& g, double beta, double a, double b,
                              double abs_tol) {
  if (!(beta > -1.0)) throw DomainError("integrate_power_weight: beta must exceed -1");
  if (!(b >= a)) throw DomainError("integrate_power_weight: need a <= b");
  if (a == b) return 0.0;
  // Tanh-sinh clusters nodes doubly exponentially at both ends, and the
  // second argument gives b - u without cancellation next to b.
  // Non-const: the two-argument overload is not const-qualified in Boost 1.74.
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  const auto f = [&](double u, double uc) {
    const double gap = uc >= 0.0 ? uc : b - u;
    return std::pow(gap, beta) * g(u);
  };
  double error = 0.0;
  double l1 = 0.0;
  const double value = rule.integrate(f, a, b, 1e-15, &error, &l1);
  if (!std::isfinite(value) || error > std::max(abs_tol, 1e-14 * l1)) {
    std::ostringstream msg;
    msg << "weighted quadrature on [" << a << ", " << b << "]: error estimate " << error << " above tolerance "
        << abs_tol;
    throw NonConvergenceError(msg.str());
  }
  return value;
}

}  // namespace perslab
