#pragma once

#include <functional>

namespace perslab {

/// Adaptive Gauss-Kronrod (61-point) integral of f over [a, b].
/// Throws NonConvergenceError when the error estimate stays above
/// `abs_tol` at the maximum subdivision depth.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-12);

/// int_a^b (b - u)^beta g(u) du for beta > -1 and g smooth on [a, b],
/// by tanh-sinh quadrature, which is exponentially convergent for
/// algebraic endpoint singularities.
double integrate_power_weight(const std::function<double(double)>& g, double beta, double a, double b,
                              double abs_tol = 1e-12);

}  // namespace perslab
