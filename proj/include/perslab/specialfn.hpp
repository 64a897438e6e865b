#pragma once

// Real-argument special functions needed by the correlation evaluators:
// log-gamma, signed gamma / reciprocal gamma, digamma and the Gauss
// hypergeometric function 2F1 on the closed unit interval.

namespace perslab {

/// ln Gamma(x) for x > 0. Relative error below 1e-13 on [0.01, 200].
double log_gamma(double x);

/// 1 / Gamma(x) for every real x; zero at the poles x = 0, -1, -2, ...
double reciprocal_gamma(double x);

/// Gamma(x) for real x that is not a nonpositive integer.
double gamma_fn(double x);

/// psi(x) = d/dx ln Gamma(x) for x not a nonpositive integer.
double digamma(double x);

/// Gauss hypergeometric function 2F1(a, b; c; x) for x in [0, 1].
///
/// The power series is summed directly for x <= 0.95; above that the
/// 1 - x connection formulas are used (with the logarithmic variants when
/// c - a - b is an integer). At x = 1 the Gauss summation is returned.
/// Symmetric in (a, b) bit for bit.
///
/// Throws DomainError if c is a nonpositive integer or x lies outside
/// [0, 1], and NonConvergenceError at x = 1 when c - a - b <= 0 and the
/// series does not terminate.
double hyp2f1(double a, double b, double c, double x);

/// Same function evaluated at x = 1 - y with y supplied directly, so that
/// arguments extremely close to 1 keep their full relative resolution.
double hyp2f1_complement(double a, double b, double c, double y);

namespace detail {

/// Plain power series with the term-ratio recursion; stops once three
/// consecutive terms fall below 1e-15 of the partial sum.
double hyp2f1_series(double a, double b, double c, double x);

}  // namespace detail

}  // namespace perslab
