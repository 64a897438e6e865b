#include "perslab/specialfn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include "perslab/errors.hpp"

namespace perslab {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// zeta(k) - 1 for k = 0..kZetaTerms-1 (entries 0 and 1 unused), by
// Euler-Maclaurin summation of n^-k past n = 16.
constexpr int kZetaTerms = 48;

std::array<double, kZetaTerms> make_zeta_minus_one() {
  constexpr int kCut = 16;
  // B_{2j} / (2j)!
  constexpr std::array<double, 7> bernoulli_over_factorial = {
      1.0 / 12.0,           -1.0 / 720.0,           1.0 / 30240.0,
      -1.0 / 1209600.0,     1.0 / 47900160.0,       -691.0 / 1307674368000.0,
      1.0 / 74724249600.0};
  std::array<double, kZetaTerms> out{};
  for (int k = 2; k < kZetaTerms; ++k) {
    const double s = static_cast<double>(k);
    double sum = 0.0;
    for (int n = kCut - 1; n >= 2; --n) sum += std::pow(static_cast<double>(n), -s);
    const double big_n = kCut;
    double tail = std::pow(big_n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(big_n, -s);
    // Rising product s (s+1) ... (s+2j-2) times N^{-s-2j+1}.
    double rising = s;
    double power = std::pow(big_n, -s - 1.0);
    for (std::size_t j = 0; j < bernoulli_over_factorial.size(); ++j) {
      tail += bernoulli_over_factorial[j] * rising * power;
      rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
      power /= big_n * big_n;
    }
    out[k] = sum + tail;
  }
  return out;
}

const std::array<double, kZetaTerms>& zeta_minus_one() {
  static const std::array<double, kZetaTerms> table = make_zeta_minus_one();
  return table;
}

// sum_{k>=2} (-1)^k (zeta(k) - 1) z^k / k, |z| <= 1/2.
double log_gamma_tail(double z) {
  const auto& zeta = zeta_minus_one();
  double sum = 0.0;
  double zk = -z;
  for (int k = 2; k < kZetaTerms; ++k) {
    zk *= -z;
    const double term = zeta[k] * zk / k;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

double stirling_log_gamma(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv *
      (1.0 / 12.0 +
       inv2 * (-1.0 / 360.0 +
               inv2 * (1.0 / 1260.0 +
                       inv2 * (-1.0 / 1680.0 +
                               inv2 * (1.0 / 1188.0 +
                                       inv2 * (-691.0 / 360360.0 + inv2 / 156.0))))));
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

// sin(pi x) with exact zeros at the integers.
double sin_pi(double x) {
  double r = x - 2.0 * std::nearbyint(0.5 * x);  // r in [-1, 1]
  if (r > 0.5) r = 1.0 - r;
  else if (r < -0.5) r = -1.0 - r;
  return std::sin(std::numbers::pi * r);
}

double cos_pi(double x) {
  double r = std::abs(x - 2.0 * std::nearbyint(0.5 * x));  // r in [0, 1]
  if (r > 0.5) return -std::sin(std::numbers::pi * (r - 0.5));
  return std::sin(std::numbers::pi * (0.5 - r));
}

bool is_nonpositive_integer(double v) { return v <= 0.0 && v == std::floor(v); }

constexpr double kNearOne = 0.95;
constexpr double kSeriesTol = 1e-15;
constexpr long kSeriesCap = 1'000'000;
// Half-width of the band around integer c - a - b handled by interpolation.
constexpr double kIntegerBand = 1e-3;

void validate_parameters(double a, double b, double c) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw DomainError("hyp2f1: parameters must be finite");
  }
  if (is_nonpositive_integer(c)) {
    throw DomainError("hyp2f1: c must not be a nonpositive integer");
  }
}

bool terminates(double a, double b) { return is_nonpositive_integer(a) || is_nonpositive_integer(b); }

double gauss_sum(double a, double b, double c) {
  const double m = c - a - b;
  if (!(m > 0.0)) {
    throw NonConvergenceError("hyp2f1: series diverges at x = 1 (c - a - b <= 0)");
  }
  return gamma_fn(c) * gamma_fn(m) * reciprocal_gamma(c - a) * reciprocal_gamma(c - b);
}

// Linear transformation to 1 - x, c - a - b not an integer.
double connection_generic(double a, double b, double c, double y) {
  const double m = c - a - b;
  const double gc = gamma_fn(c);
  const double first_coef = gc * gamma_fn(m) * reciprocal_gamma(c - a) * reciprocal_gamma(c - b);
  const double second_coef = gc * gamma_fn(-m) * reciprocal_gamma(a) * reciprocal_gamma(b);
  double result = 0.0;
  if (first_coef != 0.0) result += first_coef * detail::hyp2f1_series(a, b, 1.0 - m, y);
  if (second_coef != 0.0) {
    result += second_coef * std::pow(y, m) * detail::hyp2f1_series(c - a, c - b, 1.0 + m, y);
  }
  return result;
}

// c = a + b + k with integer k; logarithmic connection formulas.
double connection_integer(double a, double b, double c, long k, double y) {
  if (k < 0) {
    // Euler's transformation moves to c - a - b = -k > 0.
    return std::pow(y, static_cast<double>(k)) * hyp2f1_complement(c - a, c - b, c, y);
  }
  const double log_y = std::log(y);
  if (k == 0) {
    const double prefactor = gamma_fn(a + b) * reciprocal_gamma(a) * reciprocal_gamma(b);
    double psi_n1 = -kEulerGamma;
    double psi_a = digamma(a);
    double psi_b = digamma(b);
    double coef = 1.0;
    double sum = 0.0;
    int small = 0;
    for (long n = 0; n < kSeriesCap; ++n) {
      const double term = coef * (2.0 * psi_n1 - psi_a - psi_b - log_y);
      sum += term;
      small = (std::abs(term) <= kSeriesTol * std::abs(sum)) ? small + 1 : 0;
      if (small == 3) return prefactor * sum;
      const double dn = static_cast<double>(n);
      coef *= (a + dn) * (b + dn) / ((dn + 1.0) * (dn + 1.0)) * y;
      psi_n1 += 1.0 / (dn + 1.0);
      psi_a += 1.0 / (a + dn);
      psi_b += 1.0 / (b + dn);
    }
    throw NonConvergenceError("hyp2f1: logarithmic connection series did not converge");
  }

  const double dk = static_cast<double>(k);
  const double gc = gamma_fn(c);

  // Finite part: Gamma(k) Gamma(c) / (Gamma(a+k) Gamma(b+k)) sum_{n<k} ...
  double finite = 0.0;
  {
    double coef = 1.0;
    for (long n = 0; n < k; ++n) {
      finite += coef;
      if (n + 1 == k) break;
      const double dn = static_cast<double>(n);
      coef *= (a + dn) * (b + dn) / ((dn + 1.0) * (1.0 - dk + dn)) * y;
    }
    finite *= gamma_fn(dk) * gc * reciprocal_gamma(a + dk) * reciprocal_gamma(b + dk);
  }

  const double rg_ab = reciprocal_gamma(a) * reciprocal_gamma(b);
  if (rg_ab == 0.0) return finite;

  double psi_n1 = -kEulerGamma;   // psi(n + 1)
  double psi_nk1 = digamma(dk + 1.0);  // psi(n + k + 1)
  double psi_a = digamma(a + dk);     // psi(a + n + k)
  double psi_b = digamma(b + dk);     // psi(b + n + k)
  double coef = std::exp(-log_gamma(dk + 1.0));  // 1 / k!
  double sum = 0.0;
  int small = 0;
  long n = 0;
  for (; n < kSeriesCap; ++n) {
    const double term = coef * (log_y - psi_n1 - psi_nk1 + psi_a + psi_b);
    sum += term;
    small = (std::abs(term) <= kSeriesTol * std::abs(sum)) ? small + 1 : 0;
    if (small == 3) break;
    const double dn = static_cast<double>(n);
    coef *= (a + dk + dn) * (b + dk + dn) / ((dn + 1.0) * (dn + dk + 1.0)) * y;
    psi_n1 += 1.0 / (dn + 1.0);
    psi_nk1 += 1.0 / (dn + dk + 1.0);
    psi_a += 1.0 / (a + dk + dn);
    psi_b += 1.0 / (b + dk + dn);
  }
  if (n == kSeriesCap) {
    throw NonConvergenceError("hyp2f1: logarithmic connection series did not converge");
  }
  const double sign = (k % 2 == 0) ? -1.0 : 1.0;  // -(-1)^k
  return finite + sign * std::pow(y, dk) * gc * rg_ab * sum;
}

// Euler's integral Gamma(c)/(Gamma(p)Gamma(c-p)) int_0^1 t^{p-1} (1-t)^{c-p-1}
// (1 - x t)^{-q} dt for 0 < p < c, by tanh-sinh quadrature. The integrand
// is positive, so nothing cancels; 1 - x t is formed as (1 - t) + y t.
// Returns nothing when the endpoint decay is too slow for the fixed reach.
std::optional<double> euler_integral(double p, double q, double c, double y) {
  constexpr double kHalfPi = 0.5 * std::numbers::pi;
  constexpr double kReach = 4.0;
  const auto log_integrand = [&](double u) {
    const double s = kHalfPi * std::sinh(u);
    // t = 1 / (1 + e^{-2s}), 1 - t = 1 / (1 + e^{2s}), in log form.
    const double log_t = (s >= 0.0) ? -std::log1p(std::exp(-2.0 * s)) : 2.0 * s - std::log1p(std::exp(2.0 * s));
    const double log_1mt = (s >= 0.0) ? -2.0 * s - std::log1p(std::exp(-2.0 * s)) : -std::log1p(std::exp(2.0 * s));
    const double t = std::exp(log_t);
    const double one_minus_t = std::exp(log_1mt);
    const double log_jacobian = std::log(std::numbers::pi * std::cosh(u)) + log_t + log_1mt;
    return (p - 1.0) * log_t + (c - p - 1.0) * log_1mt - q * std::log(one_minus_t + y * t) +
           log_jacobian;
  };
  double sum = std::exp(log_integrand(0.0));
  const double edge = std::max(std::exp(log_integrand(kReach)), std::exp(log_integrand(-kReach)));
  if (!std::isfinite(sum) || !(edge <= 1e-18 * sum)) return std::nullopt;
  double step = 0.5;
  double previous = 0.0;
  for (double u = step; u <= kReach; u += step) {
    sum += std::exp(log_integrand(u)) + std::exp(log_integrand(-u));
  }
  previous = sum * step;
  for (int level = 1; level <= 12; ++level) {
    step *= 0.5;
    for (double u = step; u <= kReach; u += 2.0 * step) {
      sum += std::exp(log_integrand(u)) + std::exp(log_integrand(-u));
    }
    const double estimate = sum * step;
    if (level >= 3 && std::abs(estimate - previous) <= 1e-15 * std::abs(estimate)) {
      return gamma_fn(c) * reciprocal_gamma(p) * reciprocal_gamma(c - p) * estimate;
    }
    previous = estimate;
  }
  return std::nullopt;
}

double near_one(double a, double b, double c, double y) {
  const double m = c - a - b;
  const double k = std::nearbyint(m);
  const double offset = m - k;
  if (offset == 0.0) return connection_integer(a, b, c, static_cast<long>(k), y);
  if (std::abs(offset) < kIntegerBand) {
    // The two generic terms cancel here; use a representation without
    // cancellation when the parameters permit one.
    std::optional<double> value;
    if (a > 0.0 && a < c) value = euler_integral(a, b, c, y);
    if (!value && b > 0.0 && b < c) value = euler_integral(b, a, c, y);
    if (value) return *value;
    // Otherwise interpolate in c through the exact-integer point. The
    // half-width shrinks with |ln y|, which sets the curvature in c.
    const double width = std::min(1e-4, 5e-4 / std::max(1.0, std::abs(std::log(y))));
    const double c0 = a + b + k;
    if (std::abs(offset) < width && !is_nonpositive_integer(c0) &&
        !is_nonpositive_integer(c0 - width)) {
      const double lo = connection_generic(a, b, c0 - width, y);
      const double mid = connection_integer(a, b, c0, static_cast<long>(k), y);
      const double hi = connection_generic(a, b, c0 + width, y);
      const double s = offset / width;
      return mid + 0.5 * s * (hi - lo) + 0.5 * s * s * (hi - 2.0 * mid + lo);
    }
  }
  return connection_generic(a, b, c, y);
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("log_gamma: argument must be positive and finite");
  }
  if (x < 0.5) return log_gamma(x + 1.0) - std::log(x);
  if (x < 1.5) {
    const double z = x - 1.0;
    return -std::log1p(z) + z * (1.0 - kEulerGamma) + log_gamma_tail(z);
  }
  if (x <= 2.5) {
    const double z = x - 2.0;
    return z * (1.0 - kEulerGamma) + log_gamma_tail(z);
  }
  if (x < 15.0) {
    double y = x;
    double product = 1.0;
    while (y > 2.5) {
      y -= 1.0;
      product *= y;
    }
    return std::log(product) + log_gamma(y);
  }
  return stirling_log_gamma(x);
}

double reciprocal_gamma(double x) {
  if (std::isnan(x)) throw DomainError("reciprocal_gamma: NaN argument");
  if (x > 0.0) return std::exp(-log_gamma(x));
  if (x == std::floor(x)) return 0.0;
  return sin_pi(x) * std::exp(log_gamma(1.0 - x)) / std::numbers::pi;
}

double gamma_fn(double x) {
  if (std::isnan(x) || is_nonpositive_integer(x)) {
    throw DomainError("gamma_fn: pole at nonpositive integer");
  }
  if (x > 0.0) return std::exp(log_gamma(x));
  return std::numbers::pi / (sin_pi(x) * std::exp(log_gamma(1.0 - x)));
}

double digamma(double x) {
  if (std::isnan(x) || is_nonpositive_integer(x)) {
    throw DomainError("digamma: pole at nonpositive integer");
  }
  if (x <= 0.0) {
    return digamma(1.0 - x) - std::numbers::pi * cos_pi(x) / sin_pi(x);
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
  return shift + std::log(x) - 0.5 / x - series;
}

namespace detail {

double hyp2f1_series(double a, double b, double c, double x) {
  double term = 1.0;
  double sum = 1.0;
  int small = 0;
  for (long n = 0; n < kSeriesCap; ++n) {
    const double dn = static_cast<double>(n);
    term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * x;
    sum += term;
    small = (std::abs(term) <= kSeriesTol * std::abs(sum)) ? small + 1 : 0;
    if (small == 3) return sum;
  }
  throw NonConvergenceError("hyp2f1: series did not meet tolerance within the iteration cap");
}

}  // namespace detail

double hyp2f1(double a, double b, double c, double x) {
  validate_parameters(a, b, c);
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("hyp2f1: x must lie in [0, 1]");
  if (a > b) std::swap(a, b);
  if (x == 0.0) return 1.0;
  if (terminates(a, b)) return detail::hyp2f1_series(a, b, c, x);
  if (x == 1.0) return gauss_sum(a, b, c);
  if (x <= kNearOne) return detail::hyp2f1_series(a, b, c, x);
  return near_one(a, b, c, 1.0 - x);
}

double hyp2f1_complement(double a, double b, double c, double y) {
  validate_parameters(a, b, c);
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("hyp2f1: 1 - x must lie in [0, 1]");
  if (a > b) std::swap(a, b);
  if (y == 1.0) return 1.0;
  if (terminates(a, b)) return detail::hyp2f1_series(a, b, c, 1.0 - y);
  if (y == 0.0) return gauss_sum(a, b, c);
  const double x = 1.0 - y;
  if (x <= kNearOne) return detail::hyp2f1_series(a, b, c, x);
  return near_one(a, b, c, y);
}

}  // namespace perslab
