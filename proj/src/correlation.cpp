#include "perslab/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "perslab/errors.hpp"
#include "perslab/quadrature.hpp"
#include "perslab/specialfn.hpp"

namespace perslab {

namespace {

void require_lag(double tau, const char* who) {
  if (!(tau >= 0.0) || std::isnan(tau)) {
    throw DomainError(std::string(who) + ": lag must be nonnegative");
  }
}

void require_unit_hurst(double h, const char* who) {
  if (!(h > 0.0 && h < 1.0)) throw DomainError(std::string(who) + ": H must lie in (0, 1)");
}

void require_positive_hurst(double h, const char* who) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError(std::string(who) + ": H must be positive");
}

// 2F1(a, b; c; e^{-tau}) choosing the argument form that keeps precision.
double hyp2f1_at_lag(double a, double b, double c, double tau) {
  const double x = std::exp(-tau);
  if (x > 0.95) return hyp2f1_complement(a, b, c, -std::expm1(-tau));
  return hyp2f1(a, b, c, x);
}

}  // namespace

Hurst::Hurst(double value) : value_(value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw DomainError("Hurst index must be positive and finite");
}

std::string to_string(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::IfbmLamperti: return "IFBM_LAMPERTI";
    case CorrelationKind::RlLamperti: return "RL_LAMPERTI";
    case CorrelationKind::FbmLamperti: return "FBM_LAMPERTI";
    case CorrelationKind::OrnsteinUhlenbeck: return "OU";
    case CorrelationKind::FractionalSlepian: return "FRACTIONAL_SLEPIAN";
    case CorrelationKind::CoshLimit: return "COSH_LIMIT";
  }
  return "UNKNOWN";
}

CorrelationKind correlation_kind_from_string(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) {
    return ch == '-' ? '_' : static_cast<char>(std::toupper(ch));
  });
  if (upper == "IFBM_LAMPERTI" || upper == "IFBM") return CorrelationKind::IfbmLamperti;
  if (upper == "RL_LAMPERTI" || upper == "RL") return CorrelationKind::RlLamperti;
  if (upper == "FBM_LAMPERTI" || upper == "FBM") return CorrelationKind::FbmLamperti;
  if (upper == "OU") return CorrelationKind::OrnsteinUhlenbeck;
  if (upper == "FRACTIONAL_SLEPIAN" || upper == "SLEPIAN") return CorrelationKind::FractionalSlepian;
  if (upper == "COSH_LIMIT" || upper == "COSH") return CorrelationKind::CoshLimit;
  throw DomainError("unknown correlation family: " + name);
}

CorrelationSpec::CorrelationSpec(CorrelationKind kind, std::optional<Hurst> hurst, double rate,
                                 double time_scale)
    : kind_(kind), hurst_(hurst), rate_(rate), time_scale_(time_scale) {
  if (!(time_scale > 0.0) || !std::isfinite(time_scale)) {
    throw DomainError("CorrelationSpec: time scale must be positive and finite");
  }
}

CorrelationSpec CorrelationSpec::ifbm(double hurst) {
  require_unit_hurst(hurst, "IFBM_LAMPERTI");
  return {CorrelationKind::IfbmLamperti, Hurst(hurst), 0.0, 1.0};
}

CorrelationSpec CorrelationSpec::rl(double hurst) {
  require_positive_hurst(hurst, "RL_LAMPERTI");
  return {CorrelationKind::RlLamperti, Hurst(hurst), 0.0, 1.0};
}

CorrelationSpec CorrelationSpec::fbm(double hurst) {
  require_unit_hurst(hurst, "FBM_LAMPERTI");
  return {CorrelationKind::FbmLamperti, Hurst(hurst), 0.0, 1.0};
}

CorrelationSpec CorrelationSpec::ou(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("OU: rate must be positive");
  return {CorrelationKind::OrnsteinUhlenbeck, std::nullopt, rate, 1.0};
}

CorrelationSpec CorrelationSpec::slepian(double hurst) {
  // (1 - tau^H)_+ is convex on (0, inf) only for H <= 1.
  if (!(hurst > 0.0 && hurst <= 1.0)) throw DomainError("FRACTIONAL_SLEPIAN: H must lie in (0, 1]");
  return {CorrelationKind::FractionalSlepian, Hurst(hurst), 0.0, 1.0};
}

CorrelationSpec CorrelationSpec::cosh_limit() { return {CorrelationKind::CoshLimit, std::nullopt, 0.0, 1.0}; }

CorrelationSpec CorrelationSpec::rescaled(double gamma) const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("rescaled: gamma must be positive");
  return {kind_, hurst_, rate_, time_scale_ * gamma};
}

std::string CorrelationSpec::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << to_string(kind_) << '(';
  if (hurst_) out << "H=" << hurst_->value() << ',';
  if (kind_ == CorrelationKind::OrnsteinUhlenbeck) out << "rate=" << rate_ << ',';
  out << "gamma=" << time_scale_ << ')';
  return out.str();
}

double rho_ifbm(double hurst, double tau) {
  require_unit_hurst(hurst, "rho_ifbm");
  require_lag(tau, "rho_ifbm");
  if (tau == 0.0) return 1.0;
  if (std::isinf(tau)) return 0.0;
  const double h = hurst;
  const double denom = 1.0 + 2.0 * h;
  const double power = 2.0 + 2.0 * h;
  if (tau <= 1.0) {
    return (1.0 + h) * (std::exp(-h * tau) + std::exp(h * tau)) / denom +
           std::pow(2.0 * std::sinh(0.5 * tau), power) / (2.0 * denom) -
           (std::exp((1.0 + h) * tau) + std::exp(-(1.0 + h) * tau)) / (2.0 * denom);
  }
  // e^{(1+H)tau}((1 - e^{-tau})^{2+2H} - 1) cancels the e^{H tau} term
  // against its k = 1 binomial term; what remains is sum_{k>=2}.
  double coef = power * (power - 1.0) / 2.0;  // (-1)^k binom(2+2H, k) at k = 2
  double sum = 0.0;
  for (int k = 2; k < 100000; ++k) {
    const double term = coef * std::exp((1.0 + h - k) * tau);
    sum += term;
    if (k > power + 1.0 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
    coef *= -(power - k) / (k + 1.0);
  }
  return (1.0 + h) * std::exp(-h * tau) / denom + (sum - std::exp(-(1.0 + h) * tau)) / (2.0 * denom);
}

double r_rl(double hurst, double tau) {
  require_positive_hurst(hurst, "r_rl");
  require_lag(tau, "r_rl");
  if (tau == 0.0) return 1.0;
  if (std::isinf(tau)) return 0.0;
  const double h = hurst;
  return 4.0 * h / (1.0 + 2.0 * h) * std::exp(-0.5 * tau) * hyp2f1_at_lag(1.0, 0.5 - h, 1.5 + h, tau);
}

double r_rl_complement(double hurst, double tau) {
  require_positive_hurst(hurst, "r_rl_complement");
  if (!(tau > 0.0)) throw DomainError("r_rl_complement: lag must be positive");
  if (std::isinf(tau)) return 0.0;
  const double h = hurst;
  if (h == 0.5) return 0.0;
  const double y = -std::expm1(-tau);
  return (1.0 - 2.0 * h) / (1.0 + 2.0 * h) * std::exp(-0.5 * tau) * std::pow(y, 2.0 * h) *
         hyp2f1_at_lag(0.5 + h, 2.0 * h, 1.5 + h, tau);
}

double rho_fbm(double hurst, double tau) {
  require_unit_hurst(hurst, "rho_fbm");
  require_lag(tau, "rho_fbm");
  if (tau == 0.0) return 1.0;
  if (std::isinf(tau)) return 0.0;
  const double h = hurst;
  // ln(1 - e^{-tau}) in whichever form is accurate for this lag.
  const double log_gap = (tau < 1.0) ? std::log(-std::expm1(-tau)) : std::log1p(-std::exp(-tau));
  return 0.5 * std::exp(-h * tau) - 0.5 * std::exp(h * tau) * std::expm1(2.0 * h * log_gap);
}

double corr_eval(const CorrelationSpec& spec, double tau) {
  require_lag(tau, "corr_eval");
  if (tau == 0.0) return 1.0;
  const double s = tau / spec.time_scale();
  switch (spec.kind()) {
    case CorrelationKind::IfbmLamperti: return rho_ifbm(spec.hurst()->value(), s);
    case CorrelationKind::RlLamperti: return r_rl(spec.hurst()->value(), s);
    case CorrelationKind::FbmLamperti: return rho_fbm(spec.hurst()->value(), s);
    case CorrelationKind::OrnsteinUhlenbeck: return std::exp(-spec.rate() * s);
    case CorrelationKind::FractionalSlepian:
      return s >= 1.0 ? 0.0 : 1.0 - std::pow(s, spec.hurst()->value());
    case CorrelationKind::CoshLimit: return 1.0 / std::cosh(0.5 * s);
  }
  throw DomainError("corr_eval: unknown family");
}

ContinuityDiagnostics check_continuity_conditions(const CorrelationSpec& spec, const CorrelationSpec& limit,
                                                  std::int64_t ell, std::int64_t first_lag,
                                                  const std::vector<double>& epsilons, std::int64_t cutoff) {
  if (ell <= 0 || first_lag <= 0 || cutoff <= 1) {
    throw DomainError("check_continuity_conditions: ell, L must be positive and cutoff > 1");
  }
  ContinuityDiagnostics out;
  for (std::int64_t tau = first_lag; tau <= cutoff; ++tau) {
    out.tail_sum += corr_eval(spec, static_cast<double>(tau) / static_cast<double>(ell));
  }
  for (double eps : epsilons) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("check_continuity_conditions: epsilon must lie in (0, 1)");
    // Uniform grid plus geometric points toward zero, where rough
    // correlations change fastest.
    double sup = 1.0 - corr_eval(spec, eps);
    constexpr int kUniform = 2000;
    for (int i = 1; i < kUniform; ++i) sup = std::max(sup, 1.0 - corr_eval(spec, eps * i / kUniform));
    for (double probe = eps * 0.5; probe > eps * 1e-12; probe *= 0.5) {
      sup = std::max(sup, 1.0 - corr_eval(spec, probe));
    }
    out.local_regularity.push_back({eps, sup});
  }
  const double at_cutoff = corr_eval(limit, static_cast<double>(cutoff));
  out.log_ratio = at_cutoff > 0.0 ? std::log(at_cutoff) / std::log(static_cast<double>(cutoff))
                                  : -std::numeric_limits<double>::infinity();
  return out;
}

double integral_r(double hurst, double upper) {
  require_positive_hurst(hurst, "integral_r");
  if (!(upper > 0.0) || !std::isfinite(upper)) throw DomainError("integral_r: upper limit must be positive");
  const auto r = [hurst](double tau) { return r_rl(hurst, tau); };
  // On (0, 1] integrate in s = ln tau: r behaves like 1 - C tau^{2H} at the
  // origin, which is smooth in s. The part below e^{-60} is negligible.
  const double head_end = std::min(1.0, upper);
  double total = integrate([&](double s) {
    const double tau = std::exp(s);
    return r(tau) * tau;
  }, -60.0, std::log(head_end), 1e-10);
  total += std::exp(-60.0);
  double left = head_end;
  for (double edge : {4.0, 16.0, 64.0, upper}) {
    if (edge <= left) continue;
    const double right = std::min(edge, upper);
    total += integrate(r, left, right, 1e-10);
    left = right;
    if (left >= upper) break;
  }
  return total;
}

}  // namespace perslab
