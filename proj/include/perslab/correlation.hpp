#pragma once

// Stationary correlation functions of the Lamperti-transformed processes
// and their comparison processes, plus the identities and diagnostics
// built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace perslab {

/// Hurst-type index. Positive and finite; context-specific upper bounds
/// (H < 1 for FBM-based processes) are enforced by the consumers.
class Hurst {
 public:
  explicit Hurst(double value);
  double value() const { return value_; }

 private:
  double value_;
};

enum class CorrelationKind {
  IfbmLamperti,       // rho_H, integrated FBM
  RlLamperti,         // r_H, Riemann-Liouville
  FbmLamperti,        // plain FBM
  OrnsteinUhlenbeck,  // exp(-rate tau)
  FractionalSlepian,  // (1 - tau^H)_+
  CoshLimit,          // 1 / cosh(tau / 2), the H -> infinity RL limit
};

std::string to_string(CorrelationKind kind);
CorrelationKind correlation_kind_from_string(const std::string& name);

/// One member of the correlation families together with a time scale
/// gamma; evaluation at lag tau returns A(tau / gamma).
class CorrelationSpec {
 public:
  static CorrelationSpec ifbm(double hurst);
  static CorrelationSpec rl(double hurst);
  static CorrelationSpec fbm(double hurst);
  static CorrelationSpec ou(double rate = 1.0);
  static CorrelationSpec slepian(double hurst);
  static CorrelationSpec cosh_limit();

  /// Same family with time scale multiplied by `gamma`. A process with
  /// persistence exponent theta has exponent theta / gamma after this.
  CorrelationSpec rescaled(double gamma) const;

  CorrelationKind kind() const { return kind_; }
  std::optional<Hurst> hurst() const { return hurst_; }
  double rate() const { return rate_; }
  double time_scale() const { return time_scale_; }

  /// Values of A are nonnegative for every family except FBM_LAMPERTI.
  bool nonnegative() const { return kind_ != CorrelationKind::FbmLamperti; }

  /// Stable one-line description, e.g. "RL_LAMPERTI(H=0.5,gamma=1)".
  std::string describe() const;

 private:
  CorrelationSpec(CorrelationKind kind, std::optional<Hurst> hurst, double rate, double time_scale);

  CorrelationKind kind_;
  std::optional<Hurst> hurst_;
  double rate_ = 0.0;
  double time_scale_ = 1.0;
};

/// rho_H(tau), the correlation of the unit-variance Lamperti transform of
/// integrated FBM. H in (0, 1), tau >= 0. For tau > 1 the exponentially
/// large terms are combined through the binomial expansion of
/// (1 - e^{-tau})^{2 + 2H}, which leaves only decaying exponentials.
double rho_ifbm(double hurst, double tau);

/// r_H(tau) = 4H/(1+2H) e^{-tau/2} 2F1(1, 1/2 - H; 3/2 + H; e^{-tau}),
/// the Lamperti correlation of the Riemann-Liouville process. H > 0.
double r_rl(double hurst, double tau);

/// e^{-tau/2} - r_H(tau) in product form:
/// (1-2H)/(1+2H) e^{-tau/2} (1 - e^{-tau})^{2H} 2F1(1/2+H, 2H; 3/2+H; e^{-tau}).
/// Its sign is that of 1 - 2H. Requires tau > 0.
double r_rl_complement(double hurst, double tau);

/// Lamperti correlation of FBM: (e^{H tau} + e^{-H tau} - (2 sinh(tau/2))^{2H}) / 2.
double rho_fbm(double hurst, double tau);

/// A(tau / gamma) for the family described by `spec`; exactly 1 at tau = 0.
double corr_eval(const CorrelationSpec& spec, double tau);

struct ContinuityDiagnostics {
  double tail_sum = 0.0;  // sum_{tau=L}^{cutoff} A(tau / ell)
  struct SupEntry {
    double epsilon;
    double sup_one_minus;  // sup over [0, epsilon] of 1 - A
  };
  std::vector<SupEntry> local_regularity;
  double log_ratio = 0.0;  // ln A(cutoff) / ln(cutoff) for the limit spec
};

/// Raw numbers behind the three sufficient conditions for the exponent to
/// be continuous in the correlation: tail summability of `spec`, its
/// modulus at zero per epsilon, and the polynomial decay index of `limit`. No verdict.
ContinuityDiagnostics check_continuity_conditions(const CorrelationSpec& spec, const CorrelationSpec& limit,
                                                  std::int64_t ell, std::int64_t first_lag,
                                                  const std::vector<double>& epsilons, std::int64_t cutoff);

/// int_0^upper r_H(tau) dtau, absolute error below 1e-8.
double integral_r(double hurst, double upper);

}  // namespace perslab
