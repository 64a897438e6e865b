#pragma once

// Deterministic experiments behind the CLI: the identity and bound suite,
// rescaled-correlation limit tables and the drift-function check.

#include <string>
#include <vector>

namespace perslab {

struct CheckResult {
  std::string name;
  double residual = 0.0;   // worst value of the checked quantity
  double tolerance = 0.0;  // pass iff residual <= tolerance
  bool passed = false;
  std::string detail;      // where the worst value occurred
};

struct IdentityOptions {
  /// H values for the hypergeometric identities.
  std::vector<double> hursts{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55,
                             0.6,  0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.5, 2.5};
  /// Added to every r_H value used by the r_H-form checks. Testing hook.
  double rl_perturbation = 0.0;
};

/// Every deterministic identity, normalization, bound, monotonicity and
/// limit property of the special-function and correlation layers.
std::vector<CheckResult> run_identity_suite(const IdentityOptions& options = {});

enum class LimitKind {
  IfbmToZero,  // rho_H(tau / H) -> e^{-tau} as H -> 0
  IfbmToOne,   // rho_H(tau / (1 - H)) -> e^{-tau} as H -> 1
  RlToZero,    // r_H(tau / e^{a / (2H)}) -> 1 - e^{-a} as H -> 0
};

struct LimitRow {
  double hurst = 0.0;
  double tau = 0.0;
  double a = 0.0;  // RlToZero only
  double value = 0.0;
  double limit = 0.0;
  double gap = 0.0;
};

/// Rows in (a, tau, H) order, H varying fastest.
std::vector<LimitRow> limit_table(LimitKind kind, const std::vector<double>& hursts, const std::vector<double>& taus,
                                  const std::vector<double>& as = {1.0});

/// True when, for every (a, tau), the gaps strictly decrease along the
/// H order given to limit_table.
bool gaps_decrease(const std::vector<LimitRow>& rows, std::size_t n_hursts);

struct DriftReport {
  double hurst = 0.0;
  double eta = 0.0;
  double c = 0.0;  // 1 / int_{1/2}^1 (1 - s)^{H - 1/2} s^{-eta} ds
  std::vector<double> t;
  std::vector<double> phi;
  double phi_at_one = 0.0;
  bool nondecreasing = false;
  bool at_least_one = false;  // phi(t) >= 1 for grid t >= 1
  bool passed() const;
};

/// phi(t) = c int_{1/2}^t (t - s)^{H - 1/2} s^{-eta} ds on `points`
/// log-spaced nodes of [1/2, t_max] (t = 1 always included).
/// Requires H in (0, 1/2], eta in (1/2, 1/2 + H), t_max >= 1.
DriftReport drift_check(double hurst, double eta, double t_max, int points = 200);

double drift_phi(double hurst, double eta, double c, double t);

}  // namespace perslab
