#pragma once

// Monte Carlo persistence probabilities P(Z_tau < 0 for all tau in [0, T])
// of stationary Gaussian processes, exponent fits and the structural
// checks built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perslab/correlation.hpp"
#include "perslab/sampler.hpp"

namespace perslab {

/// Grid estimates miss sign changes between nodes, so p_hat overstates
/// the continuous-time probability.
inline constexpr const char* kGridBiasNote =
    "upward-biased: sign changes between grid points are not observed";

struct PersistenceEstimate {
  double horizon = 0.0;
  double step = 0.0;  // actual grid spacing (0 for the single-point grid)
  std::int64_t n_trials = 0;
  std::int64_t n_survive = 0;
  double p_hat = 0.0;
  double log_p = 0.0;            // -inf when nothing survived
  std::optional<double> ci_log;  // 95% half-width on ln p, needs >= 10 survivors
  std::uint64_t seed = 0;
  SamplingReport report;
};

/// Estimate from raw counts with the delta-method interval
/// 1.96 sqrt((1 - p) / (n p)).
PersistenceEstimate make_estimate(double horizon, std::int64_t n_trials, std::int64_t n_survive);

/// Fraction of n_trials exact GSP paths on {0, step, ..., T} that are
/// strictly negative at every node (a node equal to 0 ends survival).
/// Throws GridTooLargeError when the grid would exceed 1e5 points.
PersistenceEstimate persistence_probability(const CorrelationSpec& spec, double horizon, double step,
                                            std::int64_t n_trials, std::uint64_t seed, int workers = 1);

struct ExponentFit {
  double theta_hat = 0.0;
  double intercept = 0.0;
  double stderr_resid = 0.0;     // from the weighted residual scatter
  double stderr_sampling = 0.0;  // from the per-point intervals alone
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::vector<PersistenceEstimate> points;

  /// The larger of the two error estimates.
  double std_error() const { return stderr_resid > stderr_sampling ? stderr_resid : stderr_sampling; }
};

/// Weighted least squares of -ln p_hat on T with weights 1 / ci_log^2
/// over the estimates whose horizon lies in [t_min, t_max]. Points without
/// an interval are skipped; fewer than 3 usable points is an
/// InsufficientDataError.
ExponentFit fit_exponent(const std::vector<PersistenceEstimate>& estimates, double t_min, double t_max);

/// Budget and grid for one exponent estimate.
struct EstimationPlan {
  double step = 0.005;
  double t_min = 2.0;
  double t_max = 8.0;
  int t_points = 4;
  std::int64_t trials = 1000000;
  std::uint64_t seed = 1;
  int workers = 1;

  /// Evenly spaced horizons from t_min to t_max.
  std::vector<double> horizons() const;
};

/// persistence_probability at every horizon of the plan (independent
/// derived seeds) followed by fit_exponent. Horizons after the first one
/// with fewer than 10 survivors are skipped; if fewer than 3 remain the
/// result is a BudgetInfeasibleError.
ExponentFit estimate_exponent(const CorrelationSpec& spec, const EstimationPlan& plan);

/// Exponent of spec rescaled by gamma; in population equal to the
/// original exponent divided by gamma.
ExponentFit rescaled_exponent(const CorrelationSpec& spec, double gamma, const EstimationPlan& plan);

struct SubadditivityReport {
  PersistenceEstimate first;   // horizon T1
  PersistenceEstimate second;  // horizon T2
  PersistenceEstimate joint;   // horizon T1 + T2
  double product = 0.0;        // p_hat(T1) p_hat(T2)
  double std_error = 0.0;      // of p_hat(T1+T2) - product
  bool applicable = true;      // the spec has nonnegative correlations
  bool holds = false;          // p_hat(T1+T2) >= product - 3 std_error
};

SubadditivityReport subadditivity_check(const CorrelationSpec& spec, double t1, double t2, double step,
                                        std::int64_t n_trials, std::uint64_t seed, int workers = 1);

enum class Family { Ifbm, Rl, Fbm };

std::string to_string(Family family);
Family family_from_string(const std::string& name);
CorrelationSpec family_spec(Family family, double hurst);

struct CurvePoint {
  double hurst = 0.0;
  Family family = Family::Ifbm;
  double theta_hat = 0.0;  // NaN when the point failed
  double std_error = 0.0;
  std::string status = "ok";  // "ok", "budget-infeasible" or the error text
  std::optional<ExponentFit> fit;
  // IFBM only: conjectured H(1 - H) and the bounds min(H,1-H)/2, min(H,1-H).
  std::optional<double> conjecture;
  std::optional<double> lower_bound;
  std::optional<double> upper_bound;
};

/// One exponent estimate per H; failures are recorded in the point.
std::vector<CurvePoint> exponent_curve(Family family, const std::vector<double>& hursts, const EstimationPlan& plan);

}  // namespace perslab
