#include "perslab/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "perslab/errors.hpp"

namespace perslab {

namespace {

constexpr std::int64_t kMaxGridPoints = 100000;
constexpr std::int64_t kMinSurvivors = 10;
constexpr double kZ95 = 1.96;

double binomial_variance(double p, std::int64_t n) { return p * (1.0 - p) / static_cast<double>(n); }

}  // namespace

PersistenceEstimate make_estimate(double horizon, std::int64_t n_trials, std::int64_t n_survive) {
  if (n_trials <= 0) throw DomainError("number of trials must be positive");
  if (n_survive < 0 || n_survive > n_trials) throw DomainError("survivor count outside [0, trials]");
  PersistenceEstimate e;
  e.horizon = horizon;
  e.n_trials = n_trials;
  e.n_survive = n_survive;
  e.p_hat = static_cast<double>(n_survive) / static_cast<double>(n_trials);
  e.log_p = n_survive > 0 ? std::log(e.p_hat) : -std::numeric_limits<double>::infinity();
  if (n_survive >= kMinSurvivors) {
    e.ci_log = kZ95 * std::sqrt((1.0 - e.p_hat) / (static_cast<double>(n_trials) * e.p_hat));
  }
  return e;
}

PersistenceEstimate persistence_probability(const CorrelationSpec& spec, double horizon, double step,
                                            std::int64_t n_trials, std::uint64_t seed, int workers) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be finite and >= 0");
  if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("grid step must be positive");
  if (n_trials <= 0) throw DomainError("number of trials must be positive");
  if (horizon / step + 1.0 > static_cast<double>(kMaxGridPoints)) {
    std::ostringstream msg;
    msg << "grid of " << horizon / step + 1.0 << " points exceeds the limit of " << kMaxGridPoints;
    throw GridTooLargeError(msg.str());
  }
  const GridSpec grid = GridSpec::from_step(horizon, step);
  const double dt = grid.step();
  ToeplitzSampler sampler(grid.points(), [&](std::int64_t k) { return corr_eval(spec, static_cast<double>(k) * dt); });

  std::vector<std::int64_t> survivors(static_cast<std::size_t>(resolve_workers(workers)), 0);
  sampler.for_each_path(n_trials, seed, workers, [&](std::int64_t, std::span<const double> path, int worker) {
    for (double v : path) {
      if (!(v < 0.0)) return;
    }
    ++survivors[static_cast<std::size_t>(worker)];
  });
  PersistenceEstimate e =
      make_estimate(horizon, n_trials, std::accumulate(survivors.begin(), survivors.end(), std::int64_t{0}));
  e.step = dt;
  e.seed = seed;
  e.report = sampler.report();
  return e;
}

ExponentFit fit_exponent(const std::vector<PersistenceEstimate>& estimates, double t_min, double t_max) {
  if (!(t_min <= t_max)) throw DomainError("fit window must satisfy t_min <= t_max");
  ExponentFit fit;
  fit.window_lo = t_min;
  fit.window_hi = t_max;
  std::vector<double> x, y, w;
  for (const auto& e : estimates) {
    if (e.horizon < t_min || e.horizon > t_max) continue;
    fit.points.push_back(e);
    if (!e.ci_log || !(*e.ci_log > 0.0) || !std::isfinite(e.log_p)) continue;
    x.push_back(e.horizon);
    y.push_back(-e.log_p);
    w.push_back(1.0 / (*e.ci_log * *e.ci_log));
  }
  if (x.size() < 3) {
    std::ostringstream msg;
    msg << "exponent fit needs 3 estimates with >= " << kMinSurvivors << " survivors in [" << t_min << ", "
        << t_max << "], got " << x.size();
    throw InsufficientDataError(msg.str());
  }
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xbar += w[i] * x[i];
    ybar += w[i] * y[i];
  }
  xbar /= sw;
  ybar /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw InsufficientDataError("exponent fit needs at least two distinct horizons");
  fit.theta_hat = sxy / sxx;
  fit.intercept = ybar - fit.theta_hat * xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.theta_hat * x[i];
    rss += w[i] * r * r;
  }
  fit.stderr_resid = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
  // ci_log is 1.96 standard deviations, so the weights are 1.96^2 / var.
  fit.stderr_sampling = kZ95 / std::sqrt(sxx);
  return fit;
}

std::vector<double> EstimationPlan::horizons() const {
  if (t_points < 3) throw DomainError("estimation plan needs at least 3 horizons");
  if (!(t_min > 0.0 && t_max > t_min)) throw DomainError("estimation plan needs 0 < t_min < t_max");
  std::vector<double> out(static_cast<std::size_t>(t_points));
  for (int i = 0; i < t_points; ++i) {
    out[static_cast<std::size_t>(i)] = i + 1 == t_points ? t_max : t_min + (t_max - t_min) * i / (t_points - 1);
  }
  return out;
}

ExponentFit estimate_exponent(const CorrelationSpec& spec, const EstimationPlan& plan) {
  const auto horizons = plan.horizons();
  std::vector<PersistenceEstimate> estimates;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const auto e = persistence_probability(spec, horizons[i], plan.step, plan.trials,
                                           derive_seed(plan.seed, i), plan.workers);
    estimates.push_back(e);
    // Survival only gets rarer with T.
    if (e.n_survive < kMinSurvivors) break;
  }
  const auto usable = std::count_if(estimates.begin(), estimates.end(),
                                    [](const PersistenceEstimate& e) { return e.ci_log.has_value(); });
  if (usable < 3) {
    std::ostringstream msg;
    msg << spec.describe() << ": only " << usable << " horizons reach " << kMinSurvivors << " survivors with "
        << plan.trials << " trials";
    throw BudgetInfeasibleError(msg.str());
  }
  return fit_exponent(estimates, plan.t_min, plan.t_max);
}

ExponentFit rescaled_exponent(const CorrelationSpec& spec, double gamma, const EstimationPlan& plan) {
  return estimate_exponent(spec.rescaled(gamma), plan);
}

SubadditivityReport subadditivity_check(const CorrelationSpec& spec, double t1, double t2, double step,
                                        std::int64_t n_trials, std::uint64_t seed, int workers) {
  SubadditivityReport r;
  r.first = persistence_probability(spec, t1, step, n_trials, derive_seed(seed, 0), workers);
  r.second = persistence_probability(spec, t2, step, n_trials, derive_seed(seed, 1), workers);
  r.joint = persistence_probability(spec, t1 + t2, step, n_trials, derive_seed(seed, 2), workers);
  const double p1 = r.first.p_hat;
  const double p2 = r.second.p_hat;
  r.product = p1 * p2;
  r.std_error = std::sqrt(binomial_variance(r.joint.p_hat, n_trials) +
                          p2 * p2 * binomial_variance(p1, n_trials) +
                          p1 * p1 * binomial_variance(p2, n_trials));
  r.applicable = spec.nonnegative();
  r.holds = r.joint.p_hat >= r.product - 3.0 * r.std_error;
  return r;
}

std::string to_string(Family family) {
  switch (family) {
    case Family::Ifbm: return "IFBM";
    case Family::Rl: return "RL";
    case Family::Fbm: return "FBM";
  }
  return "UNKNOWN";
}

Family family_from_string(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (upper == "IFBM") return Family::Ifbm;
  if (upper == "RL") return Family::Rl;
  if (upper == "FBM") return Family::Fbm;
  throw DomainError("unknown family: " + name + " (expected IFBM, RL or FBM)");
}

CorrelationSpec family_spec(Family family, double hurst) {
  switch (family) {
    case Family::Ifbm: return CorrelationSpec::ifbm(hurst);
    case Family::Rl: return CorrelationSpec::rl(hurst);
    case Family::Fbm: return CorrelationSpec::fbm(hurst);
  }
  throw DomainError("unknown family");
}

std::vector<CurvePoint> exponent_curve(Family family, const std::vector<double>& hursts, const EstimationPlan& plan) {
  std::vector<CurvePoint> curve;
  for (std::size_t i = 0; i < hursts.size(); ++i) {
    CurvePoint point;
    point.hurst = hursts[i];
    point.family = family;
    if (family == Family::Ifbm) {
      const double m = std::min(point.hurst, 1.0 - point.hurst);
      point.conjecture = point.hurst * (1.0 - point.hurst);
      point.lower_bound = m / 2.0;
      point.upper_bound = m;
    }
    EstimationPlan local = plan;
    local.seed = derive_seed(plan.seed, 1000 + i);
    try {
      const auto fit = estimate_exponent(family_spec(family, point.hurst), local);
      point.theta_hat = fit.theta_hat;
      point.std_error = fit.std_error();
      point.fit = fit;
    } catch (const BudgetInfeasibleError&) {
      point.status = "budget-infeasible";
      point.theta_hat = point.std_error = std::numeric_limits<double>::quiet_NaN();
    } catch (const std::exception& ex) {
      point.status = ex.what();
      point.theta_hat = point.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    curve.push_back(std::move(point));
  }
  return curve;
}

}  // namespace perslab
