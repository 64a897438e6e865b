#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "perslab/errors.hpp"
#include "perslab/persistence.hpp"

using namespace perslab;

namespace {

PersistenceEstimate synthetic(double horizon, double log_p, double ci) {
  PersistenceEstimate e;
  e.horizon = horizon;
  e.log_p = log_p;
  e.p_hat = std::exp(log_p);
  e.ci_log = ci;
  return e;
}

double binomial_se(double p, std::int64_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace

TEST_CASE("make_estimate") {
  const auto e = make_estimate(3.0, 1000, 100);
  CHECK(e.p_hat == doctest::Approx(0.1));
  CHECK(e.log_p == doctest::Approx(std::log(0.1)));
  REQUIRE(e.ci_log.has_value());
  CHECK(*e.ci_log == doctest::Approx(1.96 * std::sqrt(0.9 / 100.0)));
  CHECK_FALSE(make_estimate(3.0, 1000, 9).ci_log.has_value());
  CHECK(make_estimate(3.0, 1000, 10).ci_log.has_value());
  CHECK(std::isinf(make_estimate(3.0, 1000, 0).log_p));
  CHECK_THROWS_AS(make_estimate(3.0, 0, 0), DomainError);
  CHECK_THROWS_AS(make_estimate(3.0, 10, 11), DomainError);
}

TEST_CASE("persistence probability against orthant probabilities") {
  const auto spec = CorrelationSpec::ou();
  const std::int64_t n = 200000;

  // One node: P(X < 0) = 1/2.
  const auto one = persistence_probability(spec, 0.0, 0.1, n, 1);
  CHECK(one.step == 0.0);
  CHECK(std::abs(one.p_hat - 0.5) < 4.0 * binomial_se(0.5, n));

  // Two nodes: 1/4 + asin(rho) / (2 pi).
  const double rho = std::exp(-0.3);
  const double two_exact = 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
  const auto two = persistence_probability(spec, 0.3, 0.3, n, 2);
  CHECK(std::abs(two.p_hat - two_exact) < 4.0 * binomial_se(two_exact, n));

  // Three nodes: 1/8 + (asin r12 + asin r13 + asin r23) / (4 pi).
  const double r1 = std::exp(-0.5), r2 = std::exp(-1.0);
  const double three_exact = 0.125 + (2.0 * std::asin(r1) + std::asin(r2)) / (4.0 * std::numbers::pi);
  const auto three = persistence_probability(spec, 1.0, 0.5, n, 3);
  CHECK(std::abs(three.p_hat - three_exact) < 4.0 * binomial_se(three_exact, n));
  CHECK(three.report.method == "circulant");
  CHECK(three.seed == 3);
}

TEST_CASE("persistence probability is reproducible and worker-independent") {
  const auto spec = CorrelationSpec::ifbm(0.4);
  const auto a = persistence_probability(spec, 2.0, 0.01, 5001, 77, 1);
  const auto b = persistence_probability(spec, 2.0, 0.01, 5001, 77, 3);
  CHECK(a.n_survive == b.n_survive);
  CHECK(persistence_probability(spec, 2.0, 0.01, 5001, 78, 1).n_survive != a.n_survive);
}

TEST_CASE("persistence probability preconditions") {
  const auto spec = CorrelationSpec::ou();
  CHECK_THROWS_AS(persistence_probability(spec, 1000.0, 0.005, 10, 1), GridTooLargeError);
  CHECK_NOTHROW(persistence_probability(spec, 499.99, 0.005, 2, 1));
  CHECK_THROWS_AS(persistence_probability(spec, -1.0, 0.005, 10, 1), DomainError);
  CHECK_THROWS_AS(persistence_probability(spec, 1.0, 0.0, 10, 1), DomainError);
  CHECK_THROWS_AS(persistence_probability(spec, 1.0, 0.1, 0, 1), DomainError);
}

TEST_CASE("fit_exponent recovers an exact line") {
  std::vector<PersistenceEstimate> es;
  for (double t : {1.0, 2.0, 4.0, 6.0, 8.0, 9.0}) es.push_back(synthetic(t, -0.7 - 0.25 * t, 0.05 + 0.01 * t));
  const auto fit = fit_exponent(es, 2.0, 8.0);
  CHECK(fit.theta_hat == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(fit.stderr_resid == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.points.size() == 4);
  CHECK(fit.std_error() == fit.stderr_sampling);

  // Sampling error from the weights alone: 1.96 / sqrt(Sxx).
  double sw = 0.0, swx = 0.0;
  for (const auto& e : fit.points) {
    const double w = 1.0 / (*e.ci_log * *e.ci_log);
    sw += w;
    swx += w * e.horizon;
  }
  double sxx = 0.0;
  for (const auto& e : fit.points) sxx += (e.horizon - swx / sw) * (e.horizon - swx / sw) / (*e.ci_log * *e.ci_log);
  CHECK(fit.stderr_sampling == doctest::Approx(1.96 / std::sqrt(sxx)));
}

TEST_CASE("fit_exponent weights and skips") {
  // A noisy point with a huge interval barely moves the slope.
  std::vector<PersistenceEstimate> es{synthetic(2.0, -1.0, 0.01), synthetic(4.0, -2.0, 0.01),
                                      synthetic(6.0, -3.0, 0.01), synthetic(8.0, 0.0, 100.0)};
  CHECK(fit_exponent(es, 2.0, 8.0).theta_hat == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fit_exponent(es, 2.0, 8.0).stderr_resid > 0.0);

  auto missing = es;
  missing[3].ci_log.reset();
  CHECK(fit_exponent(missing, 2.0, 8.0).theta_hat == doctest::Approx(0.5).epsilon(1e-12));
  missing[2].ci_log.reset();
  CHECK_THROWS_AS(fit_exponent(missing, 2.0, 8.0), InsufficientDataError);
  CHECK_THROWS_AS(fit_exponent(es, 5.0, 8.0), InsufficientDataError);
  CHECK_THROWS_AS(fit_exponent(es, 8.0, 2.0), DomainError);
}

TEST_CASE("estimation plan horizons") {
  EstimationPlan plan;
  const auto h = plan.horizons();
  REQUIRE(h.size() == 4);
  CHECK(h[0] == 2.0);
  CHECK(h[1] == doctest::Approx(4.0));
  CHECK(h[3] == 8.0);
  plan.t_points = 2;
  CHECK_THROWS_AS(plan.horizons(), DomainError);
}

TEST_CASE("OU exponent at a small budget") {
  EstimationPlan plan;
  plan.step = 0.02;
  plan.t_min = 1.0;
  plan.t_max = 4.0;
  plan.trials = 40000;
  plan.seed = 5;
  const auto fit = estimate_exponent(CorrelationSpec::ou(), plan);
  CHECK(fit.theta_hat > 0.75);
  CHECK(fit.theta_hat < 1.1);
  CHECK(fit.points.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(fit.points[i].seed == derive_seed(5, i));

  // The rescaled process has exponent theta / gamma. Stretching the grid
  // and window by gamma too makes both runs see the same sampled sequence.
  EstimationPlan slow = plan;
  slow.step = 0.04;
  slow.t_min = 2.0;
  slow.t_max = 8.0;
  const auto scaled = rescaled_exponent(CorrelationSpec::ou(), 2.0, slow);
  CHECK(scaled.theta_hat == doctest::Approx(fit.theta_hat / 2.0).epsilon(1e-9));
}

TEST_CASE("budget infeasible") {
  EstimationPlan plan;
  plan.step = 0.05;
  plan.trials = 200;
  CHECK_THROWS_AS(estimate_exponent(CorrelationSpec::ou(), plan), BudgetInfeasibleError);
}

TEST_CASE("subadditivity") {
  const auto r = subadditivity_check(CorrelationSpec::ifbm(0.5), 1.0, 2.0, 0.02, 40000, 9);
  CHECK(r.applicable);
  CHECK(r.holds);
  CHECK(r.product == doctest::Approx(r.first.p_hat * r.second.p_hat));
  CHECK(r.joint.horizon == 3.0);
  CHECK(r.std_error > 0.0);
  CHECK_FALSE(subadditivity_check(CorrelationSpec::fbm(0.5), 0.5, 0.5, 0.05, 1000, 9).applicable);
}

TEST_CASE("families and curves") {
  CHECK(family_from_string("ifbm") == Family::Ifbm);
  CHECK(family_from_string("RL") == Family::Rl);
  CHECK_THROWS_AS(family_from_string("OU"), DomainError);
  CHECK(to_string(Family::Fbm) == "FBM");
  CHECK(family_spec(Family::Rl, 2.0).kind() == CorrelationKind::RlLamperti);

  EstimationPlan plan;
  plan.step = 0.05;
  plan.t_min = 1.0;
  plan.t_max = 3.0;
  plan.trials = 3000;
  const auto curve = exponent_curve(Family::Ifbm, {0.5, 0.99999}, plan);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].status == "ok");
  CHECK(curve[0].fit.has_value());
  CHECK(*curve[0].conjecture == doctest::Approx(0.25));
  CHECK(*curve[0].lower_bound == doctest::Approx(0.25));
  CHECK(*curve[0].upper_bound == doctest::Approx(0.5));
  CHECK(curve[1].status == "ok");

  const auto bad = exponent_curve(Family::Ifbm, {1.5}, plan);
  CHECK(bad[0].status != "ok");
  CHECK(std::isnan(bad[0].theta_hat));

  plan.trials = 20;
  const auto starved = exponent_curve(Family::Rl, {0.5}, plan);
  CHECK(starved[0].status == "budget-infeasible");
  CHECK_FALSE(starved[0].conjecture.has_value());
}
