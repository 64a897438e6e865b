#include "perslab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "perslab/correlation.hpp"
#include "perslab/errors.hpp"
#include "perslab/quadrature.hpp"
#include "perslab/specialfn.hpp"

namespace perslab {

namespace {

// Tracks the largest value seen and where it occurred.
struct Worst {
  double value = -std::numeric_limits<double>::infinity();
  std::string where;

  void add(double v, double hurst, double arg, const char* arg_name) {
    if (v > value || std::isnan(v)) {
      value = std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
      std::ostringstream s;
      s.precision(6);
      s << "H=" << hurst << ' ' << arg_name << '=' << arg;
      where = s.str();
    }
  }
};

CheckResult make_check(std::string name, const Worst& worst, double tolerance) {
  return {std::move(name), worst.value, tolerance, worst.value <= tolerance, worst.where};
}

// Lags with x = e^{-tau} spread over (0, 1): geometric in tau from 1e-8
// to 40, plus a uniform grid in x.
std::vector<double> identity_lags() {
  std::vector<double> taus;
  for (double tau = 1e-8; tau <= 40.0; tau *= std::pow(10.0, 0.25)) taus.push_back(tau);
  for (int i = 1; i < 200; ++i) taus.push_back(-std::log(i / 200.0));
  std::sort(taus.begin(), taus.end());
  return taus;
}

std::vector<double> range(double start, double stop, double step) {
  std::vector<double> out;
  const auto n = static_cast<long>(std::llround((stop - start) / step));
  for (long i = 0; i <= n; ++i) out.push_back(start + step * static_cast<double>(i));
  return out;
}

const std::vector<double> kLowH{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45};
const std::vector<double> kHighH{0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};

}  // namespace

std::vector<CheckResult> run_identity_suite(const IdentityOptions& options) {
  if (options.hursts.empty()) throw DomainError("identity suite needs at least one H value");
  for (double h : options.hursts) {
    if (!(h > 0.0 && h <= 5.0)) throw DomainError("identity suite H values must lie in (0, 5]");
  }
  const double bump = options.rl_perturbation;
  const auto r = [bump](double h, double tau) { return r_rl(h, tau) + bump; };
  const auto taus = identity_lags();
  std::vector<CheckResult> out;

  {
    Worst series, rform, euler, complement, symmetry;
    for (double h : options.hursts) {
      for (double tau : taus) {
        const double x = std::exp(-tau);
        const double y = -std::expm1(-tau);
        const auto f = [&](double a, double b, double c) {
          return x > 0.95 ? hyp2f1_complement(a, b, c, y) : hyp2f1(a, b, c, x);
        };
        const double f_low = f(1.0, 0.5 - h, 1.5 + h);
        const double f_high = f(1.0, 1.5 - h, 1.5 + h);
        const double lhs = (1.0 - 2.0 * h) * y * f_high;
        series.add(std::abs(4.0 * h * f_low + lhs - (1.0 + 2.0 * h)), h, x, "x");
        rform.add(std::abs((1.0 + 2.0 * h) * std::exp(0.5 * tau) * r(h, tau) + lhs - (1.0 + 2.0 * h)), h, tau, "tau");
        const double euler_rhs = std::pow(y, 2.0 * h - 1.0) * f(0.5 + h, 2.0 * h, 1.5 + h);
        euler.add(std::abs(f_high - euler_rhs) / std::max(1.0, std::abs(f_high)), h, x, "x");
        complement.add(std::abs(r(h, tau) + r_rl_complement(h, tau) - std::exp(-0.5 * tau)), h, tau, "tau");
        const auto asym = [&](double a, double b, double c) {
          return x > 0.95 ? hyp2f1_complement(a, b, c, y) - hyp2f1_complement(b, a, c, y)
                          : hyp2f1(a, b, c, x) - hyp2f1(b, a, c, x);
        };
        symmetry.add(std::max({std::abs(asym(1.0, 0.5 - h, 1.5 + h)), std::abs(asym(0.5 + h, 2.0 * h, 1.5 + h)),
                               std::abs(asym(1.0, 1.5 - h, 1.5 + h))}),
                     h, x, "x");
      }
    }
    out.push_back(make_check("contiguous_2f1", series, 1e-10));
    out.push_back(make_check("contiguous_r", rform, 1e-10));
    out.push_back(make_check("euler_transform", euler, 1e-10));
    out.push_back(make_check("complement_sum", complement, 1e-10));
    out.push_back(make_check("hyp2f1_symmetry", symmetry, 1e-14));
  }

  {
    // |F(1 - 10^-k) - F(1)| must shrink with k when c - a - b > 0, until
    // it reaches rounding level.
    int violations = 0;
    std::string where;
    double final_gap = 0.0;
    for (double h : options.hursts) {
      const double a = 1.0, b = 0.5 - h, c = 1.5 + h;
      const double limit = hyp2f1(a, b, c, 1.0);
      double previous = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= 12; ++k) {
        const double gap = std::abs(hyp2f1_complement(a, b, c, std::pow(10.0, -k)) - limit);
        if (!(gap < previous) && gap > 1e-14 * std::abs(limit)) {
          ++violations;
          where = "H=" + std::to_string(h) + " k=" + std::to_string(k);
        }
        previous = gap;
        if (k == 12) final_gap = std::max(final_gap, gap);
      }
    }
    if (where.empty()) where = "largest gap at x = 1 - 1e-12: " + std::to_string(final_gap);
    out.push_back({"gauss_sum_approach", static_cast<double>(violations), 0.0, violations == 0, where});
  }

  {
    Worst norm, half;
    for (double h : options.hursts) {
      if (h < 1.0) norm.add(std::abs(rho_ifbm(h, 0.0) - 1.0), h, 0.0, "tau");
      norm.add(std::abs(r(h, 0.0) - 1.0), h, 0.0, "tau");
    }
    for (double tau : range(0.0, 30.0, 0.01)) half.add(std::abs(r(0.5, tau) - std::exp(-0.5 * tau)), 0.5, tau, "tau");
    out.push_back(make_check("normalization_at_zero", norm, 1e-12));
    out.push_back(make_check("r_half_is_exponential", half, 1e-12));
  }

  {
    const auto taus20 = range(0.0, 20.0, 0.01);
    Worst low, high, modulus, slepian, rho_mono, r_mono;
    for (double h : kLowH) {
      for (double tau : taus20) low.add(rho_ifbm(h, tau / h) - 1.5 * std::exp(-tau), h, tau, "tau");
      for (double eps : range(0.001, 1.0, 0.001)) modulus.add(1.0 - rho_ifbm(h, eps / h) - 2.5 * eps, h, eps, "eps");
    }
    for (double h : kHighH) {
      for (double tau : taus20) high.add(rho_ifbm(h, tau / (1.0 - h)) - 13.0 / 6.0 * std::exp(-tau), h, tau, "tau");
    }
    for (double h : {0.1, 0.2, 0.3, 0.4}) {
      for (double tau : range(0.0, 2.0, 0.001)) {
        slepian.add(std::max(0.0, 1.0 - std::pow(tau, h)) - r(h, tau), h, tau, "tau");
      }
    }
    for (double h : range(0.05, 0.95, 0.05)) {
      double previous = rho_ifbm(h, 0.0);
      for (std::size_t i = 1; i < taus20.size(); ++i) {
        const double v = rho_ifbm(h, taus20[i]);
        rho_mono.add(v - previous, h, taus20[i], "tau");
        previous = v;
      }
    }
    for (double h : kLowH) {
      double previous = r(h, 0.0);
      for (std::size_t i = 1; i < taus20.size(); ++i) {
        const double v = r(h, taus20[i]);
        r_mono.add(v - previous, h, taus20[i], "tau");
        previous = v;
      }
    }
    out.push_back(make_check("bound_rho_h_to_0", low, 0.0));
    out.push_back(make_check("bound_rho_h_to_1", high, 0.0));
    out.push_back(make_check("modulus_rho_h_to_0", modulus, 0.0));
    out.push_back(make_check("slepian_domination", slepian, 0.0));
    out.push_back(make_check("rho_nonincreasing", rho_mono, 0.0));
    // Strict decrease: the step must be negative.
    CheckResult strict = make_check("r_decreasing_h_below_half", r_mono, 0.0);
    strict.passed = r_mono.value < 0.0;
    out.push_back(strict);
  }

  {
    const std::vector<double> taus{0.5, 1.0, 2.0};
    const auto limit_check = [&](const char* name, LimitKind kind, const std::vector<double>& hs,
                                 const std::vector<double>& as) {
      const auto rows = limit_table(kind, hs, taus, as);
      Worst final_gap;
      for (std::size_t i = hs.size() - 1; i < rows.size(); i += hs.size()) {
        final_gap.add(rows[i].gap, rows[i].hurst, kind == LimitKind::RlToZero ? rows[i].a : rows[i].tau,
                      kind == LimitKind::RlToZero ? "a" : "tau");
      }
      CheckResult res = make_check(name, final_gap, 0.05);
      if (!gaps_decrease(rows, hs.size())) {
        res.passed = false;
        res.detail += " (gaps not monotone)";
      }
      out.push_back(res);
    };
    limit_check("limit_ifbm_h_to_0", LimitKind::IfbmToZero, {0.1, 0.05, 0.02, 0.01}, {1.0});
    limit_check("limit_ifbm_h_to_1", LimitKind::IfbmToOne, {0.9, 0.95, 0.98, 0.99}, {1.0});
    // The RL limit is only claimed at tau = 1.
    const auto rows = limit_table(LimitKind::RlToZero, {0.1, 0.05, 0.02}, {1.0}, {0.5, 1.0, 2.0});
    Worst final_gap;
    for (std::size_t i = 2; i < rows.size(); i += 3) final_gap.add(rows[i].gap, rows[i].hurst, rows[i].a, "a");
    CheckResult res = make_check("limit_rl_h_to_0", final_gap, 0.05);
    if (!gaps_decrease(rows, 3)) {
      res.passed = false;
      res.detail += " (gaps not monotone)";
    }
    out.push_back(res);
  }

  {
    const double h = 0.01;
    const double target = std::numbers::pi * std::numbers::pi * h;
    Worst rel;
    rel.add(std::abs(integral_r(h, 200.0) - target) / target, h, 200.0, "upper");
    out.push_back(make_check("integral_r_small_h", rel, 0.10));
  }
  return out;
}

std::vector<LimitRow> limit_table(LimitKind kind, const std::vector<double>& hursts, const std::vector<double>& taus,
                                  const std::vector<double>& as) {
  if (hursts.empty() || taus.empty()) throw DomainError("limit table needs nonempty H and tau lists");
  if (kind == LimitKind::RlToZero && as.empty()) throw DomainError("limit table needs a nonempty a list");
  for (double tau : taus) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("limit table lags must be finite and >= 0");
  }
  const std::vector<double> single{0.0};
  std::vector<LimitRow> rows;
  for (double a : kind == LimitKind::RlToZero ? as : single) {
    for (double tau : taus) {
      for (double h : hursts) {
        LimitRow row;
        row.hurst = h;
        row.tau = tau;
        switch (kind) {
          case LimitKind::IfbmToZero:
            row.value = corr_eval(CorrelationSpec::ifbm(h).rescaled(h), tau);
            row.limit = std::exp(-tau);
            break;
          case LimitKind::IfbmToOne:
            row.value = corr_eval(CorrelationSpec::ifbm(h).rescaled(1.0 - h), tau);
            row.limit = std::exp(-tau);
            break;
          case LimitKind::RlToZero: {
            if (!(a > 0.0)) throw DomainError("limit table: a must be positive");
            row.a = a;
            row.value = corr_eval(CorrelationSpec::rl(h).rescaled(std::exp(a / (2.0 * h))), tau);
            row.limit = -std::expm1(-a);
            break;
          }
        }
        row.gap = std::abs(row.value - row.limit);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

bool gaps_decrease(const std::vector<LimitRow>& rows, std::size_t n_hursts) {
  if (n_hursts == 0 || rows.size() % n_hursts != 0) return false;
  for (std::size_t start = 0; start < rows.size(); start += n_hursts) {
    for (std::size_t i = start + 1; i < start + n_hursts; ++i) {
      if (!(rows[i].gap < rows[i - 1].gap)) return false;
    }
  }
  return true;
}

double drift_phi(double hurst, double eta, double c, double t) {
  if (t <= 0.5) return 0.0;
  const auto weight = [eta](double s) { return std::pow(s, -eta); };
  return c * integrate_power_weight(weight, hurst - 0.5, 0.5, t, 1e-11 * std::max(1.0, t));
}

bool DriftReport::passed() const { return std::abs(phi_at_one - 1.0) <= 1e-8 && nondecreasing && at_least_one; }

DriftReport drift_check(double hurst, double eta, double t_max, int points) {
  if (!(hurst > 0.0 && hurst <= 0.5)) throw DomainError("drift check: H must lie in (0, 1/2]");
  if (!(eta > 0.5 && eta < 0.5 + hurst)) throw DomainError("drift check: eta must lie in (1/2, 1/2 + H)");
  if (!(t_max >= 1.0) || !std::isfinite(t_max)) throw DomainError("drift check: t_max must be >= 1");
  if (points < 2) throw DomainError("drift check: need at least 2 grid points");
  DriftReport rep;
  rep.hurst = hurst;
  rep.eta = eta;
  rep.c = 1.0 / drift_phi(hurst, eta, 1.0, 1.0);
  const double ratio = std::log(2.0 * t_max);
  for (int i = 0; i < points; ++i) rep.t.push_back(0.5 * std::exp(ratio * i / (points - 1)));
  rep.t.back() = t_max;
  rep.t.push_back(1.0);
  std::sort(rep.t.begin(), rep.t.end());
  rep.t.erase(std::unique(rep.t.begin(), rep.t.end()), rep.t.end());
  for (double t : rep.t) rep.phi.push_back(drift_phi(hurst, eta, rep.c, t));
  rep.phi_at_one = drift_phi(hurst, eta, rep.c, 1.0);
  rep.nondecreasing = true;
  rep.at_least_one = true;
  for (std::size_t i = 0; i < rep.t.size(); ++i) {
    if (i > 0 && rep.phi[i] < rep.phi[i - 1]) rep.nondecreasing = false;
    if (rep.t[i] >= 1.0 && rep.phi[i] < 1.0 - 1e-12) rep.at_least_one = false;
  }
  return rep;
}

}  // namespace perslab
