// Acceptance gate: criteria 1-11 at their stated tolerances, one PASS/FAIL
// line each. Arguments select a subset, e.g. `acceptance 1 2 10`. The
// lines are also written to acceptance_report.txt in the working directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "perslab/correlation.hpp"
#include "perslab/experiments.hpp"
#include "perslab/persistence.hpp"
#include "perslab/sampler.hpp"

using namespace perslab;

namespace {

struct Outcome {
  bool passed = false;
  std::string summary;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<double> kHursts{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55,
                                  0.6,  0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.5, 2.5};

// Monte Carlo budget of criteria 6-8.
EstimationPlan mc_plan(std::uint64_t seed) {
  EstimationPlan plan;
  plan.step = 0.005;
  plan.t_min = 2.0;
  plan.t_max = 8.0;
  plan.t_points = 4;
  plan.trials = 1000000;
  plan.seed = seed;
  plan.workers = 0;
  return plan;
}

ExponentFit logged_fit(const char* label, const CorrelationSpec& spec, const EstimationPlan& plan) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fit = estimate_exponent(spec, plan);
  std::printf("    %-22s theta_hat %.4f  stderr %.4f  survivors", label, fit.theta_hat, fit.std_error());
  for (const auto& e : fit.points) std::printf(" %lld", static_cast<long long>(e.n_survive));
  std::printf("  (%.0f s)\n", seconds_since(t0));
  std::fflush(stdout);
  return fit;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  IdentityOptions opts;
  opts.hursts = kHursts;
  const auto checks = run_identity_suite(opts);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  int found = 0;
  for (const auto& c : checks) {
    if (c.name == "contiguous_2f1" || c.name == "contiguous_r" || c.name == "euler_transform" ||
        c.name == "complement_sum") {
      worst = std::max(worst, c.residual);
      ++found;
    }
  }
  return {found == 4 && worst <= 1e-10 && elapsed < 10.0,
          fmt("max residual %.2e (<= 1e-10) over %zu H values, %.2f s (< 10 s)", worst, kHursts.size(), elapsed)};
}

Outcome criterion2() {
  double worst = 0.0;
  for (double h : kHursts) {
    worst = std::max(worst, std::abs(r_rl(h, 0.0) - 1.0));
    if (h < 1.0) worst = std::max(worst, std::abs(rho_ifbm(h, 0.0) - 1.0));
  }
  double worst_half = 0.0;
  for (int i = 0; i <= 3000; ++i) {
    const double tau = 0.01 * i;
    worst_half = std::max(worst_half, std::abs(r_rl(0.5, tau) - std::exp(-0.5 * tau)));
  }
  return {worst <= 1e-12 && worst_half <= 1e-12,
          fmt("|A(0) - 1| max %.1e, |r_1/2 - e^{-tau/2}| max %.1e on [0, 30] (<= 1e-12)", worst, worst_half)};
}

Outcome criterion3() {
  int violations = 0;
  int evaluated = 0;
  for (double h = 0.05; h < 0.46; h += 0.05) {
    for (int i = 0; i <= 2000; ++i) {
      const double tau = 0.01 * i;
      ++evaluated;
      if (rho_ifbm(h, tau / h) > 1.5 * std::exp(-tau)) ++violations;
    }
  }
  for (double h = 0.55; h < 0.96; h += 0.05) {
    for (int i = 0; i <= 2000; ++i) {
      const double tau = 0.01 * i;
      ++evaluated;
      if (rho_ifbm(h, tau / (1.0 - h)) > 13.0 / 6.0 * std::exp(-tau)) ++violations;
    }
  }
  for (double h : {0.1, 0.2, 0.3, 0.4}) {
    for (int i = 0; i <= 2000; ++i) {
      const double tau = 0.001 * i;
      ++evaluated;
      if (r_rl(h, tau) < std::max(0.0, 1.0 - std::pow(tau, h))) ++violations;
    }
  }
  return {violations == 0, fmt("%d violations in %d evaluations", violations, evaluated)};
}

Outcome criterion4() {
  const std::vector<double> taus{0.5, 1.0, 2.0};
  const std::vector<double> down{0.1, 0.05, 0.02, 0.01};
  const std::vector<double> up{0.9, 0.95, 0.98, 0.99};
  bool ok = true;
  std::ostringstream s;
  const auto final_gap = [](const std::vector<LimitRow>& rows, std::size_t n) {
    double g = 0.0;
    for (std::size_t i = n - 1; i < rows.size(); i += n) g = std::max(g, rows[i].gap);
    return g;
  };
  const auto a = limit_table(LimitKind::IfbmToZero, down, taus);
  const auto b = limit_table(LimitKind::IfbmToOne, up, taus);
  const auto c = limit_table(LimitKind::RlToZero, {0.1, 0.05, 0.02}, {1.0}, {0.5, 1.0, 2.0});
  const double ga = final_gap(a, 4), gb = final_gap(b, 4), gc = final_gap(c, 3);
  const bool ma = gaps_decrease(a, 4), mb = gaps_decrease(b, 4), mc = gaps_decrease(c, 3);
  ok = ma && mb && mc && ga <= 0.05 && gb <= 0.05 && gc <= 0.05;
  s << fmt("IFBM H->0 gap %.4f %s, H->1 gap %.4f %s, RL a in {0.5,1,2} at H=0.02 gap %.4f %s (<= 0.05)", ga,
           ma ? "monotone" : "NOT monotone", gb, mb ? "monotone" : "NOT monotone", gc,
           mc ? "monotone" : "NOT monotone");
  return {ok, s.str()};
}

Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 0.01;
  const double target = std::numbers::pi * std::numbers::pi * h;
  const double value = integral_r(h, 200.0);
  const double rel = std::abs(value - target) / target;
  const double elapsed = seconds_since(t0);
  return {rel <= 0.10 && elapsed < 60.0,
          fmt("integral %.6f vs pi^2 H = %.6f, relative gap %.4f (<= 0.10), %.2f s", value, target, rel, elapsed)};
}

Outcome criterion6() {
  struct Job {
    const char* label;
    CorrelationSpec spec;
    double lo, hi;
  };
  const std::vector<Job> jobs{{"OU", CorrelationSpec::ou(), 0.90, 1.05},
                              {"RL H=0.5", CorrelationSpec::rl(0.5), 0.44, 0.52},
                              {"IFBM H=0.5", CorrelationSpec::ifbm(0.5), 0.20, 0.27},
                              {"COSH_LIMIT", CorrelationSpec::cosh_limit(), 0.14, 0.22}};
  bool ok = true;
  std::string s;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto fit = logged_fit(jobs[i].label, jobs[i].spec, mc_plan(derive_seed(6, i)));
    const bool in = fit.theta_hat >= jobs[i].lo && fit.theta_hat <= jobs[i].hi;
    ok = ok && in;
    s += fmt("%s%s %.4f in [%.2f, %.2f]%s", i ? "; " : "", jobs[i].label, fit.theta_hat, jobs[i].lo, jobs[i].hi,
             in ? "" : " NO");
  }
  return {ok, s};
}

Outcome criterion7() {
  bool ok = true;
  std::string s;
  const auto run_branch = [&](const std::vector<double>& hs, bool to_zero, std::uint64_t seed) {
    std::vector<double> theta;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const double gamma = to_zero ? hs[i] : 1.0 - hs[i];
      const auto label = fmt("IFBM H=%.1f gamma=%.1f", hs[i], gamma);
      const auto fit = logged_fit(label.c_str(), CorrelationSpec::ifbm(hs[i]).rescaled(gamma),
                                  mc_plan(derive_seed(seed, i)));
      theta.push_back(fit.theta_hat);
    }
    const bool increasing = theta[0] < theta[1] && theta[1] < theta[2];
    const bool high = theta[2] > 0.7;
    ok = ok && increasing && high;
    s += fmt("%s%.4f < %.4f < %.4f%s, last %s 0.7", s.empty() ? "" : "; ", theta[0], theta[1], theta[2],
             increasing ? "" : " (NOT increasing)", high ? ">" : "<=");
  };
  run_branch({0.3, 0.2, 0.1}, true, 70);
  run_branch({0.7, 0.8, 0.9}, false, 71);
  return {ok, s};
}

Outcome criterion8() {
  const std::vector<double> hs{0.4, 0.6, 1.0, 2.0};
  std::vector<ExponentFit> fits;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const auto label = fmt("RL H=%.1f", hs[i]);
    fits.push_back(logged_fit(label.c_str(), CorrelationSpec::rl(hs[i]), mc_plan(derive_seed(8, i))));
  }
  bool ok = true;
  std::string s;
  for (std::size_t i = 0; i + 1 < fits.size(); ++i) {
    const double slack = 2.0 * std::hypot(fits[i].std_error(), fits[i + 1].std_error());
    const bool step_ok = fits[i + 1].theta_hat <= fits[i].theta_hat + slack;
    ok = ok && step_ok;
    s += fmt("%s%.4f", i ? " >= " : "", fits[i].theta_hat);
    if (!step_ok) s += " (violated)";
  }
  s += fmt(" >= %.4f", fits.back().theta_hat);
  const bool strict = fits.front().theta_hat > fits.back().theta_hat;
  ok = ok && strict;
  s += strict ? "; theta(0.4) > theta(2.0)" : "; theta(0.4) <= theta(2.0)";
  return {ok, s};
}

// Correlations between column 0 and the given columns, with standard errors.
struct EmpiricalCheck {
  double worst_excess = -1.0;  // max of |emp - exact| - (3 se + 1e-2)
  void add(const std::vector<std::vector<double>>& paths, std::size_t k, double exact) {
    double s00 = 0.0, skk = 0.0, s0k = 0.0;
    for (const auto& p : paths) {
      s00 += p[0] * p[0];
      skk += p[k] * p[k];
      s0k += p[0] * p[k];
    }
    const double r = s0k / std::sqrt(s00 * skk);
    const double se = (1.0 - r * r) / std::sqrt(static_cast<double>(paths.size()));
    worst_excess = std::max(worst_excess, std::abs(r - exact) - (3.0 * se + 1e-2));
  }
};

Outcome criterion9() {
  constexpr std::int64_t kPaths = 20000;
  const GridSpec tau(2.0, 21);
  const std::vector<std::size_t> lags{1, 5, 10, 20};
  EmpiricalCheck ifbm, rl;
  for (double h : {0.25, 0.5, 0.75}) {
    const auto batch = sample_ifbm_lamperti(h, tau, kPaths, derive_seed(9, static_cast<std::uint64_t>(h * 100)), 0);
    for (auto k : lags) ifbm.add(batch.paths, k, rho_ifbm(h, tau.at(static_cast<std::int64_t>(k))));
  }
  const GridSpec t_grid = GridSpec::from_step(std::exp(2.0), 0.002);
  for (double h : {0.25, 0.5, 1.5}) {
    const auto batch = sample_rl(h, t_grid, kPaths, derive_seed(90, static_cast<std::uint64_t>(h * 100)), 0);
    const auto z = lamperti_batch(batch, h, std::sqrt(2.0 * h), tau);
    for (auto k : lags) rl.add(z.paths, k, r_rl(h, tau.at(static_cast<std::int64_t>(k))));
  }
  // RL at H = 3/2 against integrated Brownian motion under shared noise:
  // left-point Riemann sums of the Brownian path on the same grid.
  double pathwise = 0.0;
  const double dt = 0.001;
  for (std::uint64_t p = 0; p < 200; ++p) {
    NormalStream stream(derive_seed(99, 0), p);
    std::vector<double> inc(10000);
    stream.fill(inc, std::sqrt(dt));
    const auto r = rl_from_increments(1.5, dt, inc);
    double b = 0.0, integral = 0.0;
    for (std::size_t j = 0; j < inc.size(); ++j) {
      integral += b * dt;
      b += inc[j];
      pathwise = std::max(pathwise, std::abs(r[j + 1] - integral));
    }
  }
  const bool ok = ifbm.worst_excess <= 0.0 && rl.worst_excess <= 0.0 && pathwise <= 1e-2;
  return {ok, fmt("worst |emp - exact| minus (3 se + 1e-2): IFBM %.4f, RL %.4f (<= 0); RL 3/2 vs integrated BM "
                  "max gap %.2e (<= 1e-2)",
                  ifbm.worst_excess, rl.worst_excess, pathwise)};
}

Outcome criterion10() {
  bool ok = true;
  std::string s;
  for (auto [h, eta] : {std::pair{0.1, 0.55}, std::pair{0.3, 0.7}}) {
    const auto r = drift_check(h, eta, 100.0);
    double min_after_one = 1e300;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      if (r.t[i] >= 1.0) min_after_one = std::min(min_after_one, r.phi[i]);
    }
    const bool pass = std::abs(r.phi_at_one - 1.0) <= 1e-8 && r.nondecreasing && min_after_one >= 1.0;
    ok = ok && pass;
    s += fmt("%s(H=%.1f, eta=%.2f) phi(1)-1 = %.1e, %s, min phi on [1,100] = %.6f", s.empty() ? "" : "; ", h, eta,
             r.phi_at_one - 1.0, r.nondecreasing ? "nondecreasing" : "NOT nondecreasing", min_after_one);
  }
  return {ok, s};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion11() {
  std::ostringstream sink;
  bool ok = true;
  std::string s;
  const std::vector<std::vector<std::string>> commands{
      {"estimate", "--corr", "ifbm", "--h", "0.5", "--grid-step", "0.01", "--trials", "20000", "--seed", "11",
       "--t-min", "1", "--t-max", "4"},
      {"estimate", "--corr", "rl", "--h", "0.7", "--horizon", "0.5,1,2", "--trials", "20000", "--seed", "12",
       "--format", "json"},
      {"sample", "--corr", "ou", "--paths", "2", "--seed", "7"},
  };
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      const std::string path = fmt("acceptance_c11_%zu_%d.out", i, rep);
      auto args = commands[i];
      args.insert(args.end(), {"--out", path});
      if (cli::run(args, sink, sink) != cli::kOk) {
        ok = false;
        continue;
      }
      const auto text = read_file(path);
      if (rep == 0) first = text;
      else if (text != first || text.empty()) ok = false;
    }
  }
  s = fmt("%zu commands run twice, outputs %s", commands.size(), ok ? "byte-identical" : "DIFFER");
  return {ok, s};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},  {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [k, _] : criteria) selected.insert(k);
  }
  int failures = 0;
  std::ofstream report("acceptance_report.txt");
  for (int k : selected) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    if (!o.passed) ++failures;
    const auto line = fmt("criterion %2d: %s  %s  [%.1f s]", k, o.passed ? "PASS" : "FAIL", o.summary.c_str(),
                          seconds_since(t0));
    std::printf("%s\n", line.c_str());
    report << line << '\n' << std::flush;
    std::fflush(stdout);
  }
  const auto total = fmt("%zu criteria, %d failed", selected.size(), failures);
  std::printf("%s\n", total.c_str());
  report << total << '\n';
  return failures == 0 ? 0 : 1;
}
