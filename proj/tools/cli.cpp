#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "perslab/correlation.hpp"
#include "perslab/errors.hpp"
#include "perslab/experiments.hpp"
#include "perslab/persistence.hpp"
#include "perslab/sampler.hpp"

namespace perslab::cli {

namespace {

// Bad flag values found after CLI11 parsing; reported with exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Tabular output

using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // Shortest text that parses back to the same double.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_cell(const Cell& c) {
  struct {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + '"';
    }
  } visit;
  return std::visit(visit, c);
}

nlohmann::ordered_json json_cell(const Cell& c) {
  struct {
    nlohmann::ordered_json operator()(std::monostate) const { return nullptr; }
    nlohmann::ordered_json operator()(double v) const {
      if (!std::isfinite(v)) return nullptr;
      return v;
    }
    nlohmann::ordered_json operator()(std::int64_t v) const { return v; }
    nlohmann::ordered_json operator()(const std::string& s) const { return s; }
  } visit;
  return std::visit(visit, c);
}

struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void note(const std::string& key, const std::string& value) { meta.emplace_back(key, value); }
  void note(const std::string& key, double value) { meta.emplace_back(key, format_double(value)); }
  void note(const std::string& key, std::int64_t value) { meta.emplace_back(key, std::to_string(value)); }
  void note(const std::string& key, std::uint64_t value) { meta.emplace_back(key, std::to_string(value)); }
  void note(const std::string& key, int value) { meta.emplace_back(key, std::to_string(value)); }
  void note(const std::string& key, bool value) { meta.emplace_back(key, value ? "true" : "false"); }
  void note(const std::string& key, const char* value) { meta.emplace_back(key, value); }

  void write_csv(std::ostream& os) const {
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
      os << '\n';
    }
  }

  void write_json(std::ostream& os) const {
    nlohmann::ordered_json doc;
    doc["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : meta) doc["metadata"][k] = v;
    doc["records"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
      nlohmann::ordered_json rec = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < row.size(); ++i) rec[columns[i]] = json_cell(row[i]);
      doc["records"].push_back(std::move(rec));
    }
    os << doc.dump(2) << '\n';
  }
};

struct OutputOptions {
  std::string format = "csv";
  std::string path;
};

void add_output_flags(CLI::App* cmd, OutputOptions& o) {
  cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", o.path, "Write to this file instead of stdout");
}

void emit(const Table& t, const OutputOptions& o, std::ostream& out) {
  std::ofstream file;
  std::ostream* os = &out;
  if (!o.path.empty()) {
    file.open(o.path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open output file " + o.path);
    os = &file;
  }
  if (o.format == "json") {
    t.write_json(*os);
  } else {
    t.write_csv(*os);
  }
  os->flush();
  if (!*os) throw std::runtime_error("write failed" + (o.path.empty() ? std::string() : ": " + o.path));
}

// ---------------------------------------------------------------------------
// Flag parsing helpers

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": not a number: " + item);
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
  return s;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::toupper(ch); });
  return s;
}

/// Correlation families by CLI name.
CorrelationSpec make_spec(const std::string& kind, std::optional<double> hurst, double rate, double time_scale) {
  const std::string k = upper(kind);
  const auto need_h = [&]() {
    if (!hurst) throw UsageError("--h is required for " + kind);
    return *hurst;
  };
  CorrelationSpec spec = CorrelationSpec::ou(rate);
  if (k == "OU") {
    spec = CorrelationSpec::ou(rate);
  } else if (k == "COSH") {
    spec = CorrelationSpec::cosh_limit();
  } else if (k == "IFBM") {
    spec = CorrelationSpec::ifbm(need_h());
  } else if (k == "RL") {
    spec = CorrelationSpec::rl(need_h());
  } else if (k == "FBM") {
    spec = CorrelationSpec::fbm(need_h());
  } else if (k == "SLEPIAN") {
    spec = CorrelationSpec::slepian(need_h());
  } else {
    throw UsageError("unknown correlation kind: " + kind + " (expected ou, cosh, ifbm, rl, fbm, slepian)");
  }
  return spec.rescaled(time_scale);
}

void note_report(Table& t, const SamplingReport& r, const std::string& prefix = "") {
  t.note(prefix + "method", r.method);
  if (!r.extension.empty()) t.note(prefix + "extension", r.extension);
  if (r.embedding_size > 0) t.note(prefix + "embedding_size", r.embedding_size);
  t.note(prefix + "clipped_mass", r.clipped_mass);
  if (r.method == "cholesky") t.note(prefix + "jitter", r.jitter);
  if (r.discretization_error > 0.0) t.note(prefix + "discretization_error", r.discretization_error);
  for (std::size_t i = 0; i < r.warnings.size(); ++i) t.note(prefix + "warning." + std::to_string(i), r.warnings[i]);
}

void note_plan(Table& t, const EstimationPlan& p) {
  t.note("grid_step", p.step);
  t.note("window", format_double(p.t_min) + ":" + format_double(p.t_max));
  t.note("horizons", p.t_points);
  t.note("trials", p.trials);
  t.note("seed", p.seed);
}

struct PlanFlags {
  double step = 0.005;
  double t_min = 2.0;
  double t_max = 8.0;
  int t_points = 4;
  std::int64_t trials = 1000000;
  std::uint64_t seed = 1;
  int workers = 0;
};

void add_plan_flags(CLI::App* cmd, PlanFlags& f) {
  cmd->add_option("--grid-step", f.step, "Grid spacing Delta")->capture_default_str();
  cmd->add_option("--t-min", f.t_min, "Start of the fit window")->capture_default_str();
  cmd->add_option("--t-max", f.t_max, "End of the fit window")->capture_default_str();
  cmd->add_option("--t-points", f.t_points, "Number of horizons in the window")->capture_default_str();
  cmd->add_option("--trials", f.trials, "Paths per horizon")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Master seed")->capture_default_str();
  cmd->add_option("--workers", f.workers, "Worker threads (0: one per core)")->capture_default_str();
}

EstimationPlan to_plan(const PlanFlags& f) {
  EstimationPlan p;
  p.step = f.step;
  p.t_min = f.t_min;
  p.t_max = f.t_max;
  p.t_points = f.t_points;
  p.trials = f.trials;
  p.seed = f.seed;
  p.workers = f.workers;
  if (!(p.step > 0.0)) throw UsageError("--grid-step must be positive");
  if (p.trials <= 0) throw UsageError("--trials must be positive");
  if (p.workers < 0) throw UsageError("--workers must be >= 0");
  p.horizons();  // validates the window
  if (p.t_max / p.step + 1.0 > 1e5) throw GridTooLargeError("horizon / grid step exceeds 1e5 points");
  return p;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_verify(const std::optional<std::string>& h_list, std::optional<double> perturb, const OutputOptions& o, std::ostream& out,
               std::ostream& err) {
  IdentityOptions opts;
  if (h_list) opts.hursts = parse_list(*h_list, "--h");
  if (perturb) opts.rl_perturbation = *perturb;
  const auto checks = run_identity_suite(opts);

  Table t;
  t.note("command", "verify");
  t.note("hursts", join(opts.hursts));
  t.note("rl_perturbation", opts.rl_perturbation);
  t.columns = {"check", "residual", "tolerance", "status", "detail"};
  bool ok = true;
  for (const auto& c : checks) {
    t.rows.push_back({c.name, c.residual, c.tolerance, std::string(c.passed ? "pass" : "FAIL"), c.detail});
    if (!c.passed) {
      ok = false;
      err << "check failed: " << c.name << " (residual " << format_double(c.residual) << ", tolerance "
          << format_double(c.tolerance) << ")\n";
    }
  }
  t.note("all_passed", ok);
  emit(t, o, out);
  return ok ? kOk : kCheckFailed;
}

int cmd_corr_eval(const std::string& kind, std::optional<double> hurst, double rate, double time_scale,
                  const std::string& taus_text, const OutputOptions& o, std::ostream& out) {
  const auto taus = parse_list(taus_text, "--tau");
  const auto spec = make_spec(kind, hurst, rate, time_scale);
  for (double tau : taus) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw UsageError("--tau values must be finite and >= 0");
  }
  Table t;
  t.note("command", "corr-eval");
  t.note("spec", spec.describe());
  t.columns = {"tau", "value"};
  for (double tau : taus) t.rows.push_back({tau, corr_eval(spec, tau)});
  emit(t, o, out);
  return kOk;
}

int cmd_corr_limit(const std::string& family, const std::string& direction, const std::string& h_text,
                   const std::string& tau_text, const std::string& a_text, const OutputOptions& o,
                   std::ostream& out) {
  const std::string fam = upper(family);
  const std::string dir = upper(direction);
  const bool to_zero = dir == "0" || dir == "H->0" || dir == "ZERO";
  const bool to_one = dir == "1" || dir == "H->1" || dir == "ONE";
  if (!to_zero && !to_one) throw UsageError("--direction must be 0 or 1");
  LimitKind kind;
  if (fam == "IFBM") {
    kind = to_zero ? LimitKind::IfbmToZero : LimitKind::IfbmToOne;
  } else if (fam == "RL") {
    if (!to_zero) throw UsageError("the RL limit is only available for H -> 0");
    kind = LimitKind::RlToZero;
  } else {
    throw UsageError("--family must be IFBM or RL");
  }
  std::vector<double> hs;
  if (h_text.empty()) {
    hs = to_zero ? std::vector<double>{0.1, 0.05, 0.02, 0.01} : std::vector<double>{0.9, 0.95, 0.98, 0.99};
  } else {
    hs = parse_list(h_text, "--h");
  }
  const auto taus = tau_text.empty() ? std::vector<double>{0.5, 1.0, 2.0} : parse_list(tau_text, "--tau");
  const auto as = kind == LimitKind::RlToZero
                      ? (a_text.empty() ? std::vector<double>{0.5, 1.0, 2.0} : parse_list(a_text, "--a"))
                      : std::vector<double>{1.0};
  const auto rows = limit_table(kind, hs, taus, as);

  Table t;
  t.note("command", "corr-limit");
  t.note("family", fam);
  t.note("direction", to_zero ? "H->0" : "H->1");
  t.note("gaps_decrease", gaps_decrease(rows, hs.size()));
  if (kind == LimitKind::RlToZero) {
    t.columns = {"a", "tau", "H", "value", "limit", "gap"};
    for (const auto& r : rows) t.rows.push_back({r.a, r.tau, r.hurst, r.value, r.limit, r.gap});
  } else {
    t.columns = {"tau", "H", "value", "limit", "gap"};
    for (const auto& r : rows) t.rows.push_back({r.tau, r.hurst, r.value, r.limit, r.gap});
  }
  emit(t, o, out);
  return kOk;
}

int cmd_drift(double hurst, double eta, double t_max, int points, const OutputOptions& o, std::ostream& out,
              std::ostream& err) {
  const auto r = drift_check(hurst, eta, t_max, points);
  Table t;
  t.note("command", "drift-check");
  t.note("H", hurst);
  t.note("eta", eta);
  t.note("c", r.c);
  t.note("phi_at_one", r.phi_at_one);
  t.note("nondecreasing", r.nondecreasing);
  t.note("at_least_one_after_one", r.at_least_one);
  t.columns = {"t", "phi"};
  for (std::size_t i = 0; i < r.t.size(); ++i) t.rows.push_back({r.t[i], r.phi[i]});
  emit(t, o, out);
  if (!r.passed()) {
    err << "check failed: drift function"
        << (r.nondecreasing ? "" : " is not nondecreasing") << (r.at_least_one ? "" : " drops below 1 after t = 1")
        << '\n';
    return kCheckFailed;
  }
  return kOk;
}

struct SampleFlags {
  std::string process = "gsp";
  std::string corr = "ou";
  std::optional<double> hurst;
  double rate = 1.0;
  double time_scale = 1.0;
  double horizon = 1.0;
  double step = 0.01;
  std::int64_t paths = 1;
  std::uint64_t seed = 1;
  int workers = 0;
};

int cmd_sample(const SampleFlags& f, const OutputOptions& o, std::ostream& out) {
  if (f.paths <= 0) throw UsageError("--paths must be positive");
  if (!(f.step > 0.0)) throw UsageError("--grid-step must be positive");
  if (!(f.horizon >= 0.0) || !std::isfinite(f.horizon)) throw UsageError("--horizon must be finite and >= 0");
  if (f.horizon / f.step + 1.0 > 1e5) throw GridTooLargeError("horizon / grid step exceeds 1e5 points");
  const GridSpec grid = GridSpec::from_step(f.horizon, f.step);
  const auto need_h = [&]() {
    if (!f.hurst) throw UsageError("--h is required for --process " + f.process);
    return *f.hurst;
  };
  PathBatch batch = [&]() {
    if (f.process == "gsp") return sample_gsp(make_spec(f.corr, f.hurst, f.rate, f.time_scale), grid, f.paths, f.seed,
                                              f.workers);
    if (f.process == "fbm") return sample_fbm(need_h(), grid, f.paths, f.seed, f.workers);
    if (f.process == "ifbm-lamperti") return sample_ifbm_lamperti(need_h(), grid, f.paths, f.seed, f.workers);
    if (f.process == "rl") return sample_rl(need_h(), grid, f.paths, f.seed, f.workers);
    throw UsageError("unknown --process " + f.process);
  }();

  Table t;
  t.note("command", "sample");
  t.note("process", batch.process);
  if (batch.spec) t.note("spec", batch.spec->describe());
  t.note("horizon", grid.horizon());
  t.note("points", grid.points());
  t.note("grid_step", grid.step());
  t.note("paths", f.paths);
  t.note("seed", f.seed);
  note_report(t, batch.report);
  t.columns = {"path", "index", "x", "value"};
  for (std::size_t p = 0; p < batch.paths.size(); ++p) {
    for (std::size_t i = 0; i < batch.paths[p].size(); ++i) {
      t.rows.push_back({static_cast<std::int64_t>(p), static_cast<std::int64_t>(i),
                        batch.grid.at(static_cast<std::int64_t>(i)), batch.paths[p][i]});
    }
  }
  emit(t, o, out);
  return kOk;
}

struct SpecFlags {
  std::string corr = "ou";
  std::optional<double> hurst;
  double rate = 1.0;
  double time_scale = 1.0;
};

void add_spec_flags(CLI::App* cmd, SpecFlags& f) {
  cmd->add_option("--corr", f.corr, "Correlation: ou, cosh, ifbm, rl, fbm, slepian")->capture_default_str();
  cmd->add_option("--h", f.hurst, "Hurst index");
  cmd->add_option("--rate", f.rate, "OU rate")->capture_default_str();
  cmd->add_option("--time-scale", f.time_scale, "Time scale gamma: A(tau / gamma)")->capture_default_str();
}

int cmd_estimate(const SpecFlags& sf, const PlanFlags& pf, const std::string& horizon_text, const OutputOptions& o,
                 std::ostream& out) {
  const auto spec = make_spec(sf.corr, sf.hurst, sf.rate, sf.time_scale);
  if (!(pf.step > 0.0)) throw UsageError("--grid-step must be positive");
  if (pf.trials <= 0) throw UsageError("--trials must be positive");
  std::vector<double> horizons;
  EstimationPlan plan;
  if (horizon_text.empty()) {
    plan = to_plan(pf);
    horizons = plan.horizons();
  } else {
    horizons = parse_list(horizon_text, "--horizon");
    plan.step = pf.step;
    plan.trials = pf.trials;
    plan.seed = pf.seed;
    plan.workers = pf.workers;
    plan.t_min = pf.t_min;
    plan.t_max = pf.t_max;
  }
  for (double h : horizons) {
    if (!(h >= 0.0) || !std::isfinite(h)) throw UsageError("--horizon values must be finite and >= 0");
    if (h / pf.step + 1.0 > 1e5) throw GridTooLargeError("horizon / grid step exceeds 1e5 points");
  }

  std::vector<PersistenceEstimate> estimates;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    estimates.push_back(
        persistence_probability(spec, horizons[i], plan.step, plan.trials, derive_seed(plan.seed, i), plan.workers));
  }

  Table t;
  t.note("command", "estimate");
  t.note("spec", spec.describe());
  t.note("grid_step", plan.step);
  t.note("trials", plan.trials);
  t.note("seed", plan.seed);
  t.note("seed_rule", "horizon i uses derive_seed(seed, i)");
  t.note("bias", kGridBiasNote);
  note_report(t, estimates.back().report);
  try {
    const auto fit = fit_exponent(estimates, plan.t_min, plan.t_max);
    t.note("window", format_double(fit.window_lo) + ":" + format_double(fit.window_hi));
    t.note("theta_hat", fit.theta_hat);
    t.note("stderr", fit.std_error());
    t.note("stderr_resid", fit.stderr_resid);
    t.note("stderr_sampling", fit.stderr_sampling);
  } catch (const InsufficientDataError& ex) {
    t.note("fit", ex.what());
  }
  t.columns = {"horizon", "grid_step", "trials", "survivors", "p_hat", "log_p", "ci_log", "seed"};
  for (const auto& e : estimates) {
    t.rows.push_back({e.horizon, e.step, e.n_trials, e.n_survive, e.p_hat, e.log_p,
                      e.ci_log ? Cell(*e.ci_log) : Cell(std::monostate{}), std::to_string(e.seed)});
  }
  emit(t, o, out);
  return kOk;
}

Cell nan_cell(double v) { return std::isnan(v) ? Cell(std::monostate{}) : Cell(v); }

std::optional<double> gamma_for(const std::string& rescale, double h) {
  if (rescale == "none") return std::nullopt;
  if (rescale == "h") return h;
  if (rescale == "one-minus-h") return 1.0 - h;
  throw UsageError("--rescale must be none, h or one-minus-h");
}

int cmd_curve(const std::string& family_name, const std::string& h_text, const std::string& rescale,
              const PlanFlags& pf, const OutputOptions& o, std::ostream& out) {
  const Family family = [&]() {
    try {
      return family_from_string(family_name);
    } catch (const DomainError& ex) {
      throw UsageError(ex.what());
    }
  }();
  const auto hs = parse_list(h_text, "--h");
  const auto plan = to_plan(pf);
  for (double h : hs) {
    family_spec(family, h);  // validates H before any sampling
    gamma_for(rescale, h);
  }

  std::vector<CurvePoint> points;
  if (rescale == "none") {
    points = exponent_curve(family, hs, plan);
  } else {
    // Same seeding as exponent_curve, with the spec rescaled per point.
    for (std::size_t i = 0; i < hs.size(); ++i) {
      CurvePoint p;
      p.hurst = hs[i];
      p.family = family;
      EstimationPlan local = plan;
      local.seed = derive_seed(plan.seed, 1000 + i);
      try {
        const auto fit = rescaled_exponent(family_spec(family, hs[i]), *gamma_for(rescale, hs[i]), local);
        p.theta_hat = fit.theta_hat;
        p.std_error = fit.std_error();
        p.fit = fit;
      } catch (const BudgetInfeasibleError&) {
        p.status = "budget-infeasible";
        p.theta_hat = p.std_error = std::numeric_limits<double>::quiet_NaN();
      }
      points.push_back(std::move(p));
    }
  }

  Table t;
  t.note("command", "curve");
  t.note("family", to_string(family));
  t.note("rescale", rescale);
  note_plan(t, plan);
  t.note("seed_rule", "point i uses derive_seed(seed, 1000 + i)");
  t.columns = {"family", "H", "gamma", "theta_hat", "stderr", "status", "conjecture", "lower_bound", "upper_bound"};
  const auto opt = [](const std::optional<double>& v) { return v ? Cell(*v) : Cell(std::monostate{}); };
  for (const auto& p : points) {
    const auto g = gamma_for(rescale, p.hurst);
    t.rows.push_back({to_string(p.family), p.hurst, g ? *g : 1.0, nan_cell(p.theta_hat), nan_cell(p.std_error),
                      p.status, opt(p.conjecture), opt(p.lower_bound), opt(p.upper_bound)});
  }
  emit(t, o, out);
  return kOk;
}

int cmd_figure1(const PlanFlags& pf, bool full, bool trials_set, const OutputOptions& o, std::ostream& out,
                std::ostream& err) {
  PlanFlags flags = pf;
  if (!trials_set) flags.trials = 200000;
  if (full) flags.trials *= 10;
  const auto plan = to_plan(flags);

  const std::vector<double> ifbm_h{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const std::vector<double> rl_h{0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
  const auto ifbm = exponent_curve(Family::Ifbm, ifbm_h, plan);
  err << "figure1: IFBM curve done\n";
  EstimationPlan rl_plan = plan;
  rl_plan.seed = derive_seed(plan.seed, 1);
  const auto rl = exponent_curve(Family::Rl, rl_h, rl_plan);
  err << "figure1: RL curve done\n";

  Table t;
  t.note("command", "figure1");
  note_plan(t, plan);
  t.note("seed_rule", "IFBM curve uses seed, RL curve derive_seed(seed, 1), COSH derive_seed(seed, 2)");
  t.note("bias", kGridBiasNote);
  t.columns = {"family", "H", "theta_hat", "stderr", "reference_value", "reference", "status"};
  const auto add_point = [&](const CurvePoint& p, Cell ref, const std::string& ref_name) {
    t.rows.push_back({to_string(p.family), p.hurst, nan_cell(p.theta_hat), nan_cell(p.std_error), std::move(ref),
                      ref_name, p.status});
  };
  for (const auto& p : ifbm) add_point(p, p.hurst * (1.0 - p.hurst), "H(1-H)");
  for (const auto& p : rl) add_point(p, Cell(std::monostate{}), "");

  EstimationPlan cosh_plan = plan;
  cosh_plan.seed = derive_seed(plan.seed, 2);
  std::vector<Cell> cosh_row{std::string("COSH"), std::string("inf")};
  try {
    const auto fit = estimate_exponent(CorrelationSpec::cosh_limit(), cosh_plan);
    cosh_row.insert(cosh_row.end(), {fit.theta_hat, fit.std_error(), 3.0 / 16.0, std::string("3/16"),
                                     std::string("ok")});
  } catch (const BudgetInfeasibleError&) {
    cosh_row.insert(cosh_row.end(), {std::monostate{}, std::monostate{}, 3.0 / 16.0, std::string("3/16"),
                                     std::string("budget-infeasible")});
  }
  t.rows.push_back(std::move(cosh_row));
  err << "figure1: COSH done\n";

  // Reference lines and points, no Monte Carlo.
  const Cell none = std::monostate{};
  for (double h = 0.05; h < 1.0; h += 0.05) {
    const double hr = std::round(h * 100.0) / 100.0;
    t.rows.push_back({std::string("FBM"), hr, none, none, 1.0 - hr, std::string("1-H"), std::string("reference")});
  }
  t.rows.push_back({std::string("BM"), 0.5, none, none, 0.5, std::string("theta(BM)"), std::string("reference")});
  t.rows.push_back({std::string("IBM"), 0.5, none, none, 0.25, std::string("theta(iBM)"), std::string("reference")});
  t.rows.push_back({std::string("RL"), std::string("inf"), none, none, 3.0 / 16.0, std::string("asymptote"),
                    std::string("reference")});
  emit(t, o, out);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persistence exponents of stationary Gaussian processes", "perslab"};
  // --h is the Hurst index everywhere, so help is --help only.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  OutputOptions o;

  auto* verify = app.add_subcommand("verify", "Deterministic identity and bound suite");
  std::optional<std::string> verify_h;
  std::optional<double> perturb;
  verify->add_option("--h", verify_h, "Comma-separated H list overriding the default grid");
  verify->add_option("--perturb-rl", perturb, "Add this to every r_H value (testing hook)");
  add_output_flags(verify, o);

  auto* corr_eval_cmd = app.add_subcommand("corr-eval", "Evaluate a correlation function");
  SpecFlags ce_spec;
  std::string ce_tau;
  add_spec_flags(corr_eval_cmd, ce_spec);
  corr_eval_cmd->add_option("--tau", ce_tau, "Comma-separated lags")->required();
  add_output_flags(corr_eval_cmd, o);

  auto* corr_limit = app.add_subcommand("corr-limit", "Gaps of rescaled correlations to their limits");
  std::string cl_family = "IFBM", cl_direction = "0", cl_h, cl_tau, cl_a;
  corr_limit->add_option("--family", cl_family, "IFBM or RL")->capture_default_str();
  corr_limit->add_option("--direction", cl_direction, "0 (H -> 0) or 1 (H -> 1)")->capture_default_str();
  corr_limit->add_option("--h", cl_h, "Comma-separated H list, approaching the limit");
  corr_limit->add_option("--tau", cl_tau, "Comma-separated lags");
  corr_limit->add_option("--a", cl_a, "Comma-separated RL scale parameters a");
  add_output_flags(corr_limit, o);

  auto* drift = app.add_subcommand("drift-check", "Monotonicity of the drift function phi");
  double d_h = 0.3, d_eta = 0.7, d_tmax = 100.0;
  int d_points = 200;
  drift->add_option("--h", d_h, "Hurst index in (0, 1/2]")->capture_default_str();
  drift->add_option("--eta", d_eta, "Exponent in (1/2, 1/2 + H)")->capture_default_str();
  drift->add_option("--t-max", d_tmax, "Right end of the t grid")->capture_default_str();
  drift->add_option("--points", d_points, "Grid size")->capture_default_str();
  add_output_flags(drift, o);

  auto* sample = app.add_subcommand("sample", "Draw sample paths");
  SampleFlags sf;
  sample->add_option("--process", sf.process, "gsp, fbm, ifbm-lamperti or rl")
      ->check(CLI::IsMember({"gsp", "fbm", "ifbm-lamperti", "rl"}))
      ->capture_default_str();
  sample->add_option("--corr", sf.corr, "Correlation for gsp: ou, cosh, ifbm, rl, fbm, slepian")->capture_default_str();
  sample->add_option("--h", sf.hurst, "Hurst index");
  sample->add_option("--rate", sf.rate, "OU rate")->capture_default_str();
  sample->add_option("--time-scale", sf.time_scale, "Time scale gamma")->capture_default_str();
  sample->add_option("--horizon", sf.horizon, "Grid length")->capture_default_str();
  sample->add_option("--grid-step", sf.step, "Grid spacing")->capture_default_str();
  sample->add_option("--paths", sf.paths, "Number of paths")->capture_default_str();
  sample->add_option("--seed", sf.seed, "Master seed")->capture_default_str();
  sample->add_option("--workers", sf.workers, "Worker threads (0: one per core)")->capture_default_str();
  add_output_flags(sample, o);

  auto* estimate = app.add_subcommand("estimate", "Persistence probabilities and exponent fit");
  SpecFlags es_spec;
  PlanFlags es_plan;
  std::string es_horizon;
  add_spec_flags(estimate, es_spec);
  add_plan_flags(estimate, es_plan);
  estimate->add_option("--horizon", es_horizon, "Comma-separated horizons (default: the fit window grid)");
  add_output_flags(estimate, o);

  auto* curve = app.add_subcommand("curve", "Exponent estimates along a list of H");
  std::string cu_family = "IFBM", cu_h, cu_rescale = "none";
  PlanFlags cu_plan;
  curve->add_option("--family", cu_family, "IFBM, RL or FBM")->capture_default_str();
  curve->add_option("--h", cu_h, "Comma-separated H list")->required();
  curve->add_option("--rescale", cu_rescale, "Time scale per point: none, h or one-minus-h")
      ->check(CLI::IsMember({"none", "h", "one-minus-h"}))
      ->capture_default_str();
  add_plan_flags(curve, cu_plan);
  add_output_flags(curve, o);

  auto* figure = app.add_subcommand("figure1", "Exponent curves of IFBM and RL with reference values");
  PlanFlags fg_plan;
  bool full = false;
  add_plan_flags(figure, fg_plan);
  figure->add_flag("--full", full, "Ten times the default budget");
  add_output_flags(figure, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    if (verify->parsed()) {
      return cmd_verify(verify_h, perturb, o, out, err);
    }
    if (corr_eval_cmd->parsed())
      return cmd_corr_eval(ce_spec.corr, ce_spec.hurst, ce_spec.rate, ce_spec.time_scale, ce_tau, o, out);
    if (corr_limit->parsed()) return cmd_corr_limit(cl_family, cl_direction, cl_h, cl_tau, cl_a, o, out);
    if (drift->parsed()) return cmd_drift(d_h, d_eta, d_tmax, d_points, o, out, err);
    if (sample->parsed()) return cmd_sample(sf, o, out);
    if (estimate->parsed()) return cmd_estimate(es_spec, es_plan, es_horizon, o, out);
    if (curve->parsed()) return cmd_curve(cu_family, cu_h, cu_rescale, cu_plan, o, out);
    if (figure->parsed()) {
      return cmd_figure1(fg_plan, full, figure->get_option("--trials")->count() > 0, o, out, err);
    }
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  } catch (const DomainError& ex) {
    err << "invalid argument: " << ex.what() << '\n';
    return kUsage;
  } catch (const GridTooLargeError& ex) {
    err << "grid too large: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace perslab::cli
