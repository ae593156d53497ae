#pragma once

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "adp/adp.hpp"

namespace adp {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration (JSON document; see README for the schema).
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string benchmark;  // empty when an inline system is given

  // inline system
  int state_dim = 0, control_dim = 0;
  std::vector<std::string> dynamics;
  std::string cost;
  Vec domain_lower, domain_upper;
  std::vector<int> domain_nodes;
  Vec control_lower, control_upper;
  std::vector<int> control_samples;

  // benchmark resolution overrides
  std::vector<int> grid_nodes_override;
  std::vector<int> control_samples_override;

  std::string algorithm = "pi";
  int lookahead_steps = 1;

  std::vector<std::string> initial_policy_exprs;
  std::string initial_policy_file;
  bool initial_value_zero = false;
  std::string initial_value_file;
  bool initial_policy_given = false;

  SolveOptions solve;
  bool tolerances_given = false;

  unsigned seed = 0;
  bool snapshots = false;
  bool timings = false;
  std::string out_dir = "run-out";

  json echo;  // effective configuration, replayable via --config
};

namespace detail {

template <typename T>
void read_into(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void parse_box(const json& j, const char* what, Vec& lower, Vec& upper,
                      std::vector<int>& res, const char* res_key) {
  if (!j.contains("lower") || !j.contains("upper") || !j.contains(res_key))
    throw config_error(std::string(what) + ": need lower, upper and " + res_key);
  lower = j.at("lower").get<Vec>();
  upper = j.at("upper").get<Vec>();
  res = j.at(res_key).get<std::vector<int>>();
}

}  // namespace detail

inline RunConfig parse_config(json doc) {
  // A run summary is itself replayable: unwrap its config echo.
  if (doc.contains("config") && doc.at("config").is_object()) doc = doc.at("config");

  RunConfig cfg;
  detail::read_into(doc, "benchmark", cfg.benchmark);

  if (doc.contains("system")) {
    if (!cfg.benchmark.empty())
      throw config_error("config: give either 'benchmark' or 'system', not both");
    const json& sys = doc.at("system");
    detail::read_into(sys, "state_dim", cfg.state_dim);
    detail::read_into(sys, "control_dim", cfg.control_dim);
    if (cfg.state_dim < 1 || cfg.control_dim < 1)
      throw config_error("config: system needs positive state_dim and control_dim");
    cfg.dynamics = sys.at("dynamics").get<std::vector<std::string>>();
    if (static_cast<int>(cfg.dynamics.size()) != cfg.state_dim)
      throw config_error("config: need one dynamics expression per state dimension");
    cfg.cost = sys.at("cost").get<std::string>();
    detail::parse_box(sys.at("domain"), "config: system.domain", cfg.domain_lower,
                      cfg.domain_upper, cfg.domain_nodes, "nodes");
    detail::parse_box(sys.at("controls"), "config: system.controls", cfg.control_lower,
                      cfg.control_upper, cfg.control_samples, "samples");
  } else if (cfg.benchmark.empty()) {
    throw config_error("config: need a 'benchmark' name or an inline 'system'");
  }

  detail::read_into(doc, "grid_nodes", cfg.grid_nodes_override);
  detail::read_into(doc, "control_samples", cfg.control_samples_override);
  detail::read_into(doc, "algorithm", cfg.algorithm);
  detail::read_into(doc, "lookahead_steps", cfg.lookahead_steps);
  if (cfg.algorithm != "pi" && cfg.algorithm != "vi" && cfg.algorithm != "mlpi")
    throw config_error("config: algorithm must be pi, vi or mlpi");
  if (cfg.lookahead_steps < 1) throw config_error("config: lookahead_steps must be >= 1");

  if (doc.contains("initial_policy")) {
    cfg.initial_policy_given = true;
    const json& ip = doc.at("initial_policy");
    if (ip.is_array()) {
      cfg.initial_policy_exprs = ip.get<std::vector<std::string>>();
    } else if (ip.is_string()) {
      cfg.initial_policy_exprs = {ip.get<std::string>()};
    } else if (ip.is_object() && ip.contains("file")) {
      cfg.initial_policy_file = ip.at("file").get<std::string>();
    } else {
      throw config_error("config: initial_policy must be an expression (string/array) or "
                         "{\"file\": path}");
    }
  }
  if (doc.contains("initial_value")) {
    const json& iv = doc.at("initial_value");
    if (iv.is_string() && iv.get<std::string>() == "zero") {
      cfg.initial_value_zero = true;
    } else if (iv.is_object() && iv.contains("file")) {
      cfg.initial_value_file = iv.at("file").get<std::string>();
    } else {
      throw config_error("config: initial_value must be \"zero\" or {\"file\": path}");
    }
  }

  if (doc.contains("solve")) {
    const json& s = doc.at("solve");
    detail::read_into(s, "tol_outer", cfg.solve.tol_outer);
    detail::read_into(s, "max_iters", cfg.solve.max_iters);
    detail::read_into(s, "tol_eval", cfg.solve.eval.tol_eval);
    detail::read_into(s, "max_sweeps", cfg.solve.eval.max_sweeps);
    detail::read_into(s, "refine", cfg.solve.greedy.refine);
    detail::read_into(s, "refine_iters", cfg.solve.greedy.refine_iters);
    detail::read_into(s, "require_admissible", cfg.solve.require_admissible);
  }
  if (doc.contains("tolerances")) {
    cfg.tolerances_given = true;
    const json& t = doc.at("tolerances");
    detail::read_into(t, "eps_mono", cfg.solve.tol.eps_mono);
    detail::read_into(t, "eps_dom", cfg.solve.tol.eps_dom);
    detail::read_into(t, "eps_bellman", cfg.solve.tol.eps_bellman);
    detail::read_into(t, "rollout_horizon", cfg.solve.tol.rollout_horizon);
    detail::read_into(t, "eps_state", cfg.solve.tol.eps_state);
  }

  detail::read_into(doc, "seed", cfg.seed);
  cfg.solve.seed = cfg.seed;
  detail::read_into(doc, "snapshots", cfg.snapshots);
  detail::read_into(doc, "timings", cfg.timings);
  detail::read_into(doc, "out", cfg.out_dir);
  cfg.solve.lookahead_steps = cfg.lookahead_steps;

  cfg.echo = std::move(doc);
  return cfg;
}

struct BuiltProblem {
  ProblemSpec spec;
  std::optional<Benchmark> bench;
};

inline BuiltProblem build_problem(const RunConfig& cfg) {
  BuiltProblem built;
  if (!cfg.benchmark.empty()) {
    Benchmark bench = make_benchmark(cfg.benchmark);
    if (!cfg.grid_nodes_override.empty())
      bench.spec.domain =
          BoxGrid(bench.spec.domain.lower(), bench.spec.domain.upper(), cfg.grid_nodes_override);
    if (!cfg.control_samples_override.empty())
      bench.spec.controls = ControlSet(bench.spec.controls.lower(), bench.spec.controls.upper(),
                                       cfg.control_samples_override);
    if (!cfg.grid_nodes_override.empty() || !cfg.control_samples_override.empty())
      bench.initial_policy =
          make_policy_field(bench.spec.domain, bench.spec.controls, bench.initial_policy_fn);
    built.spec = bench.spec;
    built.bench = std::move(bench);
    return built;
  }

  const int n = cfg.state_dim, m = cfg.control_dim;
  std::vector<Expression> dyn;
  dyn.reserve(n);
  for (const std::string& e : cfg.dynamics) dyn.push_back(Expression::parse(e, n, m));
  Expression cost = Expression::parse(cfg.cost, n, m);

  built.spec.system.state_dim = n;
  built.spec.system.control_dim = m;
  built.spec.system.step = [dyn, n](const Vec& x, const Vec& u, Vec& out) {
    out.resize(n);
    for (int d = 0; d < n; ++d) out[d] = dyn[d].eval(x, u);
  };
  built.spec.cost.evaluate = [cost](const Vec& x, const Vec& u) { return cost.eval(x, u); };
  built.spec.domain = BoxGrid(cfg.domain_lower, cfg.domain_upper, cfg.domain_nodes);
  built.spec.controls = ControlSet(cfg.control_lower, cfg.control_upper, cfg.control_samples);
  return built;
}

inline PolicyField build_initial_policy(const RunConfig& cfg, const BuiltProblem& built) {
  const ProblemSpec& spec = built.spec;
  if (!cfg.initial_policy_file.empty()) {
    PolicyField h = load_policy_field(cfg.initial_policy_file);
    if (!(h.grid == spec.domain))
      throw config_error("initial policy file grid does not match the problem domain");
    if (h.control_dim != spec.system.control_dim)
      throw config_error("initial policy file control dimension mismatch");
    h.bound_lower = spec.controls.lower();
    h.bound_upper = spec.controls.upper();
    for (std::size_t i = 0; i < h.grid.node_count(); ++i) {
      Vec u(h.control_at(i).begin(), h.control_at(i).end());
      spec.controls.clamp(u);
      auto dst = h.control_at(i);
      for (int j = 0; j < h.control_dim; ++j) dst[j] = u[j];
    }
    return h;
  }
  if (!cfg.initial_policy_exprs.empty()) {
    if (static_cast<int>(cfg.initial_policy_exprs.size()) != spec.system.control_dim)
      throw config_error("need one initial-policy expression per control dimension");
    std::vector<Expression> exprs;
    for (const std::string& e : cfg.initial_policy_exprs)
      exprs.push_back(Expression::parse(e, spec.system.state_dim, 0));
    const Vec no_controls;
    return make_policy_field(spec.domain, spec.controls, [&](const Vec& x, Vec& u) {
      u.resize(exprs.size());
      for (std::size_t j = 0; j < exprs.size(); ++j) u[j] = exprs[j].eval(x, no_controls);
    });
  }
  if (built.bench) return built.bench->initial_policy;
  throw config_error("no initial policy: give 'initial_policy' (inline systems have no default)");
}

// ---------------------------------------------------------------------------
// Artifact layout inside a run directory.
// ---------------------------------------------------------------------------

struct OutDir {
  fs::path root;
  fs::path lock;

  explicit OutDir(const std::string& dir) : root(dir) {
    fs::create_directories(root);
    lock = root / ".lock";
    if (fs::exists(lock))
      throw io_error("output directory '" + dir + "' is locked by another run (remove " +
                     lock.string() + " if stale)");
    std::ofstream(lock.string()) << "";
  }
  ~OutDir() {
    std::error_code ec;
    fs::remove(lock, ec);
  }
  std::string path(const std::string& name) const { return (root / name).string(); }
};

namespace detail {

inline std::string snap_name(const std::string& stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu.csv", stem.c_str(), i);
  return buf;
}

inline void write_snapshots(const OutDir& out, const SolveResult& result,
                            const std::string& prefix) {
  fs::create_directories(out.root / "snapshots");
  for (std::size_t i = 0; i < result.value_history.size(); ++i)
    save_field(result.value_history[i],
               out.path("snapshots/" + snap_name(prefix + "value", i)));
  for (std::size_t i = 0; i < result.policy_history.size(); ++i)
    save_field(result.policy_history[i],
               out.path("snapshots/" + snap_name(prefix + "policy", i)));
}

inline json result_summary(const SolveResult& result) {
  json j;
  j["algorithm"] = result.algorithm;
  j["converged"] = result.converged;
  j["evaluation_diverged"] = result.evaluation_diverged;
  if (!result.diagnostic.empty()) j["diagnostic"] = result.diagnostic;
  j["iterations"] = result.trace.rows.size();
  if (!result.trace.rows.empty()) {
    j["final_supnorm_delta"] = result.trace.rows.back().supnorm_delta;
    j["final_bellman_residual"] = result.trace.rows.back().bellman_residual;
  }
  double wall = 0.0;
  long long exc = 0;
  for (const auto& r : result.trace.rows) {
    wall += r.wall_ms;
    exc += r.excursions;
  }
  j["wall_ms_total"] = wall;
  j["excursions_total"] = exc;
  if (!result.value_history.empty())
    j["value_scale"] = sup_norm(result.value_history.front().values);
  return j;
}

inline int solver_exit_code(const SolveResult& result) { return result.converged ? 0 : 2; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

inline int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  BuiltProblem built = build_problem(cfg);

  const ValidationReport validation = validate_problem(built.spec, 1000, cfg.seed);
  if (!validation.all_passed()) {
    std::string msg = "model contract validation failed:";
    for (const auto& c : validation.checks)
      if (!c.passed) msg += " [" + c.name + "] " + c.message;
    throw model_error(msg);
  }

  SolveResult result;
  if (cfg.algorithm == "vi") {
    if (cfg.initial_policy_given && (cfg.initial_value_zero || !cfg.initial_value_file.empty()))
      throw config_error("vi: give exactly one of initial_policy / initial_value");
    ScalarField W0 = ScalarField::zeros(built.spec.domain);  // default cold start
    if (!cfg.initial_value_file.empty()) {
      W0 = load_scalar_field(cfg.initial_value_file);
      if (!(W0.grid == built.spec.domain))
        throw config_error("initial value field grid does not match the problem domain");
    } else if (cfg.initial_policy_given) {
      // initialized from a policy evaluation (the shared-start comparison setting)
      const PolicyField h0 = build_initial_policy(cfg, built);
      PolicyEvaluation ev = evaluate_policy(built.spec, h0, cfg.solve.eval);
      if (!ev.converged)
        throw refusal_error("vi: evaluation of the initializing policy did not converge");
      W0 = std::move(ev.value);
    }
    result = run_vi(built.spec, W0, cfg.solve);
  } else {
    if (cfg.initial_value_zero || !cfg.initial_value_file.empty())
      throw config_error(cfg.algorithm + ": initializer must be a policy, not a value field");
    const PolicyField h0 = build_initial_policy(cfg, built);
    result = (cfg.algorithm == "pi") ? run_pi(built.spec, h0, cfg.solve)
                                     : run_mlpi(built.spec, h0, cfg.solve);
  }

  OutDir dir(cfg.out_dir);
  write_trace_csv(result.trace, dir.path("trace.csv"), cfg.timings);
  save_field(result.value, dir.path("value.csv"));
  save_field(result.policy, dir.path("policy.csv"));
  if (cfg.snapshots) detail::write_snapshots(dir, result, "");

  json summary = detail::result_summary(result);
  summary["config"] = cfg.echo;
  summary["mode"] = "solve";
  summary["benchmark"] = cfg.benchmark.empty() ? "inline" : cfg.benchmark;
  summary["files"] = {{"trace", "trace.csv"}, {"value", "value.csv"}, {"policy", "policy.csv"}};
  if (cfg.snapshots) summary["files"]["snapshots"] = "snapshots";
  write_json(summary, dir.path("summary.json"));

  out << result.algorithm << ": " << (result.converged ? "converged" : "did not converge")
      << " after " << result.trace.rows.size() << " iteration(s)";
  if (!result.trace.rows.empty())
    out << " (final sup-norm delta " << format_full(result.trace.rows.back().supnorm_delta) << ")";
  out << "\n";
  if (!result.diagnostic.empty()) out << "note: " << result.diagnostic << "\n";
  return detail::solver_exit_code(result);
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  if (cfg.initial_value_zero || !cfg.initial_value_file.empty())
    throw refusal_error("compare: the dominance comparison requires V^0 = W^0 evaluated from an admissible "
                        "policy; a value-field initializer violates the precondition");

  BuiltProblem built = build_problem(cfg);
  const ValidationReport validation = validate_problem(built.spec, 1000, cfg.seed);
  if (!validation.all_passed()) throw model_error("model contract validation failed");

  const PolicyField h0 = build_initial_policy(cfg, built);
  SolveResult pi = run_pi(built.spec, h0, cfg.solve);
  if (pi.value_history.empty()) throw model_error("compare: PI produced no value fields");
  SolveOptions vi_opts = cfg.solve;
  SolveResult vi = run_vi(built.spec, pi.value_history.front(), vi_opts);

  const double scale = sup_norm(pi.value_history.front().values);
  const Tolerances tol =
      cfg.tolerances_given ? cfg.solve.tol : Tolerances::for_scale(std::max(1.0, scale));
  const Certificate dominance = check_dominance(pi.value_history, vi.value_history, tol);

  OutDir dir(cfg.out_dir);
  write_trace_csv(pi.trace, dir.path("trace_pi.csv"), cfg.timings);
  write_trace_csv(vi.trace, dir.path("trace_vi.csv"), cfg.timings);
  save_field(pi.value, dir.path("value_pi.csv"));
  save_field(pi.policy, dir.path("policy_pi.csv"));
  save_field(vi.value, dir.path("value_vi.csv"));
  save_field(vi.policy, dir.path("policy_vi.csv"));
  if (cfg.snapshots) {
    detail::write_snapshots(dir, pi, "pi_");
    detail::write_snapshots(dir, vi, "vi_");
  }
  fs::create_directories(dir.root / "certs");
  write_json(certificate_to_json(dominance), dir.path("certs/dominance.json"));

  json summary;
  summary["mode"] = "compare";
  summary["config"] = cfg.echo;
  summary["benchmark"] = cfg.benchmark.empty() ? "inline" : cfg.benchmark;
  summary["pi"] = detail::result_summary(pi);
  summary["vi"] = detail::result_summary(vi);
  summary["value_scale"] = scale;
  summary["dominance_passed"] = dominance.passed;
  write_json(summary, dir.path("summary.json"));

  out << "dominance: " << (dominance.passed ? "PASS" : "FAIL")
      << " (worst margin " << format_full(dominance.worst.margin) << ")\n";
  out << "iterations to tol_outer: pi=" << pi.trace.rows.size()
      << " vi=" << vi.trace.rows.size() << "\n";
  return (pi.converged && vi.converged) ? 0 : 2;
}

inline int cmd_rollout(const RunConfig& cfg, const std::string& policy_path, const Vec& x0,
                       int horizon, std::ostream& out) {
  if (horizon < 0) throw config_error("rollout: horizon must be >= 0");
  BuiltProblem built = build_problem(cfg);
  PolicyField h = load_policy_field(policy_path);
  if (!(h.grid == built.spec.domain))
    throw config_error("rollout: policy grid does not match the problem domain");
  h.bound_lower = built.spec.controls.lower();
  h.bound_upper = built.spec.controls.upper();
  if (static_cast<int>(x0.size()) != built.spec.system.state_dim)
    throw config_error("rollout: x0 dimension mismatch");
  if (!built.spec.domain.contains(x0)) throw config_error("rollout: x0 outside the domain");

  out << "k,x,u,stage_cost,accumulated_cost\n";
  Vec x = x0, xn(built.spec.system.state_dim);
  double acc = 0.0;
  long long excursions = 0;
  for (int k = 0; k < horizon; ++k) {
    const Vec u = interpolate_policy(h, x);
    const double c = built.spec.cost.evaluate(x, u);
    acc += c;
    out << k << ",(" << format_vec(x) << "),(" << format_vec(u) << ")," << format_full(c) << ","
        << format_full(acc) << "\n";
    built.spec.system.step(x, u, xn);
    if (!all_finite(xn)) throw model_error("rollout: dynamics produced a non-finite state");
    bool moved = false;
    clamp_to_domain_inplace(built.spec.domain, xn, &moved);
    if (moved) ++excursions;
    x = xn;
  }
  out << "terminal_state,(" << format_vec(x) << ")\n";
  out << "terminal_norm," << format_full(norm2(x)) << "\n";
  out << "accumulated_cost," << format_full(acc) << "\n";
  out << "excursions," << excursions << "\n";
  return 0;
}

inline int cmd_diagnose(const std::string& run_dir, std::ostream& out) {
  const fs::path root(run_dir);
  const json summary = read_json((root / "summary.json").string());
  if (!summary.contains("config")) throw io_error("diagnose: summary.json has no config echo");
  RunConfig cfg = parse_config(summary);
  BuiltProblem built = build_problem(cfg);

  const std::string mode = summary.value("mode", "solve");
  const double scale = summary.value("value_scale", 1.0);
  const Tolerances tol =
      cfg.tolerances_given ? cfg.solve.tol : Tolerances::for_scale(std::max(1.0, scale));

  std::vector<Certificate> certs;
  bool any_failed = false;
  bool any_warning = false;

  auto report = [&](Certificate cert) {
    const char* tag = cert.passed ? "PASS" : (cert.inconclusive ? "INCONCLUSIVE" : "FAIL");
    if (cert.inconclusive) {
      tag = "INCONCLUSIVE";
      any_warning = true;
    } else if (!cert.passed) {
      any_failed = true;
    }
    out << "[" << tag << "] " << cert.subject;
    if (!cert.inconclusive) out << " (worst margin " << format_full(cert.worst.margin) << ")";
    out << "\n";
    certs.push_back(std::move(cert));
  };
  auto skipped = [&](const std::string& subject, const std::string& why) {
    Certificate cert;
    cert.subject = subject;
    cert.passed = true;
    cert.inconclusive = true;
    cert.details.push_back({"skipped", true, 0.0, 0.0, why});
    out << "[SKIPPED] " << subject << " (" << why << ")\n";
    any_warning = true;
    certs.push_back(std::move(cert));
  };

  auto trace_monotone = [&](const std::string& file, const std::string& label) {
    const RunTrace trace = read_trace_csv((root / file).string());
    Certificate cert;
    cert.subject = "monotone-trace(" + label + ")";
    double worst = -std::numeric_limits<double>::infinity();
    int worst_iter = -1;
    for (const auto& r : trace.rows)
      if (r.mono_margin > worst) {
        worst = r.mono_margin;
        worst_iter = r.iteration;
      }
    if (trace.rows.empty()) worst = 0.0;
    cert.passed = worst <= tol.eps_mono;
    cert.worst.margin = worst;
    cert.worst.iteration = worst_iter;
    cert.details.push_back({"max mono_margin over trace", cert.passed, worst, tol.eps_mono, ""});
    report(std::move(cert));
  };

  auto load_snapshot_series = [&](const std::string& stem) {
    std::vector<std::string> paths;
    for (std::size_t i = 0;; ++i) {
      const fs::path p = root / "snapshots" / detail::snap_name(stem, i);
      if (!fs::exists(p)) break;
      paths.push_back(p.string());
    }
    return paths;
  };

  const std::string algo =
      mode == "compare" ? "pi" : summary.value("algorithm", cfg.algorithm);

  // Monotonicity: PI/MLPI traces must be pointwise nonincreasing; a VI trace
  // qualifies only when it was initialized from an admissible policy.
  if (mode == "compare") {
    trace_monotone("trace_pi.csv", "pi");
    trace_monotone("trace_vi.csv", "vi from admissible evaluation");
  } else if (algo == "pi" || algo == "mlpi") {
    trace_monotone("trace.csv", algo);
  } else if (cfg.initial_policy_given) {
    trace_monotone("trace.csv", "vi from admissible evaluation");
  } else {
    skipped("monotone-trace", "vi from a value-field start is an increasing sequence");
  }

  // Field-level monotone check from snapshots, when present.
  {
    const std::string stem = mode == "compare" ? "pi_value" : "value";
    const auto paths = load_snapshot_series(stem);
    if (paths.size() >= 2 && (mode == "compare" || algo == "pi" || algo == "mlpi")) {
      std::vector<ScalarField> fields;
      for (const auto& p : paths) fields.push_back(load_scalar_field(p));
      Certificate cert = check_monotone(fields, tol);
      cert.subject = "monotone-fields(" + stem + ")";
      report(std::move(cert));
    }
  }

  // Intermediate-policy audit: every persisted policy must certify admissible.
  if (mode == "compare" || algo == "pi" || algo == "mlpi") {
    const std::string stem = mode == "compare" ? "pi_policy" : "policy";
    const auto paths = load_snapshot_series(stem);
    if (paths.empty()) {
      skipped("admissibility(intermediate policies)", "no policy snapshots in this run directory");
    } else {
      Certificate combined;
      combined.subject = "admissibility(intermediate policies)";
      combined.passed = true;
      for (std::size_t i = 0; i < paths.size(); ++i) {
        PolicyField h = load_policy_field(paths[i]);
        h.bound_lower = built.spec.controls.lower();
        h.bound_upper = built.spec.controls.upper();
        const Certificate c = certify_admissible(built.spec, h, tol, {}, cfg.seed, cfg.solve.eval);
        combined.details.push_back({"policy snapshot " + std::to_string(i), c.passed,
                                    c.worst.margin, tol.eps_state, c.passed ? "" : "failed"});
        if (!c.passed) combined.passed = false;
        if (c.worst.margin > combined.worst.margin) combined.worst = c.worst;
      }
      report(std::move(combined));
    }
  }

  // Dominance recheck from snapshots (compare runs only).
  if (mode == "compare") {
    const auto pi_paths = load_snapshot_series("pi_value");
    const auto vi_paths = load_snapshot_series("vi_value");
    if (pi_paths.size() >= 1 && vi_paths.size() >= 1) {
      std::vector<ScalarField> pif, vif;
      for (const auto& p : pi_paths) pif.push_back(load_scalar_field(p));
      for (const auto& p : vi_paths) vif.push_back(load_scalar_field(p));
      report(check_dominance(pif, vif, tol));
    } else {
      skipped("dominance", "no value snapshots in this run directory");
    }
  }

  // Bellman residual of the converged field(s).
  {
    const std::vector<std::pair<std::string, std::string>> fields =
        mode == "compare"
            ? std::vector<std::pair<std::string, std::string>>{{"value_pi.csv", "pi"},
                                                               {"value_vi.csv", "vi"}}
            : std::vector<std::pair<std::string, std::string>>{{"value.csv", algo}};
    for (const auto& [file, label] : fields) {
      const ScalarField V = load_scalar_field((root / file).string());
      const BellmanResidual res = bellman_residual(built.spec, V, cfg.solve.greedy);
      Certificate cert;
      cert.subject = "bellman-residual(" + label + ")";
      cert.passed = res.residual <= tol.eps_bellman;
      cert.worst = {res.node, res.x, -1, res.residual};
      cert.details.push_back({"sup |V - TV|", cert.passed, res.residual, tol.eps_bellman, ""});
      report(std::move(cert));
    }
  }

  // Uniqueness proxy on the converged field.
  {
    const std::string file = mode == "compare" ? "value_pi.csv" : "value.csv";
    const ScalarField V = load_scalar_field((root / file).string());
    SolveOptions opts = cfg.solve;
    opts.tol = tol;
    Certificate cert = check_uniqueness(built.spec, V, 0.1, opts, cfg.seed);
    report(std::move(cert));
  }

  fs::create_directories(root / "certs");
  json consolidated;
  consolidated["run"] = run_dir;
  consolidated["passed"] = !any_failed;
  consolidated["certificates"] = json::array();
  for (const auto& c : certs) consolidated["certificates"].push_back(certificate_to_json(c));
  write_json(consolidated, (root / "certs" / "diagnose.json").string());

  if (any_failed) {
    out << "diagnose: FAIL\n";
    return 3;
  }
  out << (any_warning ? "diagnose: PASS (with warnings)\n" : "diagnose: PASS\n");
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

inline Vec parse_vector_arg(const std::string& s) {
  Vec out;
  for (const std::string& tok : adp::detail::split(s, ",")) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw config_error("cannot parse vector component '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline int cli_main(std::vector<std::string> args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Grid-based approximate dynamic programming solver (PI / VI / MLPI)"};
  app.require_subcommand(1);

  std::string config_path, out_dir, algo, policy_path, x0_str, run_dir;
  int lookahead = 0, horizon = 50;
  long long seed = -1;
  bool snapshots = false, no_snapshots = false, timings = false;

  auto add_config_opts = [&](CLI::App* cmd, bool with_algo) {
    cmd->add_option("--config", config_path, "run configuration JSON")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "sampling seed (overrides config)");
    cmd->add_flag("--snapshots", snapshots, "persist per-iteration fields");
    cmd->add_flag("--no-snapshots", no_snapshots, "disable per-iteration fields");
    cmd->add_flag("--timings", timings, "write measured wall_ms into trace CSVs");
    if (with_algo) {
      cmd->add_option("--algo", algo, "pi | vi | mlpi (overrides config)");
      cmd->add_option("--lookahead", lookahead, "MLPI look-ahead depth (overrides config)");
    }
  };

  CLI::App* solve = app.add_subcommand("solve", "run one solver and persist its artifacts");
  add_config_opts(solve, true);

  CLI::App* compare =
      app.add_subcommand("compare", "run PI and VI from one shared admissible evaluation");
  add_config_opts(compare, false);

  CLI::App* rollout = app.add_subcommand("rollout", "roll a stored policy forward from x0");
  rollout->add_option("--config", config_path, "run configuration JSON (defines the system)")
      ->required();
  rollout->add_option("--policy", policy_path, "policy field CSV")->required();
  rollout->add_option("--x0", x0_str, "initial state, comma separated")->required();
  rollout->add_option("--horizon", horizon, "number of steps (default 50)");

  CLI::App* diagnose = app.add_subcommand("diagnose", "replay verification checks on a run");
  diagnose->add_option("--run", run_dir, "run directory (with summary.json)")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    auto load_cfg = [&]() {
      RunConfig cfg = parse_config(read_json(config_path));
      if (!out_dir.empty()) {
        cfg.out_dir = out_dir;
        cfg.echo["out"] = out_dir;
      }
      if (!algo.empty()) {
        if (algo != "pi" && algo != "vi" && algo != "mlpi")
          throw config_error("--algo must be pi, vi or mlpi");
        cfg.algorithm = algo;
        cfg.echo["algorithm"] = algo;
      }
      if (lookahead > 0) {
        cfg.lookahead_steps = lookahead;
        cfg.solve.lookahead_steps = lookahead;
        cfg.echo["lookahead_steps"] = lookahead;
      }
      if (seed >= 0) {
        cfg.seed = static_cast<unsigned>(seed);
        cfg.solve.seed = cfg.seed;
        cfg.echo["seed"] = cfg.seed;
      }
      if (snapshots) {
        cfg.snapshots = true;
        cfg.echo["snapshots"] = true;
      }
      if (no_snapshots) {
        cfg.snapshots = false;
        cfg.echo["snapshots"] = false;
      }
      if (timings) {
        cfg.timings = true;
        cfg.echo["timings"] = true;
      }
      return cfg;
    };

    if (solve->parsed()) return cmd_solve(load_cfg(), out);
    if (compare->parsed()) return cmd_compare(load_cfg(), out);
    if (rollout->parsed())
      return cmd_rollout(load_cfg(), policy_path, parse_vector_arg(x0_str), horizon, out);
    if (diagnose->parsed()) return cmd_diagnose(run_dir, out);
    err << "error: no subcommand\n";
    return 1;
  } catch (const error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cli
}  // namespace adp
