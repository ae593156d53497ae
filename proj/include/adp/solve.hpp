#pragma once

#include <chrono>

#include "adp/verify.hpp"

namespace adp {

struct SolveOptions {
  double tol_outer = 1e-6;  // sup-norm change of the value field for termination
  int max_iters = 100;
  EvalOptions eval{};
  GreedyOptions greedy{};
  int lookahead_steps = 1;        // policy-update look-ahead depth; 1 is plain PI
  bool require_admissible = true;  // gate PI/MLPI starts on the admissibility certificate
  unsigned seed = 0;               // seeds the gate's interior start-state sample
  Tolerances tol{};
};

struct IterationRecord {
  int iteration = 0;
  double supnorm_delta = 0.0;
  double bellman_residual = 0.0;
  double mono_margin = 0.0;  // max pointwise increase V^{i+1} - V^i
  int eval_sweeps = 0;
  long long excursions = 0;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<IterationRecord> rows;
};

struct SolveResult {
  ScalarField value;
  PolicyField policy;
  RunTrace trace;
  bool converged = false;
  std::string algorithm;  // pi | vi | mlpi
  std::vector<ScalarField> value_history;    // V^0 .. V^last
  std::vector<PolicyField> policy_history;   // h^0 .. h^last (PI/MLPI); g^0 .. (VI)
  bool evaluation_diverged = false;
  std::string diagnostic;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Shared PI/MLPI loop: alternate full policy evaluation with a policy update
// that is greedy with respect to the (steps-1)-fold backed-up value. With
// steps = 1 this is exactly the classic PI update, so "pi" runs and "mlpi"
// runs with n = 1 produce bit-identical traces by construction.
inline SolveResult run_policy_iteration(const ProblemSpec& spec, const PolicyField& h0,
                                        const SolveOptions& opts, int steps,
                                        const std::string& algorithm) {
  if (steps < 1) throw config_error("policy iteration: lookahead steps must be >= 1");
  if (opts.tol_outer <= 0.0) throw config_error("policy iteration: tol_outer must be positive");
  if (opts.max_iters < 0) throw config_error("policy iteration: max_iters must be >= 0");
  origin_node_checked(spec.domain);

  if (opts.require_admissible) {
    const Certificate gate = certify_admissible(spec, h0, opts.tol, {}, opts.seed, opts.eval);
    if (!gate.passed) {
      std::string diag = "initial policy failed the admissibility certificate";
      for (const auto& row : gate.details)
        if (!row.passed) {
          diag += "; " + row.check + (row.note.empty() ? "" : (": " + row.note));
          break;
        }
      throw refusal_error(diag);
    }
  }

  SolveResult result;
  result.algorithm = algorithm;

  PolicyEvaluation ev0 = evaluate_policy(spec, h0, opts.eval);
  if (!ev0.converged) {
    result.evaluation_diverged = true;
    result.diagnostic = "evaluation of the initial policy did not converge";
    result.value = std::move(ev0.value);
    result.policy = h0;
    result.value_history.push_back(result.value);
    result.policy_history.push_back(h0);
    return result;
  }

  ScalarField V = std::move(ev0.value);
  result.value_history.push_back(V);
  result.policy_history.push_back(h0);

  for (int i = 0; i < opts.max_iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    long long excursions = 0;

    // n-step look-ahead policy update; the first inner backup doubles as the
    // Bellman residual of V^i.
    ScalarField first_backup;
    Backup upd = lookahead_backup(spec, V, steps, opts.greedy, &excursions, &first_backup);
    const double residual = sup_diff(V.values, first_backup.values);

    PolicyEvaluation ev = evaluate_policy(spec, upd.policy, opts.eval, &excursions);
    if (!ev.converged) {
      result.evaluation_diverged = true;
      result.diagnostic =
          "policy evaluation diverged at iteration " + std::to_string(i) +
          "; the updated policy is not admissible on this grid";
      result.value = V;
      result.policy = result.policy_history.back();
      return result;
    }

    IterationRecord row;
    row.iteration = i;
    row.supnorm_delta = sup_diff(ev.value.values, V.values);
    row.bellman_residual = residual;
    row.mono_margin = max_increase(V.values, ev.value.values);
    row.eval_sweeps = ev.sweeps;
    row.excursions = excursions;
    row.wall_ms = elapsed_ms(t0);
    result.trace.rows.push_back(row);

    V = std::move(ev.value);
    result.value_history.push_back(V);
    result.policy_history.push_back(upd.policy);

    if (row.supnorm_delta < opts.tol_outer) {
      result.converged = true;
      break;
    }
  }

  result.value = V;
  result.policy = result.policy_history.back();
  return result;
}

}  // namespace detail

// Policy iteration from an admissible initial policy (Eqs of the PI loop:
// full policy evaluation alternated with the greedy policy update). The
// admissibility gate refuses a non-certified start unless overridden.
inline SolveResult run_pi(const ProblemSpec& spec, const PolicyField& h0,
                          const SolveOptions& opts) {
  return detail::run_policy_iteration(spec, h0, opts, 1, "pi");
}

// Multi-step look-ahead policy iteration; lookahead_steps = 1 reproduces
// run_pi exactly, including traces.
inline SolveResult run_mlpi(const ProblemSpec& spec, const PolicyField& h0,
                            const SolveOptions& opts) {
  return detail::run_policy_iteration(spec, h0, opts, opts.lookahead_steps, "mlpi");
}

// Value iteration from a nonnegative initial field (no admissibility
// requirement; W0 = 0 is the canonical cold start).
inline SolveResult run_vi(const ProblemSpec& spec, const ScalarField& W0,
                          const SolveOptions& opts) {
  if (!(W0.grid == spec.domain))
    throw config_error("run_vi: initial field grid does not match problem domain");
  if (opts.tol_outer <= 0.0) throw config_error("run_vi: tol_outer must be positive");
  for (double v : W0.values)
    if (!(v >= 0.0)) throw config_error("run_vi: initial field must be nonnegative");
  origin_node_checked(spec.domain);

  SolveResult result;
  result.algorithm = "vi";

  ScalarField W = W0;
  result.value_history.push_back(W);

  for (int i = 0; i < opts.max_iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    long long excursions = 0;
    Backup b = vi_backup(spec, W, opts.greedy, &excursions);

    IterationRecord row;
    row.iteration = i;
    row.supnorm_delta = sup_diff(b.value.values, W.values);
    // For VI the Bellman residual of W^i is exactly the sweep delta.
    row.bellman_residual = row.supnorm_delta;
    row.mono_margin = max_increase(W.values, b.value.values);
    row.eval_sweeps = 0;
    row.excursions = excursions;
    row.wall_ms = detail::elapsed_ms(t0);
    result.trace.rows.push_back(row);

    W = std::move(b.value);
    result.value_history.push_back(W);
    result.policy_history.push_back(std::move(b.policy));

    if (row.supnorm_delta < opts.tol_outer) {
      result.converged = true;
      break;
    }
  }

  result.value = W;
  if (!result.policy_history.empty()) result.policy = result.policy_history.back();
  return result;
}

// Uniqueness probe: perturb a converged field by bounded nonnegative noise
// (zero at the origin node), extract the greedy policy, rerun PI from it, and
// require the reconverged field to agree with the original everywhere within
// eps_bellman. Reconvergence failure is inconclusive, not a failure.
inline Certificate check_uniqueness(const ProblemSpec& spec, const ScalarField& V,
                                    double perturbation_scale, const SolveOptions& opts,
                                    unsigned seed = 20240903u) {
  if (!(V.grid == spec.domain))
    throw config_error("check_uniqueness: field grid does not match problem domain");
  Certificate cert;
  cert.subject = "uniqueness";

  const double scale = sup_norm(V.values);
  ScalarField perturbed = V;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : perturbed.values) v += perturbation_scale * scale * unit(rng);
  if (auto origin = spec.domain.origin_node()) perturbed.values[*origin] = V.values[*origin];

  const PolicyField h = vi_backup(spec, perturbed, opts.greedy).policy;

  SolveResult rerun;
  try {
    rerun = run_pi(spec, h, opts);
  } catch (const refusal_error& e) {
    cert.inconclusive = true;
    cert.details.push_back({"reconvergence", false, 0.0, 0.0,
                            std::string("greedy policy of the perturbed field is not admissible: ") +
                                e.what()});
    return cert;
  }
  if (!rerun.converged) {
    cert.inconclusive = true;
    cert.details.push_back({"reconvergence", false, 0.0, 0.0,
                            rerun.evaluation_diverged
                                ? "policy evaluation diverged during the rerun"
                                : "rerun exhausted its iteration budget"});
    return cert;
  }

  double worst = 0.0;
  std::size_t worst_node = 0;
  for (std::size_t k = 0; k < V.values.size(); ++k) {
    const double gap = std::abs(rerun.value.values[k] - V.values[k]);
    if (gap > worst) {
      worst = gap;
      worst_node = k;
    }
  }
  cert.worst = {worst_node, spec.domain.coords_of(worst_node), -1, worst};
  cert.passed = worst <= opts.tol.eps_bellman;
  cert.details.push_back({"sup |reconverged - original|", cert.passed, worst,
                          opts.tol.eps_bellman, ""});
  return cert;
}

}  // namespace adp
