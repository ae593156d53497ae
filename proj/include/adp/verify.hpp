#pragma once

#include "adp/backup.hpp"

namespace adp {

// Numerical slack for the exact-arithmetic properties being checked. Values are
// absolute; for_scale() produces the documented defaults relative to a value
// scale (typically max V^0 over the grid).
struct Tolerances {
  double eps_mono = 1e-6;     // allowed pointwise increase in a decreasing sequence
  double eps_dom = 1e-6;      // dominance slack
  double eps_bellman = 5e-3;  // Bellman residual / field agreement threshold
  int rollout_horizon = 200;
  double eps_state = 1e-3;  // terminal state-norm threshold for stabilization

  static Tolerances for_scale(double value_scale) {
    Tolerances t;
    t.eps_mono = 1e-6 * value_scale;
    t.eps_dom = 1e-6 * value_scale;
    t.eps_bellman = 5e-3 * value_scale;
    return t;
  }
};

struct Certificate {
  std::string subject;
  bool passed = false;
  bool inconclusive = false;  // the check could not be carried out
  bool vacuous = false;       // premise not satisfied; conclusion untested

  struct Witness {
    std::size_t node = 0;
    Vec x;
    int iteration = -1;
    double margin = 0.0;
  };
  Witness worst;

  struct Row {
    std::string check;
    bool passed = true;
    double margin = 0.0;
    double threshold = 0.0;
    std::string note;
  };
  std::vector<Row> details;
};

// Descent check: a PI (or MLPI) value sequence must be pointwise
// nonincreasing up to eps_mono. The witness is the worst (iteration, node).
inline Certificate check_monotone(const std::vector<ScalarField>& fields, const Tolerances& tol) {
  if (fields.size() < 2) throw config_error("check_monotone: need at least 2 fields");
  for (std::size_t i = 1; i < fields.size(); ++i)
    if (!(fields[i].grid == fields[0].grid))
      throw config_error("check_monotone: fields live on different grids");

  Certificate cert;
  cert.subject = "monotone";
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_node = 0;
  int worst_iter = 0;
  for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
    const Vec& a = fields[i].values;
    const Vec& b = fields[i + 1].values;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double inc = b[k] - a[k];
      if (inc > worst) {
        worst = inc;
        worst_node = k;
        worst_iter = static_cast<int>(i);
      }
    }
  }
  cert.worst = {worst_node, fields[0].grid.coords_of(worst_node), worst_iter, worst};
  cert.passed = worst <= tol.eps_mono;
  cert.details.push_back({"max pointwise increase", cert.passed, worst, tol.eps_mono, ""});
  return cert;
}

// Dominance check: with both sequences started from the same admissible
// evaluation, PI iterates must dominate VI iterates pointwise from below,
// V^i <= W^i + eps_dom. Initialization mismatch is a precondition violation
// and is refused. Iterations-to-tolerance for both sequences are reported
// informationally; only the pointwise inequality is pass/fail.
inline Certificate check_dominance(const std::vector<ScalarField>& pi_fields,
                                   const std::vector<ScalarField>& vi_fields,
                                   const Tolerances& tol) {
  if (pi_fields.empty() || vi_fields.empty())
    throw config_error("check_dominance: empty field sequence");
  if (!(pi_fields[0].grid == vi_fields[0].grid))
    throw config_error("check_dominance: sequences live on different grids");
  const double init_gap = sup_diff(pi_fields[0].values, vi_fields[0].values);
  if (init_gap > tol.eps_dom)
    throw refusal_error("check_dominance: V^0 != W^0 (sup difference " + format_full(init_gap) +
                        "); the comparison requires both sequences to start from the same "
                        "admissible-policy evaluation");

  Certificate cert;
  cert.subject = "dominance";
  const std::size_t common = std::min(pi_fields.size(), vi_fields.size());
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_node = 0;
  int worst_iter = 0;
  for (std::size_t i = 0; i < common; ++i) {
    const Vec& v = pi_fields[i].values;
    const Vec& w = vi_fields[i].values;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double gap = v[k] - w[k];
      if (gap > worst) {
        worst = gap;
        worst_node = k;
        worst_iter = static_cast<int>(i);
      }
    }
  }
  cert.worst = {worst_node, pi_fields[0].grid.coords_of(worst_node), worst_iter, worst};
  cert.passed = worst <= tol.eps_dom;
  cert.details.push_back(
      {"max over common iterations of V_pi - V_vi", cert.passed, worst, tol.eps_dom, ""});

  auto iters_to_tol = [&](const std::vector<ScalarField>& seq) {
    for (std::size_t i = 1; i < seq.size(); ++i)
      if (sup_diff(seq[i].values, seq[i - 1].values) < tol.eps_dom) return static_cast<int>(i);
    return static_cast<int>(seq.size());
  };
  cert.details.push_back({"iterations to tolerance (pi)", true,
                          static_cast<double>(iters_to_tol(pi_fields)), 0.0, "informational"});
  cert.details.push_back({"iterations to tolerance (vi)", true,
                          static_cast<double>(iters_to_tol(vi_fields)), 0.0, "informational"});
  return cert;
}

// Default start states for admissibility rollouts: every corner of the domain
// box plus `interior` seeded samples.
inline std::vector<Vec> default_start_states(const BoxGrid& grid, int interior, unsigned seed) {
  std::vector<Vec> starts;
  const int n = grid.dims();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    Vec x(n);
    for (int d = 0; d < n; ++d) x[d] = ((mask >> d) & 1u) ? grid.upper()[d] : grid.lower()[d];
    starts.push_back(std::move(x));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < interior; ++k) {
    Vec x(n);
    for (int d = 0; d < n; ++d)
      x[d] = grid.lower()[d] + unit(rng) * (grid.upper()[d] - grid.lower()[d]);
    starts.push_back(std::move(x));
  }
  return starts;
}

// Rollout-based admissibility certificate, the artifact's operational proxy
// for Definition-2 membership: from every start state the closed loop under
// the interpolated policy must reach a terminal norm below eps_state within
// the horizon, with a finite accumulated cost consistent with the evaluated
// value function. The cost-consistency slack tolerates the discrepancy
// between the interpolated-policy trajectory and the node-table fixed point.
inline Certificate certify_admissible(const ProblemSpec& spec, const PolicyField& h,
                                      const Tolerances& tol, std::vector<Vec> start_states = {},
                                      unsigned seed = 20240902u,
                                      const EvalOptions& eval_opts = EvalOptions{}) {
  Certificate cert;
  cert.subject = "admissible";

  PolicyEvaluation ev = evaluate_policy(spec, h, eval_opts);
  if (!ev.converged) {
    cert.passed = false;
    cert.details.push_back({"policy evaluation", false, ev.residual, eval_opts.tol_eval,
                            "policy evaluation did not converge; value function is not finite on "
                            "the grid"});
    return cert;
  }

  if (start_states.empty()) start_states = default_start_states(spec.domain, 20, seed);

  const int n = spec.domain.dims();
  long long excursions = 0;
  bool all_ok = true;
  double worst_norm = -1.0;
  Vec worst_x;

  for (const Vec& x0 : start_states) {
    if (static_cast<int>(x0.size()) != n)
      throw config_error("certify_admissible: start state dimension mismatch");
    if (!spec.domain.contains(x0))
      throw config_error("certify_admissible: start state outside the domain");

    Vec x = x0, xn(n);
    double acc = 0.0;
    for (int k = 0; k < tol.rollout_horizon; ++k) {
      const Vec u = interpolate_policy(h, x);
      spec.system.step(x, u, xn);
      if (!all_finite(xn)) {
        acc = std::numeric_limits<double>::infinity();
        break;
      }
      bool moved = false;
      clamp_to_domain_inplace(spec.domain, xn, &moved);
      if (moved) ++excursions;
      acc += spec.cost.evaluate(x, u);
      x = xn;
    }

    const double terminal = norm2(x);
    const double value_at_start = interpolate(ev.value, x0);
    const double cost_slack = tol.eps_bellman + 0.05 * std::max(1.0, value_at_start);
    const bool stabilized = terminal < tol.eps_state;
    const bool cost_ok = std::isfinite(acc) && acc <= value_at_start + cost_slack;

    Certificate::Row row;
    row.check = "rollout from (" + format_vec(x0) + ")";
    row.margin = terminal;
    row.threshold = tol.eps_state;
    row.passed = stabilized && cost_ok;
    if (!stabilized) row.note = "terminal norm above threshold";
    if (!cost_ok)
      row.note += std::string(row.note.empty() ? "" : "; ") + "accumulated cost " +
                  format_full(acc) + " inconsistent with evaluated value " +
                  format_full(value_at_start);
    cert.details.push_back(std::move(row));

    if (!stabilized || !cost_ok) all_ok = false;
    if (terminal > worst_norm) {
      worst_norm = terminal;
      worst_x = x0;
    }
  }

  cert.passed = all_ok;
  cert.worst = {0, worst_x, -1, worst_norm};
  cert.details.push_back({"excursions during rollouts", true, static_cast<double>(excursions), 0.0,
                          "informational"});
  return cert;
}

struct BellmanResidual {
  double residual = 0.0;
  std::size_t node = 0;
  Vec x;
};

// Sup over nodes of |V(x) - min_u (U(x,u) + V(f(x,u)))|: the fixed-point
// defect of a value field.
inline BellmanResidual bellman_residual(const ProblemSpec& spec, const ScalarField& V,
                                        const GreedyOptions& opts) {
  if (!(V.grid == spec.domain))
    throw config_error("bellman_residual: field grid does not match problem domain");
  BellmanResidual out;
  out.residual = -1.0;  // any node beats this, so the witness is always set
  const std::size_t count = spec.domain.node_count();
  Vec x(spec.domain.dims());
  for (std::size_t i = 0; i < count; ++i) {
    spec.domain.coords_of(i, x);
    const GreedyResult g = greedy_control(spec, x, V, opts);
    const double r = std::abs(V.values[i] - g.q);
    if (r > out.residual) {
      out.residual = r;
      out.node = i;
      out.x = x;
    }
  }
  return out;
}

// Policy-comparison implication check. With both policies certified
// admissible, tests the premise
//   U(x,h(x)) + V_g(f(x,h(x))) <= V_g(x)   at every node,
// and, where it holds everywhere, asserts the conclusion V_h <= V_g at every
// node. A failing premise makes the implication vacuous, which is reported
// but is not a failure.
inline Certificate check_lemma1(const ProblemSpec& spec, const PolicyField& h,
                                const PolicyField& g, const Tolerances& tol,
                                const EvalOptions& eval_opts = EvalOptions{}) {
  Certificate ch = certify_admissible(spec, h, tol);
  Certificate cg = certify_admissible(spec, g, tol);
  if (!ch.passed || !cg.passed)
    throw refusal_error("check_lemma1: both policies must be certified admissible");

  Certificate cert;
  cert.subject = "lemma1";

  const PolicyEvaluation evg = evaluate_policy(spec, g, eval_opts);
  const std::size_t count = spec.domain.node_count();
  const int n = spec.domain.dims();
  Vec x(n), u(spec.system.control_dim), xn(n);

  double premise_worst = -std::numeric_limits<double>::infinity();
  std::size_t premise_node = 0;
  for (std::size_t i = 0; i < count; ++i) {
    spec.domain.coords_of(i, x);
    const auto uc = h.control_at(i);
    u.assign(uc.begin(), uc.end());
    const double lhs = detail::q_value(spec, x, u, evg.value, xn, nullptr);
    const double margin = lhs - evg.value.values[i];
    if (margin > premise_worst) {
      premise_worst = margin;
      premise_node = i;
    }
  }
  const bool premise_holds = premise_worst <= tol.eps_mono;
  cert.details.push_back({"premise: U(x,h(x)) + V_g(f(x,h(x))) - V_g(x)", premise_holds,
                          premise_worst, tol.eps_mono, ""});
  if (!premise_holds) {
    cert.vacuous = true;
    cert.passed = true;
    cert.worst = {premise_node, spec.domain.coords_of(premise_node), -1, premise_worst};
    cert.details.back().note = "premise not satisfied; conclusion not tested (vacuous)";
    return cert;
  }

  const PolicyEvaluation evh = evaluate_policy(spec, h, eval_opts);
  double concl_worst = -std::numeric_limits<double>::infinity();
  std::size_t concl_node = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double gap = evh.value.values[i] - evg.value.values[i];
    if (gap > concl_worst) {
      concl_worst = gap;
      concl_node = i;
    }
  }
  cert.passed = concl_worst <= tol.eps_mono;
  cert.worst = {concl_node, spec.domain.coords_of(concl_node), -1, concl_worst};
  cert.details.push_back(
      {"conclusion: V_h - V_g", cert.passed, concl_worst, tol.eps_mono, ""});
  return cert;
}

}  // namespace adp
