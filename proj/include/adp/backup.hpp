#pragma once

#include "adp/model.hpp"

namespace adp {

// Controls how the argmin over the control set is carried out. Enumeration
// over the sample lattice always runs; refinement optionally shrinks a
// coordinate-wise golden-section window (one lattice cell per dimension)
// around the lattice winner. Refinement can only decrease the attained value.
struct GreedyOptions {
  bool refine = true;
  int refine_iters = 2;
  enum class TieBreak { smallest_norm_then_lowest_index } tie_break =
      TieBreak::smallest_norm_then_lowest_index;
};

struct EvalOptions {
  double tol_eval = 1e-9;  // sup-norm sweep-to-sweep stopping threshold
  int max_sweeps = 5000;
};

namespace detail {

// U(x,u) + V(clamp(f(x,u))) with a caller-provided successor buffer.
// Excursions count dynamics evaluations whose successor left the domain.
inline double q_value(const ProblemSpec& spec, const Vec& x, const Vec& u, const ScalarField& V,
                      Vec& xn, long long* excursions) {
  spec.system.step(x, u, xn);
  if (!all_finite(xn))
    throw model_error("dynamics produced a non-finite state at x=(" + format_vec(x) + "), u=(" +
                      format_vec(u) + ")");
  bool moved = false;
  clamp_to_domain_inplace(spec.domain, xn, &moved);
  if (moved && excursions) ++*excursions;
  const double q = spec.cost.evaluate(x, u) + interpolate(V, xn);
  if (!std::isfinite(q))
    throw model_error("stage cost produced a non-finite value at x=(" + format_vec(x) + "), u=(" +
                      format_vec(u) + ")");
  return q;
}

inline double sq_norm(std::span<const double> u) {
  double s = 0.0;
  for (double v : u) s += v * v;
  return s;
}

}  // namespace detail

// One-step cost-to-go estimate: U(x,u) plus the interpolated value of the
// clamped successor state.
inline double one_step_q(const ProblemSpec& spec, const Vec& x, const Vec& u, const ScalarField& V,
                         long long* excursions = nullptr) {
  Vec xn(spec.system.state_dim);
  return detail::q_value(spec, x, u, V, xn, excursions);
}

struct GreedyResult {
  Vec control;
  double q = 0.0;
};

// Minimizes one_step_q over the control sample lattice, with optional bounded
// local refinement. Ties are broken toward the smallest control norm, then the
// lowest lattice index, which pins the result (and every downstream trace)
// bit-for-bit.
inline GreedyResult greedy_control(const ProblemSpec& spec, const Vec& x, const ScalarField& V,
                                   const GreedyOptions& opts, long long* excursions = nullptr) {
  const std::size_t count = spec.controls.lattice_size();
  const int m = spec.controls.dims();
  Vec xn(spec.system.state_dim);
  Vec u(m);

  double best_q = std::numeric_limits<double>::infinity();
  double best_norm = std::numeric_limits<double>::infinity();
  Vec best_u(m, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto pt = spec.controls.lattice_point(i);
    u.assign(pt.begin(), pt.end());
    const double q = detail::q_value(spec, x, u, V, xn, excursions);
    if (q < best_q) {
      best_q = q;
      best_norm = detail::sq_norm(pt);
      best_u = u;
    } else if (q == best_q) {
      const double nrm = detail::sq_norm(pt);
      if (nrm < best_norm) {
        best_norm = nrm;
        best_u = u;
      }
    }
  }

  if (opts.refine && opts.refine_iters > 0) {
    constexpr double invphi = 0.61803398874989485;
    constexpr int golden_iters = 32;
    u = best_u;
    for (int round = 0; round < opts.refine_iters; ++round) {
      for (int d = 0; d < m; ++d) {
        const double cell = spec.controls.cell_width(d);
        double a = std::max(spec.controls.lower()[d], u[d] - cell);
        double b = std::min(spec.controls.upper()[d], u[d] + cell);
        if (!(a < b)) continue;
        auto probe = [&](double v) {
          u[d] = v;
          return detail::q_value(spec, x, u, V, xn, excursions);
        };
        double best_v = u[d];
        double c = b - invphi * (b - a);
        double e = a + invphi * (b - a);
        double qc = probe(c), qe = probe(e);
        if (qc < best_q) {
          best_q = qc;
          best_v = c;
        }
        if (qe < best_q) {
          best_q = qe;
          best_v = e;
        }
        for (int it = 0; it < golden_iters; ++it) {
          if (qc < qe) {
            b = e;
            e = c;
            qe = qc;
            c = b - invphi * (b - a);
            qc = probe(c);
            if (qc < best_q) {
              best_q = qc;
              best_v = c;
            }
          } else {
            a = c;
            c = e;
            qc = qe;
            e = a + invphi * (b - a);
            qe = probe(e);
            if (qe < best_q) {
              best_q = qe;
              best_v = e;
            }
          }
        }
        u[d] = best_v;
      }
    }
    best_u = u;
  }

  return {std::move(best_u), best_q};
}

struct PolicyEvaluation {
  ScalarField value;
  int sweeps = 0;
  double residual = 0.0;
  bool converged = false;
};

// Solves the fixed-point policy-evaluation equation by successive
// substitution from the zero field:
//
//   V <- [x -> U(x, h(x)) + V(f(x, h(x)))]   on every node, double-buffered.
//
// Iterates are the truncated-horizon costs of running h, so they are
// pointwise nondecreasing in the sweep index; failure to converge within the
// sweep budget signals an inadmissible (non-stabilizing) policy and is
// returned as a flagged result rather than thrown.
inline PolicyEvaluation evaluate_policy(const ProblemSpec& spec, const PolicyField& h,
                                        const EvalOptions& opts, long long* excursions = nullptr) {
  if (!(h.grid == spec.domain))
    throw config_error("evaluate_policy: policy grid does not match problem domain");
  if (opts.tol_eval <= 0.0) throw config_error("evaluate_policy: tol_eval must be positive");
  if (opts.max_sweeps < 1) throw config_error("evaluate_policy: max_sweeps must be positive");

  const std::size_t count = spec.domain.node_count();
  const int n = spec.domain.dims();

  // The transition and stage cost per node are fixed for a fixed policy;
  // precompute them, together with the interpolation stencil of the clamped
  // successor. The stencil reproduces interpolate()'s corner order exactly.
  Vec stage(count);
  std::vector<std::size_t> stencil_idx;
  std::vector<double> stencil_w;
  std::vector<std::size_t> offset(count + 1, 0);

  Vec x(n), u(spec.system.control_dim), xn(n);
  detail::CellLocator loc;
  std::array<int, detail::kMaxDims> multi{};
  for (std::size_t i = 0; i < count; ++i) {
    spec.domain.coords_of(i, x);
    const auto uc = h.control_at(i);
    u.assign(uc.begin(), uc.end());
    spec.system.step(x, u, xn);
    if (!all_finite(xn))
      throw model_error("dynamics produced a non-finite state at x=(" + format_vec(x) + "), u=(" +
                        format_vec(u) + ")");
    bool moved = false;
    clamp_to_domain_inplace(spec.domain, xn, &moved);
    if (moved && excursions) ++*excursions;
    stage[i] = spec.cost.evaluate(x, u);
    if (!std::isfinite(stage[i]))
      throw model_error("stage cost produced a non-finite value at x=(" + format_vec(x) + ")");

    detail::locate(spec.domain, xn, loc);
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
      double w = 1.0;
      for (int d = 0; d < n; ++d) {
        const bool hi = (corner >> d) & 1u;
        w *= hi ? loc.frac[d] : 1.0 - loc.frac[d];
        multi[d] = loc.base[d] + (hi ? 1 : 0);
      }
      if (w == 0.0) continue;
      stencil_idx.push_back(spec.domain.index_of(std::span<const int>(multi.data(), n)));
      stencil_w.push_back(w);
    }
    offset[i + 1] = stencil_idx.size();
  }

  Vec cur(count, 0.0), next(count, 0.0);
  PolicyEvaluation result;
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double residual = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      double acc = 0.0;
      for (std::size_t k = offset[i]; k < offset[i + 1]; ++k)
        acc += stencil_w[k] * cur[stencil_idx[k]];
      next[i] = stage[i] + acc;
      residual = std::max(residual, std::abs(next[i] - cur[i]));
    }
    cur.swap(next);
    result.sweeps = sweep;
    result.residual = residual;
    if (residual < opts.tol_eval) {
      result.converged = true;
      break;
    }
  }
  result.value = ScalarField{spec.domain, std::move(cur)};
  return result;
}

struct Backup {
  ScalarField value;
  PolicyField policy;
};

// One greedy backup at every node (the value-update operator), returning the
// backed-up field together with the minimizing policy.
inline Backup vi_backup(const ProblemSpec& spec, const ScalarField& W, const GreedyOptions& opts,
                        long long* excursions = nullptr) {
  if (!(W.grid == spec.domain))
    throw config_error("vi_backup: field grid does not match problem domain");
  const std::size_t count = spec.domain.node_count();
  const int m = spec.system.control_dim;

  Backup out{ScalarField::zeros(spec.domain), PolicyField::zeros(spec.domain, m)};
  out.policy.bound_lower = spec.controls.lower();
  out.policy.bound_upper = spec.controls.upper();

  Vec x(spec.domain.dims());
  for (std::size_t i = 0; i < count; ++i) {
    spec.domain.coords_of(i, x);
    GreedyResult g = greedy_control(spec, x, W, opts, excursions);
    out.value.values[i] = g.q;
    auto dst = out.policy.control_at(i);
    for (int j = 0; j < m; ++j) dst[j] = g.control[j];
  }
  return out;
}

// n-step look-ahead backup: the value output is the steps-fold composition of
// the greedy backup applied to V, and the policy output is greedy with respect
// to the (steps-1)-fold composition — i.e. the first move of the optimal
// n-step control sequence. steps = 1 coincides with vi_backup bit-for-bit.
// first_backup, when given, receives the 1-step composition (used by solver
// traces to report the Bellman residual at no extra cost).
inline Backup lookahead_backup(const ProblemSpec& spec, const ScalarField& V, int steps,
                               const GreedyOptions& opts, long long* excursions = nullptr,
                               ScalarField* first_backup = nullptr) {
  if (steps < 1) throw config_error("lookahead_backup: steps must be >= 1");
  Backup b = vi_backup(spec, V, opts, excursions);
  if (first_backup) *first_backup = b.value;
  for (int s = 2; s <= steps; ++s) b = vi_backup(spec, b.value, opts, excursions);
  return b;
}

// Exact minimum over all length-`steps` control sequences drawn from the
// sample lattice (no refinement) of the truncated cost sum plus the
// interpolated terminal value. Anti-drift oracle for lookahead_backup;
// infeasible beyond the sequence budget.
inline double brute_force_lookahead(const ProblemSpec& spec, const ScalarField& V, const Vec& x,
                                    int steps, long long budget = 10'000'000) {
  if (steps < 1) throw config_error("brute_force_lookahead: steps must be >= 1");
  const std::size_t count = spec.controls.lattice_size();
  double total = 1.0;
  for (int s = 0; s < steps; ++s) {
    total *= static_cast<double>(count);
    if (total > static_cast<double>(budget))
      throw budget_error("brute_force_lookahead: " + std::to_string(count) + "^" +
                         std::to_string(steps) + " sequences exceed the enumeration budget");
  }

  const int m = spec.controls.dims();
  double best = std::numeric_limits<double>::infinity();
  Vec u(m), xn(spec.system.state_dim);

  // Depth-first over sequences; nonnegative stage costs make pruning on the
  // accumulated cost safe.
  auto recurse = [&](auto&& self, const Vec& state, double acc, int depth) -> void {
    if (acc >= best) return;
    if (depth == steps) {
      best = std::min(best, acc + interpolate(V, state));
      return;
    }
    for (std::size_t i = 0; i < count; ++i) {
      const auto pt = spec.controls.lattice_point(i);
      u.assign(pt.begin(), pt.end());
      spec.system.step(state, u, xn);
      if (!all_finite(xn))
        throw model_error("dynamics produced a non-finite state at x=(" + format_vec(state) +
                          "), u=(" + format_vec(u) + ")");
      clamp_to_domain_inplace(spec.domain, xn);
      const double c = spec.cost.evaluate(state, u);
      Vec next = xn;
      self(self, next, acc + c, depth + 1);
    }
  };
  recurse(recurse, x, 0.0, 0);
  return best;
}

}  // namespace adp
