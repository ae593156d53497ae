#pragma once

#include <functional>
#include <random>

#include "adp/grid.hpp"

namespace adp {

using StepFn = std::function<void(const Vec& x, const Vec& u, Vec& out)>;
using CostFn = std::function<double(const Vec& x, const Vec& u)>;

// Deterministic discrete-time dynamics x' = f(x, u) with f(0,0) = 0.
struct ControlSystem {
  int state_dim = 0;
  int control_dim = 0;
  StepFn step;
};

// Stage cost U(x, u) >= 0, zero at (0,0), positive definite in u.
struct StageCost {
  CostFn evaluate;
};

// Compact box of admissible controls together with the per-dimension sample
// resolution used for argmin enumeration. The sample lattice always contains
// u = 0 exactly; that makes "do nothing" a candidate everywhere, which is what
// pins greedy policies to zero at the origin.
class ControlSet {
 public:
  ControlSet() = default;

  ControlSet(Vec lower, Vec upper, std::vector<int> samples_per_dim)
      : lower_(std::move(lower)), upper_(std::move(upper)), samples_(std::move(samples_per_dim)) {
    const std::size_t m = lower_.size();
    if (m == 0 || upper_.size() != m || samples_.size() != m)
      throw config_error("ControlSet: dimension mismatch between lower/upper/samples");
    if (!all_finite(lower_) || !all_finite(upper_))
      throw config_error("ControlSet: non-finite bounds");
    axes_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!(lower_[j] <= upper_[j])) throw config_error("ControlSet: lower > upper");
      if (lower_[j] > 0.0 || upper_[j] < 0.0)
        throw config_error("ControlSet: zero control must lie inside the box");
      if (samples_[j] < 2) throw config_error("ControlSet: need at least 2 samples per dimension");
      const double span = upper_[j] - lower_[j];
      const double step = span / static_cast<double>(samples_[j] - 1);
      const double snap = 1e-12 * std::max(std::abs(lower_[j]), std::abs(upper_[j]));
      axes_[j].resize(samples_[j]);
      bool has_zero = false;
      for (int i = 0; i < samples_[j]; ++i) {
        double c = (i == samples_[j] - 1) ? upper_[j] : lower_[j] + i * step;
        if (std::abs(c) <= snap) c = 0.0;
        axes_[j][i] = c;
        has_zero |= (c == 0.0);
      }
      if (!has_zero)
        throw config_error("ControlSet: sample lattice must contain u = 0 exactly (dimension " +
                           std::to_string(j + 1) + ")");
    }
    // Flattened lattice, point-major, same ordering convention as BoxGrid.
    std::size_t count = 1;
    for (int k : samples_) count *= static_cast<std::size_t>(k);
    lattice_.resize(count * m);
    std::vector<int> idx(m, 0);
    for (std::size_t p = 0; p < count; ++p) {
      for (std::size_t j = 0; j < m; ++j) lattice_[p * m + j] = axes_[j][idx[j]];
      for (int j = static_cast<int>(m) - 1; j >= 0; --j) {
        if (++idx[j] < samples_[j]) break;
        idx[j] = 0;
      }
    }
  }

  int dims() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const std::vector<int>& samples_per_dim() const { return samples_; }
  double sample_coord(int dim, int i) const { return axes_[dim][i]; }
  double cell_width(int dim) const {
    return (upper_[dim] - lower_[dim]) / static_cast<double>(samples_[dim] - 1);
  }

  std::size_t lattice_size() const { return lattice_.size() / static_cast<std::size_t>(dims()); }
  std::span<const double> lattice_point(std::size_t i) const {
    const std::size_t m = static_cast<std::size_t>(dims());
    return {lattice_.data() + i * m, m};
  }

  void clamp(Vec& u) const {
    for (int j = 0; j < dims(); ++j) u[j] = std::min(std::max(u[j], lower_[j]), upper_[j]);
  }

  bool contains(const Vec& u) const {
    for (int j = 0; j < dims(); ++j)
      if (u[j] < lower_[j] || u[j] > upper_[j]) return false;
    return true;
  }

 private:
  Vec lower_, upper_;
  std::vector<int> samples_;
  std::vector<Vec> axes_;
  Vec lattice_;
};

// The full problem statement every solver operates on. Immutable after
// construction; operations are pure, so it is safe to share across workers.
struct ProblemSpec {
  ControlSystem system;
  StageCost cost;
  BoxGrid domain;
  ControlSet controls;
};

inline std::size_t origin_node_checked(const BoxGrid& g) {
  const auto o = g.origin_node();
  if (!o) throw config_error("domain grid does not contain the origin as an exact node");
  return *o;
}

using PolicyFn = std::function<void(const Vec& x, Vec& u)>;

// Tabulates a feedback law on the grid, clamping each stored control into the
// control box and attaching the bounds.
inline PolicyField make_policy_field(const BoxGrid& grid, const ControlSet& controls,
                                     const PolicyFn& fn) {
  PolicyField h = PolicyField::zeros(grid, controls.dims());
  h.bound_lower = controls.lower();
  h.bound_upper = controls.upper();
  Vec x(grid.dims()), u(controls.dims());
  const std::size_t count = grid.node_count();
  for (std::size_t i = 0; i < count; ++i) {
    grid.coords_of(i, x);
    fn(x, u);
    if (!all_finite(u))
      throw model_error("policy function produced a non-finite control at x=(" + format_vec(x) +
                        ")");
    controls.clamp(u);
    auto dst = h.control_at(i);
    for (int j = 0; j < controls.dims(); ++j) dst[j] = u[j];
  }
  return h;
}

inline ScalarField make_value_field(const BoxGrid& grid,
                                    const std::function<double(const Vec&)>& fn) {
  ScalarField f = ScalarField::zeros(grid);
  Vec x(grid.dims());
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    grid.coords_of(i, x);
    f.values[i] = fn(x);
  }
  return f;
}

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string message;
  Vec witness_x, witness_u;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

// Spot-checks the model contracts by finite sampling: origin fixed point,
// cost sign contracts, and the requirement that no nonzero state can sit in
// a zero-cost invariant set of the uncontrolled dynamics. Sampling-based,
// not a proof; deterministic for a fixed seed.
inline ValidationReport validate_problem(const ProblemSpec& spec, int sample_count,
                                         unsigned seed = 20240901u) {
  if (spec.system.state_dim != spec.domain.dims())
    throw config_error("validate_problem: state dimension does not match domain grid");
  if (spec.system.control_dim != spec.controls.dims())
    throw config_error("validate_problem: control dimension does not match control set");
  if (sample_count < 1) throw config_error("validate_problem: sample_count must be positive");
  origin_node_checked(spec.domain);

  const int n = spec.system.state_dim;
  const int m = spec.system.control_dim;
  ValidationReport report;

  const Vec x0(n, 0.0), u0(m, 0.0);
  Vec out(n);

  {
    ValidationCheck c{"origin-fixed-point"};
    spec.system.step(x0, u0, out);
    for (int d = 0; d < n; ++d) {
      if (out[d] != 0.0) {
        c.passed = false;
        c.message = "f(0,0) = (" + format_vec(out) + ") != 0";
        c.witness_x = x0;
        c.witness_u = u0;
        break;
      }
    }
    report.checks.push_back(std::move(c));
  }

  {
    ValidationCheck c{"cost-zero-at-origin"};
    const double v = spec.cost.evaluate(x0, u0);
    if (v != 0.0) {
      c.passed = false;
      c.message = "U(0,0) = " + format_full(v);
      c.witness_x = x0;
      c.witness_u = u0;
    }
    report.checks.push_back(std::move(c));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_box = [&](const Vec& lo, const Vec& hi, Vec& dst) {
    dst.resize(lo.size());
    for (std::size_t d = 0; d < lo.size(); ++d) dst[d] = lo[d] + unit(rng) * (hi[d] - lo[d]);
  };

  ValidationCheck nonneg{"cost-nonnegative"};
  ValidationCheck posdef{"cost-positive-definite-in-control"};
  Vec xs, us;
  for (int k = 0; k < sample_count; ++k) {
    sample_box(spec.domain.lower(), spec.domain.upper(), xs);
    sample_box(spec.controls.lower(), spec.controls.upper(), us);
    const double v = spec.cost.evaluate(xs, us);
    if (nonneg.passed && (!std::isfinite(v) || v < 0.0)) {
      nonneg.passed = false;
      nonneg.message = "U = " + format_full(v);
      nonneg.witness_x = xs;
      nonneg.witness_u = us;
    }
    if (posdef.passed && norm2(us) > 1e-9 && !(v > 0.0)) {
      posdef.passed = false;
      posdef.message = "U(x,u) = " + format_full(v) + " with u != 0";
      posdef.witness_x = xs;
      posdef.witness_u = us;
    }
  }
  report.checks.push_back(std::move(nonneg));
  report.checks.push_back(std::move(posdef));

  // Assumption-2 proxy: a sampled nonzero state with U(x,0) ~ 0 whose
  // zero-control trajectory keeps zero cost without contracting toward the
  // origin marks a place where trajectories could hide from the cost.
  {
    ValidationCheck c{"zero-cost-states-not-invariant"};
    const double zero_tol = 1e-12;
    const int horizon = 64;
    Vec x, xn(n);
    for (int k = 0; k < sample_count && c.passed; ++k) {
      sample_box(spec.domain.lower(), spec.domain.upper(), x);
      const double start_norm = norm2(x);
      if (start_norm < 1e-9) continue;
      if (spec.cost.evaluate(x, u0) > zero_tol) continue;
      Vec cur = x;
      bool zero_cost_throughout = true;
      for (int t = 0; t < horizon; ++t) {
        spec.system.step(cur, u0, xn);
        if (!all_finite(xn)) {
          zero_cost_throughout = false;
          break;
        }
        clamp_to_domain_inplace(spec.domain, xn);
        cur = xn;
        if (spec.cost.evaluate(cur, u0) > zero_tol) {
          zero_cost_throughout = false;
          break;
        }
      }
      if (zero_cost_throughout && norm2(cur) >= 0.5 * start_norm) {
        c.passed = false;
        c.message = "zero-cost zero-control trajectory from a nonzero state does not contract "
                    "(terminal norm " +
                    format_full(norm2(cur)) + ")";
        c.witness_x = x;
        c.witness_u = u0;
      }
    }
    report.checks.push_back(std::move(c));
  }

  return report;
}

}  // namespace adp
