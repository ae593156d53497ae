#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "adp/backup.hpp"

using namespace adp;
using Catch::Matchers::WithinAbs;

namespace {

// scalar x' = x + u with U = x^2 + u^2
ProblemSpec lqr1d(int nodes = 201, int samples = 401, double dom = 1.0, double ubox = 2.0) {
  ProblemSpec spec;
  spec.system = {1, 1, [](const Vec& x, const Vec& u, Vec& out) {
                   out.resize(1);
                   out[0] = x[0] + u[0];
                 }};
  spec.cost = {[](const Vec& x, const Vec& u) { return x[0] * x[0] + u[0] * u[0]; }};
  spec.domain = BoxGrid({-dom}, {dom}, {nodes});
  spec.controls = ControlSet({-ubox}, {ubox}, {samples});
  return spec;
}

PolicyField gain_policy(const ProblemSpec& spec, double k) {
  return make_policy_field(spec.domain, spec.controls, [k](const Vec& x, Vec& u) {
    u.resize(1);
    u[0] = -k * x[0];
  });
}

}  // namespace

TEST_CASE("one_step_q spec examples", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const ScalarField zero = ScalarField::zeros(spec.domain);
  CHECK(one_step_q(spec, {0.0}, {0.0}, zero) == 0.0);
  CHECK(one_step_q(spec, {1.0}, {-1.0}, zero) == 2.0);

  const ScalarField v2 = make_value_field(spec.domain, [](const Vec& x) { return 2 * x[0] * x[0]; });
  CHECK_THAT(one_step_q(spec, {1.0}, {0.0}, v2), WithinAbs(3.0, 1e-15));
}

TEST_CASE("one_step_q counts excursions and rejects bad dynamics", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const ScalarField zero = ScalarField::zeros(spec.domain);
  long long exc = 0;
  one_step_q(spec, {1.0}, {2.0}, zero, &exc);  // successor 3.0 leaves [-1,1]
  CHECK(exc == 1);

  ProblemSpec bad = spec;
  bad.system.step = [](const Vec&, const Vec&, Vec& out) {
    out.assign(1, std::nan(""));
  };
  CHECK_THROWS_AS(one_step_q(bad, {1.0}, {0.0}, zero), model_error);
}

TEST_CASE("greedy at the origin returns the zero control exactly", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const ScalarField v2 = make_value_field(spec.domain, [](const Vec& x) { return 2 * x[0] * x[0]; });
  const GreedyResult g = greedy_control(spec, {0.0}, v2, GreedyOptions{});
  CHECK(g.control[0] == 0.0);
  CHECK(g.q == 0.0);
}

TEST_CASE("greedy with V = 2x^2 matches the closed-form minimizer", "[backup]") {
  // minimize 1 + u^2 + 2(1+u)^2 over u: u* = -2/3, q* = 5/3. The domain is
  // widened so every reachable point is interior.
  const ProblemSpec spec = lqr1d(601, 401, 3.0, 2.0);
  const ScalarField v2 = make_value_field(spec.domain, [](const Vec& x) { return 2 * x[0] * x[0]; });
  const GreedyResult g = greedy_control(spec, {1.0}, v2, GreedyOptions{});
  CHECK_THAT(g.control[0], WithinAbs(-2.0 / 3.0, 1e-2));
  CHECK_THAT(g.q, WithinAbs(5.0 / 3.0, 1e-4));
}

TEST_CASE("greedy with the zero field is the VI first step", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const ScalarField zero = ScalarField::zeros(spec.domain);
  const GreedyResult g = greedy_control(spec, {1.0}, zero, GreedyOptions{});
  CHECK(g.control[0] == 0.0);
  CHECK(g.q == 1.0);
}

TEST_CASE("greedy result never exceeds any lattice candidate", "[backup][property]") {
  const ProblemSpec spec = lqr1d(41, 41);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ScalarField v = ScalarField::zeros(spec.domain);
  for (double& w : v.values) w = 3.0 * unit(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x{-1.0 + 2.0 * unit(rng)};
    const GreedyResult g = greedy_control(spec, x, v, GreedyOptions{});
    for (std::size_t i = 0; i < spec.controls.lattice_size(); ++i) {
      const Vec u(spec.controls.lattice_point(i).begin(), spec.controls.lattice_point(i).end());
      CHECK(g.q <= one_step_q(spec, x, u, v) + 1e-14);
    }
  }
}

TEST_CASE("refinement never increases the greedy value", "[backup][property]") {
  const ProblemSpec spec = lqr1d(41, 21);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ScalarField v = ScalarField::zeros(spec.domain);
  for (double& w : v.values) w = 2.0 * unit(rng);
  GreedyOptions coarse;
  coarse.refine = false;
  GreedyOptions fine;
  fine.refine = true;
  fine.refine_iters = 3;
  for (int trial = 0; trial < 25; ++trial) {
    const Vec x{-1.0 + 2.0 * unit(rng)};
    CHECK(greedy_control(spec, x, v, fine).q <= greedy_control(spec, x, v, coarse).q);
  }
}

TEST_CASE("policy evaluation of the deadbeat gain is exact", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const PolicyEvaluation ev = evaluate_policy(spec, gain_policy(spec, 1.0), EvalOptions{});
  REQUIRE(ev.converged);
  CHECK(ev.sweeps == 2);
  for (std::size_t i = 0; i < spec.domain.node_count(); ++i) {
    const double x = spec.domain.coords_of(i)[0];
    CHECK_THAT(ev.value.values[i], WithinAbs(2.0 * x * x, 1e-14));
  }
}

TEST_CASE("policy evaluation flags a non-stabilizing policy", "[backup]") {
  const ProblemSpec spec = lqr1d(41, 41);
  EvalOptions opts;
  opts.max_sweeps = 50;
  const PolicyEvaluation ev = evaluate_policy(spec, gain_policy(spec, 0.0), opts);
  CHECK_FALSE(ev.converged);
  CHECK(ev.residual >= opts.tol_eval);
}

TEST_CASE("policy evaluation matches the geometric series value", "[backup]") {
  // h(x) = -(2/3)x on x' = x + u: V(x) = (13/9) x^2 / (1 - 1/9) = 1.625 x^2.
  // Interpolation error accumulates along the closed-loop trajectory (about
  // log_3(1/h) cells at c t(1-t) h^2 each), so hitting 1e-6 * scale needs a
  // fine grid.
  const ProblemSpec spec = lqr1d(5001, 41);
  EvalOptions opts;
  opts.tol_eval = 1e-12;
  const PolicyEvaluation ev = evaluate_policy(spec, gain_policy(spec, 2.0 / 3.0), opts);
  REQUIRE(ev.converged);
  const double scale = 1.625;
  for (std::size_t i = 0; i < spec.domain.node_count(); i += 37) {
    const double x = spec.domain.coords_of(i)[0];
    CHECK_THAT(ev.value.values[i], WithinAbs(1.625 * x * x, 1e-6 * scale));
  }
}

TEST_CASE("policy evaluation sweeps are pointwise nondecreasing", "[backup][property]") {
  const ProblemSpec spec = lqr1d(41, 41);
  const PolicyField h = gain_policy(spec, 2.0 / 3.0);
  Vec previous(spec.domain.node_count(), 0.0);
  for (int sweeps = 1; sweeps <= 6; ++sweeps) {
    EvalOptions opts;
    opts.max_sweeps = sweeps;
    opts.tol_eval = 1e-300;  // force exactly `sweeps` sweeps
    const PolicyEvaluation ev = evaluate_policy(spec, h, opts);
    for (std::size_t i = 0; i < previous.size(); ++i)
      CHECK(ev.value.values[i] >= previous[i] - 1e-12);
    previous = ev.value.values;
  }
}

TEST_CASE("vi_backup of the zero field gives the stage-cost floor", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const Backup b = vi_backup(spec, ScalarField::zeros(spec.domain), GreedyOptions{});
  for (std::size_t i = 0; i < spec.domain.node_count(); ++i) {
    const double x = spec.domain.coords_of(i)[0];
    CHECK_THAT(b.value.values[i], WithinAbs(x * x, 1e-15));
    CHECK(b.policy.control_at(i)[0] == 0.0);
  }
  CHECK(b.value.values[spec.domain.origin_node().value()] == 0.0);
}

TEST_CASE("vi_backup is a monotone operator", "[backup][property]") {
  const ProblemSpec spec = lqr1d(41, 41);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    ScalarField lo = ScalarField::zeros(spec.domain), hi = lo;
    for (std::size_t i = 0; i < lo.values.size(); ++i) {
      lo.values[i] = 2.0 * unit(rng);
      hi.values[i] = lo.values[i] + unit(rng);
    }
    const Backup blo = vi_backup(spec, lo, GreedyOptions{});
    const Backup bhi = vi_backup(spec, hi, GreedyOptions{});
    for (std::size_t i = 0; i < lo.values.size(); ++i)
      CHECK(blo.value.values[i] <= bhi.value.values[i] + 1e-12);
  }
}

TEST_CASE("lookahead with one step is vi_backup bit-for-bit", "[backup]") {
  const ProblemSpec spec = lqr1d(101, 101);
  const ScalarField v = make_value_field(spec.domain, [](const Vec& x) { return x[0] * x[0]; });
  const Backup a = vi_backup(spec, v, GreedyOptions{});
  const Backup b = lookahead_backup(spec, v, 1, GreedyOptions{});
  CHECK(a.value.values == b.value.values);
  CHECK(a.policy.controls == b.policy.controls);
}

TEST_CASE("two-step lookahead from zero matches the two-stage optimum", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const Backup b = lookahead_backup(spec, ScalarField::zeros(spec.domain), 2, GreedyOptions{});
  for (std::size_t i = 0; i < spec.domain.node_count(); i += 10) {
    const double x = spec.domain.coords_of(i)[0];
    CHECK_THAT(b.value.values[i], WithinAbs(1.5 * x * x, 1e-4));
  }
  const std::size_t last = spec.domain.node_count() - 1;  // x = 1
  CHECK_THAT(b.policy.control_at(last)[0], WithinAbs(-0.5, 1e-2));
  const std::size_t origin = spec.domain.origin_node().value();
  CHECK(b.value.values[origin] == 0.0);
  CHECK(b.policy.control_at(origin)[0] == 0.0);
}

TEST_CASE("brute-force lookahead agrees with greedy for one step", "[backup]") {
  const ProblemSpec spec = lqr1d(41, 41);
  const ScalarField v =
      make_value_field(spec.domain, [](const Vec& x) { return 1.3 * x[0] * x[0]; });
  GreedyOptions no_refine;
  no_refine.refine = false;
  for (const double x : {-1.0, -0.35, 0.0, 0.6, 1.0}) {
    const GreedyResult g = greedy_control(spec, {x}, v, no_refine);
    CHECK(brute_force_lookahead(spec, v, {x}, 1) == g.q);
  }
}

TEST_CASE("brute-force two-step optimum on the scalar integrator", "[backup]") {
  const ProblemSpec spec = lqr1d();
  const ScalarField zero = ScalarField::zeros(spec.domain);
  CHECK_THAT(brute_force_lookahead(spec, zero, {1.0}, 2), WithinAbs(1.5, 1e-12));
  CHECK(brute_force_lookahead(spec, zero, {0.0}, 2) == 0.0);
}

TEST_CASE("brute-force enumeration budget", "[backup]") {
  const ProblemSpec spec = lqr1d();  // 401 lattice points
  const ScalarField zero = ScalarField::zeros(spec.domain);
  CHECK_THROWS_AS(brute_force_lookahead(spec, zero, {1.0}, 3), budget_error);
}
