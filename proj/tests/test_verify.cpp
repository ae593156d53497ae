#include <catch2/catch_amalgamated.hpp>

#include "adp/bench.hpp"
#include "adp/solve.hpp"

using namespace adp;
using Catch::Matchers::WithinAbs;

namespace {

SolveOptions default_opts() {
  SolveOptions opts;
  opts.tol_outer = 1e-6;
  opts.max_iters = 60;
  return opts;
}

PolicyField gain_policy(const ProblemSpec& spec, double k) {
  return make_policy_field(spec.domain, spec.controls, [k](const Vec& x, Vec& u) {
    u.assign(1, -k * x[0]);
  });
}

}  // namespace

TEST_CASE("check_monotone on a PI trace", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const SolveResult pi = run_pi(bench.spec, bench.initial_policy, default_opts());
  const Tolerances tol = Tolerances::for_scale(2.0);
  const Certificate cert = check_monotone(pi.value_history, tol);
  CHECK(cert.passed);
  CHECK(cert.worst.margin <= 1e-8 * 2.0);
}

TEST_CASE("check_monotone edge cases", "[verify]") {
  BoxGrid g({-1.0}, {1.0}, {3});
  const ScalarField a{g, {1.0, 0.0, 1.0}};
  const std::vector<ScalarField> constant{a, a, a};
  const Certificate cert = check_monotone(constant, Tolerances{});
  CHECK(cert.passed);
  CHECK(cert.worst.margin == 0.0);

  const ScalarField b{g, {2.0, 0.0, 1.0}};
  const Certificate fail = check_monotone({a, b}, Tolerances{});
  CHECK_FALSE(fail.passed);
  CHECK(fail.worst.margin == 1.0);
  CHECK(fail.worst.node == 0u);

  BoxGrid other({-1.0}, {1.0}, {5});
  CHECK_THROWS_AS(check_monotone({a, ScalarField::zeros(other)}, Tolerances{}), config_error);
  CHECK_THROWS_AS(check_monotone({a}, Tolerances{}), config_error);
}

TEST_CASE("an increasing (reversed) sequence fails monotonicity", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  SolveOptions opts = default_opts();
  opts.max_iters = 4;
  const SolveResult vi = run_vi(bench.spec, ScalarField::zeros(bench.spec.domain), opts);
  const Certificate cert = check_monotone(vi.value_history, Tolerances::for_scale(2.0));
  CHECK_FALSE(cert.passed);
  CHECK(cert.worst.margin > 0.0);
}

TEST_CASE("dominance holds when PI and VI share an admissible start", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const SolveResult pi = run_pi(bench.spec, bench.initial_policy, default_opts());
  const SolveResult vi = run_vi(bench.spec, pi.value_history.front(), default_opts());

  const Tolerances tol = Tolerances::for_scale(2.0);
  const Certificate cert = check_dominance(pi.value_history, vi.value_history, tol);
  CHECK(cert.passed);

  double iters_pi = -1.0, iters_vi = -1.0;
  for (const auto& row : cert.details) {
    if (row.check == "iterations to tolerance (pi)") iters_pi = row.margin;
    if (row.check == "iterations to tolerance (vi)") iters_vi = row.margin;
  }
  CHECK(iters_pi > 0.0);
  CHECK(iters_pi <= iters_vi);

  // the shared first iterate contributes margin exactly zero
  const Certificate first_only =
      check_dominance({pi.value_history[0]}, {vi.value_history[0]}, tol);
  CHECK(first_only.worst.margin == 0.0);
}

TEST_CASE("dominance refuses a mismatched initialization", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const SolveResult pi = run_pi(bench.spec, bench.initial_policy, default_opts());
  const SolveResult vi = run_vi(bench.spec, ScalarField::zeros(bench.spec.domain), default_opts());
  CHECK_THROWS_AS(
      check_dominance(pi.value_history, vi.value_history, Tolerances::for_scale(2.0)),
      refusal_error);
}

TEST_CASE("certify_admissible accepts the optimal lqr1d policy", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const DareSolution dare = dare_oracle(*bench.lqr);
  const PolicyField h_star = gain_policy(bench.spec, dare.K(0, 0));
  Tolerances tol;
  tol.rollout_horizon = 50;
  tol.eps_state = 1e-3;
  const Certificate cert =
      certify_admissible(bench.spec, h_star, tol, {{1.0}, {-1.0}, {0.5}, {-0.5}});
  CHECK(cert.passed);
  CHECK(cert.worst.margin < 1e-3);
}

TEST_CASE("certify_admissible rejects the zero policy on the integrator", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  EvalOptions ev;
  ev.max_sweeps = 60;
  const Certificate cert =
      certify_admissible(bench.spec, gain_policy(bench.spec, 0.0), Tolerances{}, {{1.0}}, 0, ev);
  CHECK_FALSE(cert.passed);
}

TEST_CASE("certify_admissible is trivial from the origin", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const Certificate cert =
      certify_admissible(bench.spec, bench.initial_policy, Tolerances{}, {{0.0}});
  CHECK(cert.passed);
  CHECK(cert.worst.margin == 0.0);
}

TEST_CASE("bellman_residual of the zero field is the stage-cost ceiling", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const BellmanResidual res =
      bellman_residual(bench.spec, ScalarField::zeros(bench.spec.domain), GreedyOptions{});
  CHECK_THAT(res.residual, WithinAbs(1.0, 1e-12));
  CHECK(std::abs(res.x[0]) == 1.0);
}

TEST_CASE("bellman_residual of a converged field is grid-limited", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const SolveResult pi = run_pi(bench.spec, bench.initial_policy, default_opts());
  const BellmanResidual res = bellman_residual(bench.spec, pi.value, GreedyOptions{});
  CHECK(res.residual < 5e-3 * 1.7);
  CHECK(res.residual >= 0.0);
  // the witness must be set even when the field is exactly Bellman-consistent
  REQUIRE_FALSE(res.x.empty());
}

TEST_CASE("uniqueness: zero perturbation passes immediately", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const SolveResult pi = run_pi(bench.spec, bench.initial_policy, default_opts());
  SolveOptions opts = default_opts();
  opts.tol.eps_bellman = 1e-3;
  const Certificate cert = check_uniqueness(bench.spec, pi.value, 0.0, opts);
  CHECK(cert.passed);
  CHECK_FALSE(cert.inconclusive);
}

TEST_CASE("uniqueness: bounded perturbation reconverges to the same field", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const SolveResult pi = run_pi(bench.spec, bench.initial_policy, default_opts());
  SolveOptions opts = default_opts();
  opts.tol.eps_bellman = 1e-3;
  const Certificate cert = check_uniqueness(bench.spec, pi.value, 0.1, opts, 42);
  CHECK(cert.passed);
  CHECK(cert.worst.margin <= 1e-3);
}

TEST_CASE("uniqueness: a destabilizing perturbation is inconclusive", "[verify]") {
  // A tight control box makes one-step returns to the origin impossible, so a
  // huge perturbation leaves the greedy policy chasing noise minima.
  ProblemSpec spec;
  spec.system = {1, 1, [](const Vec& x, const Vec& u, Vec& out) {
                   out.assign(1, x[0] + u[0]);
                 }};
  spec.cost = {[](const Vec& x, const Vec& u) { return x[0] * x[0] + u[0] * u[0]; }};
  spec.domain = BoxGrid({-1.0}, {1.0}, {41});
  spec.controls = ControlSet({-0.2}, {0.2}, {21});
  const PolicyField h0 = make_policy_field(spec.domain, spec.controls, [](const Vec& x, Vec& u) {
    u.assign(1, -0.2 * x[0]);
  });
  SolveOptions opts = default_opts();
  opts.eval.max_sweeps = 400;
  const SolveResult pi = run_pi(spec, h0, opts);
  REQUIRE(pi.converged);
  const Certificate cert = check_uniqueness(spec, pi.value, 50.0, opts, 7);
  CHECK(cert.inconclusive);
}

TEST_CASE("check_lemma1: a greedy improvement satisfies premise and conclusion", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const ProblemSpec& spec = bench.spec;
  const PolicyField g = gain_policy(spec, 1.0);
  const PolicyEvaluation evg = evaluate_policy(spec, g, EvalOptions{});
  REQUIRE(evg.converged);
  const PolicyField h = vi_backup(spec, evg.value, GreedyOptions{}).policy;

  const Certificate cert = check_lemma1(spec, h, g, Tolerances::for_scale(2.0));
  CHECK(cert.passed);
  CHECK_FALSE(cert.vacuous);
}

TEST_CASE("check_lemma1: h = g holds with equality", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const PolicyField g = gain_policy(bench.spec, 1.0);
  const Certificate cert = check_lemma1(bench.spec, g, g, Tolerances::for_scale(2.0));
  CHECK(cert.passed);
  CHECK_FALSE(cert.vacuous);
  CHECK(cert.worst.margin <= 1e-8);
}

TEST_CASE("check_lemma1: a premise violation is reported as vacuous", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const PolicyField h = gain_policy(bench.spec, 0.1);
  const PolicyField g = gain_policy(bench.spec, 1.0);
  const Certificate cert = check_lemma1(bench.spec, h, g, Tolerances::for_scale(2.0));
  CHECK(cert.vacuous);
  CHECK(cert.passed);  // vacuous, not failed
}

TEST_CASE("check_lemma1 refuses inadmissible inputs", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const PolicyField h = gain_policy(bench.spec, 0.0);
  const PolicyField g = gain_policy(bench.spec, 1.0);
  CHECK_THROWS_AS(check_lemma1(bench.spec, h, g, Tolerances::for_scale(2.0)), refusal_error);
}

TEST_CASE("certificates are reproducible for fixed seeds", "[verify]") {
  const Benchmark bench = make_benchmark("lqr1d");
  const Certificate a =
      certify_admissible(bench.spec, bench.initial_policy, Tolerances{}, {}, 99);
  const Certificate b =
      certify_admissible(bench.spec, bench.initial_policy, Tolerances{}, {}, 99);
  REQUIRE(a.details.size() == b.details.size());
  for (std::size_t i = 0; i < a.details.size(); ++i) {
    CHECK(a.details[i].margin == b.details[i].margin);
    CHECK(a.details[i].passed == b.details[i].passed);
  }
}
