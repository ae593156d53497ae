#pragma once

#include <Eigen/Dense>

#include "adp/model.hpp"

namespace adp {

// Linear-quadratic problem data: f(x,u) = Ax + Bu, U(x,u) = x'Qx + u'Ru,
// restricted to a domain box and a control box.
struct LqrSpec {
  Eigen::MatrixXd A, B, Q, R;
  Vec domain_lower, domain_upper;
  std::vector<int> domain_nodes;
  Vec control_lower, control_upper;
  std::vector<int> control_samples;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

struct DareSolution {
  Eigen::MatrixXd P;  // V*(x) = x'Px
  Eigen::MatrixXd K;  // h*(x) = -Kx
  int iterations = 0;
  double residual = 0.0;
};

// Independent optimality oracle: solves the discrete algebraic Riccati
// equation by fixed-point iteration
//   P <- Q + A'(P - P B (R + B'PB)^-1 B'P) A
// from P = Q until the sup-norm change drops below tol.
inline DareSolution dare_oracle(const LqrSpec& lqr, double tol = 1e-13, int max_iters = 200000) {
  const auto llt = lqr.R.llt();
  if (llt.info() != Eigen::Success || (lqr.R.diagonal().array() <= 0.0).any())
    throw config_error("dare_oracle: R must be positive definite");

  Eigen::MatrixXd P = lqr.Q;
  int it = 0;
  for (; it < max_iters; ++it) {
    const Eigen::MatrixXd G = (lqr.R + lqr.B.transpose() * P * lqr.B)
                                  .ldlt()
                                  .solve(lqr.B.transpose() * P);
    const Eigen::MatrixXd next =
        lqr.Q + lqr.A.transpose() * (P - P * lqr.B * G) * lqr.A;
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (change < tol) break;
  }
  if (it == max_iters)
    throw model_error("dare_oracle: fixed-point iteration did not converge within budget");

  DareSolution sol;
  sol.P = P;
  sol.K = (lqr.R + lqr.B.transpose() * P * lqr.B).ldlt().solve(lqr.B.transpose() * P * lqr.A);
  sol.iterations = it + 1;
  const Eigen::MatrixXd G = (lqr.R + lqr.B.transpose() * P * lqr.B)
                                .ldlt()
                                .solve(lqr.B.transpose() * P);
  sol.residual =
      (P - (lqr.Q + lqr.A.transpose() * (P - P * lqr.B * G) * lqr.A)).cwiseAbs().maxCoeff();
  return sol;
}

// Closed-form scalar PI recursion: from the quadratic coefficient p_i of the
// current value function,
//   K_{i+1} = a b p_i / (r + b^2 p_i),
//   p_{i+1} = (q + r K_{i+1}^2) / (1 - (a - b K_{i+1})^2).
// p holds p_0..p_iters; gains holds K_1..K_iters. Every step must be
// stabilizing (|a - bK| < 1), which an admissible start guarantees.
struct LqrPiSequence {
  std::vector<double> p;
  std::vector<double> gains;
};

inline LqrPiSequence lqr_pi_recursion_oracle(const LqrSpec& lqr, double p0, int iters) {
  if (lqr.n() != 1 || lqr.m() != 1)
    throw config_error("lqr_pi_recursion_oracle: scalar systems only");
  const double a = lqr.A(0, 0), b = lqr.B(0, 0), q = lqr.Q(0, 0), r = lqr.R(0, 0);

  LqrPiSequence seq;
  seq.p.push_back(p0);
  double p = p0;
  for (int i = 0; i < iters; ++i) {
    const double K = a * b * p / (r + b * b * p);
    const double closed = a - b * K;
    if (!(std::abs(closed) < 1.0))
      throw model_error("lqr_pi_recursion_oracle: destabilizing gain at step " +
                        std::to_string(i + 1) + " (|a - bK| = " + format_full(std::abs(closed)) +
                        "); start is not admissible");
    p = (q + r * K * K) / (1.0 - closed * closed);
    seq.gains.push_back(K);
    seq.p.push_back(p);
  }
  return seq;
}

struct Benchmark {
  std::string name;
  ProblemSpec spec;
  PolicyField initial_policy;  // canonical admissible h0 on the default grid
  PolicyFn initial_policy_fn;  // same law, usable on overridden grids
  std::optional<LqrSpec> lqr;  // set when the problem itself is LQR
  std::string notes;
};

namespace detail {

inline ProblemSpec lqr_problem(const LqrSpec& lqr) {
  const int n = lqr.n(), m = lqr.m();
  ProblemSpec spec;
  spec.system.state_dim = n;
  spec.system.control_dim = m;
  spec.system.step = [A = lqr.A, B = lqr.B, n](const Vec& x, const Vec& u, Vec& out) {
    out.resize(n);
    Eigen::Map<Eigen::VectorXd>(out.data(), n) =
        A * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()) +
        B * Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
  };
  spec.cost.evaluate = [Q = lqr.Q, R = lqr.R](const Vec& x, const Vec& u) {
    const auto xv = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    const auto uv = Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
    return (xv.dot(Q * xv)) + (uv.dot(R * uv));
  };
  spec.domain = BoxGrid(lqr.domain_lower, lqr.domain_upper, lqr.domain_nodes);
  spec.controls = ControlSet(lqr.control_lower, lqr.control_upper, lqr.control_samples);
  return spec;
}

inline PolicyFn gain_policy(const Eigen::MatrixXd& K) {
  return [K](const Vec& x, Vec& u) {
    u.resize(K.rows());
    Eigen::Map<Eigen::VectorXd>(u.data(), K.rows()) =
        -K * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  };
}

}  // namespace detail

inline std::vector<std::string> benchmark_names() {
  return {"lqr1d", "lqr2d", "deadbeat-toy", "pendulum"};
}

// Built-in benchmark problems.
//
//   lqr1d        scalar x' = x + u, U = x^2 + u^2; optimum known from the
//                scalar DARE (P = golden ratio). Control box [-2,2] keeps the
//                unconstrained optimum interior on the domain.
//   lqr2d        double integrator (dt = 0.1), Q = I, R = 1.
//   deadbeat-toy x' = u with the control lattice equal to the node lattice,
//                so dynamics map nodes to nodes exactly and the solvers can be
//                compared against exact enumeration with no interpolation
//                error. Optimal V is x^2 (jump straight to the origin).
//   pendulum     Euler-discretized damped inverted pendulum (dt = 0.05),
//                U = x1^2 + 0.1 x2^2 + 0.1 u^2; property-based acceptance
//                only, no closed-form oracle. h0 is the DARE gain of the
//                linearization about the origin.
inline Benchmark make_benchmark(const std::string& name) {
  Benchmark bench;
  bench.name = name;

  if (name == "lqr1d") {
    LqrSpec lqr;
    lqr.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lqr.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lqr.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lqr.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lqr.domain_lower = {-1.0};
    lqr.domain_upper = {1.0};
    lqr.domain_nodes = {201};
    lqr.control_lower = {-2.0};
    lqr.control_upper = {2.0};
    lqr.control_samples = {401};

    bench.spec.system.state_dim = 1;
    bench.spec.system.control_dim = 1;
    bench.spec.system.step = [](const Vec& x, const Vec& u, Vec& out) {
      out.resize(1);
      out[0] = x[0] + u[0];
    };
    bench.spec.cost.evaluate = [](const Vec& x, const Vec& u) {
      return x[0] * x[0] + u[0] * u[0];
    };
    bench.spec.domain = BoxGrid(lqr.domain_lower, lqr.domain_upper, lqr.domain_nodes);
    bench.spec.controls = ControlSet(lqr.control_lower, lqr.control_upper, lqr.control_samples);
    bench.initial_policy_fn = [](const Vec& x, Vec& u) {
      u.resize(1);
      u[0] = -x[0];
    };
    bench.lqr = std::move(lqr);
    bench.notes = "scalar LQR; optimal quadratic coefficient is the golden ratio";
  } else if (name == "lqr2d") {
    LqrSpec lqr;
    lqr.A.resize(2, 2);
    lqr.A << 1.0, 0.1, 0.0, 1.0;
    lqr.B.resize(2, 1);
    lqr.B << 0.0, 0.1;
    lqr.Q = Eigen::MatrixXd::Identity(2, 2);
    lqr.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lqr.domain_lower = {-1.0, -1.0};
    lqr.domain_upper = {1.0, 1.0};
    lqr.domain_nodes = {41, 41};
    lqr.control_lower = {-4.0};
    lqr.control_upper = {4.0};
    lqr.control_samples = {81};

    bench.spec = detail::lqr_problem(lqr);
    Eigen::MatrixXd K0(1, 2);
    K0 << 1.0, 1.7;  // detuned stabilizing gain, spectral radius ~0.917
    bench.initial_policy_fn = detail::gain_policy(K0);
    bench.lqr = std::move(lqr);
    bench.notes = "double integrator, dt=0.1; h0 is a detuned stabilizing gain";
  } else if (name == "deadbeat-toy") {
    bench.spec.system.state_dim = 1;
    bench.spec.system.control_dim = 1;
    bench.spec.system.step = [](const Vec&, const Vec& u, Vec& out) {
      out.resize(1);
      out[0] = u[0];
    };
    bench.spec.cost.evaluate = [](const Vec& x, const Vec& u) {
      return x[0] * x[0] + u[0] * u[0];
    };
    bench.spec.domain = BoxGrid({-1.0}, {1.0}, {21});
    // Control lattice == node lattice: every transition lands on a node.
    bench.spec.controls = ControlSet({-1.0}, {1.0}, {21});
    bench.initial_policy_fn = [](const Vec& x, Vec& u) {
      u.resize(1);
      u[0] = 0.5 * x[0];
    };
    bench.notes = "node-exact toy; dynamics map nodes to nodes, V* = x^2";
  } else if (name == "pendulum") {
    const double dt = 0.05, gravity = 10.0, damping = 0.5;
    bench.spec.system.state_dim = 2;
    bench.spec.system.control_dim = 1;
    bench.spec.system.step = [dt, gravity, damping](const Vec& x, const Vec& u, Vec& out) {
      out.resize(2);
      out[0] = x[0] + dt * x[1];
      out[1] = x[1] + dt * (gravity * std::sin(x[0]) - damping * x[1] + u[0]);
    };
    bench.spec.cost.evaluate = [](const Vec& x, const Vec& u) {
      return x[0] * x[0] + 0.1 * x[1] * x[1] + 0.1 * u[0] * u[0];
    };
    bench.spec.domain = BoxGrid({-1.0, -1.0}, {1.0, 1.0}, {41, 41});
    bench.spec.controls = ControlSet({-28.0}, {28.0}, {113});

    // Admissible start: DARE gain of the linearization about the upright
    // equilibrium, with the stage-cost weights as Q and R. Unsaturated on
    // the whole domain by the control-box sizing.
    LqrSpec lin;
    lin.A.resize(2, 2);
    lin.A << 1.0, dt, dt * gravity, 1.0 - dt * damping;
    lin.B.resize(2, 1);
    lin.B << 0.0, dt;
    lin.Q = Eigen::Vector2d(1.0, 0.1).asDiagonal();
    lin.R = Eigen::MatrixXd::Constant(1, 1, 0.1);
    const DareSolution dare = dare_oracle(lin);
    bench.initial_policy_fn = detail::gain_policy(dare.K);
    bench.notes = "inverted pendulum, dt=0.05, gravity=10, damping=0.5; h0 from the "
                  "linearization DARE gain";
  } else {
    std::string names;
    for (const auto& s : benchmark_names()) names += (names.empty() ? "" : ", ") + s;
    throw config_error("unknown benchmark '" + name + "'; available: " + names);
  }

  bench.initial_policy = make_policy_field(bench.spec.domain, bench.spec.controls,
                                           bench.initial_policy_fn);
  return bench;
}

// Exact tabular solve for node-exact problems: every f(node, lattice point)
// must land exactly on a node, making the discretized problem a finite MDP
// that can be value-iterated to an exact fixed point (delta == 0) with no
// interpolation anywhere. Oracle for the deadbeat toy.
inline ScalarField exact_tabular_value(const ProblemSpec& spec, int max_iters = 10000) {
  const std::size_t nodes = spec.domain.node_count();
  const std::size_t lat = spec.controls.lattice_size();
  const int n = spec.domain.dims();

  std::vector<std::size_t> next(nodes * lat);
  Vec stage(nodes * lat);
  Vec x(n), u(spec.controls.dims()), xn(n);
  std::array<int, detail::kMaxDims> multi{};
  for (std::size_t i = 0; i < nodes; ++i) {
    spec.domain.coords_of(i, x);
    for (std::size_t k = 0; k < lat; ++k) {
      const auto pt = spec.controls.lattice_point(k);
      u.assign(pt.begin(), pt.end());
      spec.system.step(x, u, xn);
      clamp_to_domain_inplace(spec.domain, xn);
      for (int d = 0; d < n; ++d) {
        const double step = spec.domain.cell_width(d);
        const int idx = static_cast<int>(std::lround((xn[d] - spec.domain.lower()[d]) / step));
        const double snap = 1e-9 * std::max(1.0, std::abs(xn[d]));
        if (idx < 0 || idx >= spec.domain.nodes_per_dim()[d] ||
            std::abs(spec.domain.coord(d, idx) - xn[d]) > snap)
          throw config_error("exact_tabular_value: transition from node (" + format_vec(x) +
                             ") under u=(" + format_vec(u) + ") does not land on a node");
        multi[d] = idx;
      }
      next[i * lat + k] = spec.domain.index_of(std::span<const int>(multi.data(), n));
      stage[i * lat + k] = spec.cost.evaluate(x, u);
    }
  }

  Vec W(nodes, 0.0), Wn(nodes, 0.0);
  for (int it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < lat; ++k)
        best = std::min(best, stage[i * lat + k] + W[next[i * lat + k]]);
      Wn[i] = best;
      delta = std::max(delta, std::abs(Wn[i] - W[i]));
    }
    W.swap(Wn);
    if (delta == 0.0) return ScalarField{spec.domain, std::move(W)};
  }
  throw model_error("exact_tabular_value: no exact fixed point within the iteration budget");
}

}  // namespace adp
