#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <fstream>

#include "adp/bench.hpp"
#include "adp/verify.hpp"

using namespace adp;
using Catch::Matchers::WithinAbs;

namespace {
LqrSpec scalar_lqr(double a, double b, double q, double r) {
  LqrSpec lqr;
  lqr.A = Eigen::MatrixXd::Constant(1, 1, a);
  lqr.B = Eigen::MatrixXd::Constant(1, 1, b);
  lqr.Q = Eigen::MatrixXd::Constant(1, 1, q);
  lqr.R = Eigen::MatrixXd::Constant(1, 1, r);
  return lqr;
}
}  // namespace

TEST_CASE("dare_oracle solves the golden-ratio scalar problem", "[bench]") {
  const DareSolution sol = dare_oracle(scalar_lqr(1, 1, 1, 1));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK_THAT(sol.P(0, 0), WithinAbs(phi, 1e-12));
  CHECK_THAT(sol.K(0, 0), WithinAbs(phi - 1.0, 1e-12));
  CHECK(sol.residual < 1e-10);
}

TEST_CASE("dare_oracle degenerate cases", "[bench]") {
  const DareSolution free_ride = dare_oracle(scalar_lqr(0.5, 1, 0, 1));
  CHECK_THAT(free_ride.P(0, 0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(free_ride.K(0, 0), WithinAbs(0.0, 1e-12));

  const DareSolution uncontrollable = dare_oracle(scalar_lqr(0.5, 0, 1, 1));
  CHECK_THAT(uncontrollable.P(0, 0), WithinAbs(4.0 / 3.0, 1e-12));
  CHECK_THAT(uncontrollable.K(0, 0), WithinAbs(0.0, 1e-12));
}

TEST_CASE("dare_oracle rejects an indefinite R", "[bench]") {
  CHECK_THROWS_AS(dare_oracle(scalar_lqr(1, 1, 1, -1)), config_error);
}

TEST_CASE("dare residual is tiny on every shipped LQR benchmark", "[bench]") {
  for (const std::string name : {"lqr1d", "lqr2d"}) {
    const Benchmark bench = make_benchmark(name);
    REQUIRE(bench.lqr.has_value());
    CHECK(dare_oracle(*bench.lqr).residual < 1e-10);
  }
}

TEST_CASE("scalar PI recursion oracle", "[bench]") {
  const LqrSpec lqr = scalar_lqr(1, 1, 1, 1);
  const LqrPiSequence seq = lqr_pi_recursion_oracle(lqr, 2.0, 3);
  REQUIRE(seq.p.size() == 4u);
  CHECK(seq.p[0] == 2.0);
  CHECK_THAT(seq.gains[0], WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(seq.p[1], WithinAbs(13.0 / 8.0, 1e-15));
  CHECK_THAT(seq.gains[1], WithinAbs(13.0 / 21.0, 1e-15));
  CHECK_THAT(seq.p[2], WithinAbs(610.0 / 377.0, 1e-12));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK_THAT(seq.p[3], WithinAbs(phi, 1e-8));
}

TEST_CASE("scalar PI recursion is stationary at the fixed point", "[bench]") {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const LqrPiSequence seq = lqr_pi_recursion_oracle(scalar_lqr(1, 1, 1, 1), phi, 4);
  for (double p : seq.p) CHECK_THAT(p, WithinAbs(phi, 1e-12));
}

TEST_CASE("scalar PI recursion detects a destabilizing start", "[bench]") {
  // a = 2: p0 = 0.1 gives K = 0.2/1.1 and |a - bK| = 1.82 >= 1.
  CHECK_THROWS_AS(lqr_pi_recursion_oracle(scalar_lqr(2, 1, 1, 1), 0.1, 3), model_error);
}

TEST_CASE("all shipped benchmarks pass contract validation", "[bench]") {
  for (const std::string& name : benchmark_names()) {
    const Benchmark bench = make_benchmark(name);
    const ValidationReport report = validate_problem(bench.spec, 1000);
    INFO(name);
    CHECK(report.all_passed());
    CHECK(bench.spec.domain.origin_node().has_value());
  }
}

TEST_CASE("unknown benchmark names are listed", "[bench]") {
  try {
    make_benchmark("unknown");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    for (const std::string& name : benchmark_names())
      CHECK(msg.find(name) != std::string::npos);
  }
}

TEST_CASE("deadbeat toy transitions are node-exact and enumeration gives x^2", "[bench]") {
  const Benchmark bench = make_benchmark("deadbeat-toy");
  const ScalarField exact = exact_tabular_value(bench.spec);
  for (std::size_t i = 0; i < bench.spec.domain.node_count(); ++i) {
    const double x = bench.spec.domain.coords_of(i)[0];
    CHECK_THAT(exact.values[i], WithinAbs(x * x, 1e-15));
  }
}

TEST_CASE("exact_tabular_value rejects off-node systems", "[bench]") {
  const Benchmark bench = make_benchmark("pendulum");  // sin() lands between nodes
  CHECK_THROWS_AS(exact_tabular_value(bench.spec), config_error);
}

TEST_CASE("shipped initial policies certify admissible", "[bench]") {
  for (const std::string& name : benchmark_names()) {
    const Benchmark bench = make_benchmark(name);
    const Certificate cert = certify_admissible(bench.spec, bench.initial_policy, Tolerances{});
    INFO(name);
    CHECK(cert.passed);
  }
}

TEST_CASE("benchmark manifest matches the oracles", "[bench]") {
  std::ifstream is(std::string(ADP_SOURCE_DIR) + "/data/benchmarks.json");
  REQUIRE(is.good());
  nlohmann::json manifest;
  is >> manifest;

  std::vector<std::string> listed;
  for (const auto& entry : manifest.at("benchmarks")) listed.push_back(entry.at("name"));
  CHECK(listed == benchmark_names());

  for (const auto& entry : manifest.at("benchmarks")) {
    const Benchmark bench = make_benchmark(entry.at("name"));
    if (entry.at("oracle").at("type") == "dare") {
      REQUIRE(bench.lqr.has_value());
      const DareSolution sol = dare_oracle(*bench.lqr);
      const auto& P = entry.at("oracle").at("P");
      const auto& K = entry.at("oracle").at("K");
      for (int i = 0; i < sol.P.rows(); ++i)
        for (int j = 0; j < sol.P.cols(); ++j)
          CHECK_THAT(sol.P(i, j), WithinAbs(P.at(i).at(j).get<double>(), 1e-8));
      for (int j = 0; j < sol.K.cols(); ++j)
        CHECK_THAT(sol.K(0, j), WithinAbs(K.at(0).at(j).get<double>(), 1e-8));
    }
    const auto& dom = entry.at("domain");
    CHECK(dom.at("nodes").get<std::vector<int>>() == bench.spec.domain.nodes_per_dim());
    const auto& ctr = entry.at("controls");
    CHECK(ctr.at("samples").get<std::vector<int>>() == bench.spec.controls.samples_per_dim());
  }
}
