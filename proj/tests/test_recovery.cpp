#include <catch_amalgamated.hpp>

#include <cmath>

#include "test_support.hpp"

using namespace lsem;
using Catch::Matchers::WithinAbs;

TEST_CASE("two-node recovery inverts the forward model", "[recovery]") {
  const double a = -0.35;
  const Matrix s{{1.0, a}, {a, a * a + 1.0}};
  CHECK_THAT(recover_path_lambda(s, 2).lambda_hat(0, 1), WithinAbs(a, 1e-15));
}

TEST_CASE("unstable instance is recovered exactly without noise", "[recovery]") {
  for (double eps : {1e-6, 1e-3, 0.01}) {
    const RecoveryResult r = recover_path_lambda(test::displayed_sigma(eps), 4);
    CHECK_THAT(r.lambda_hat(0, 1), WithinAbs(std::sqrt(2.0), 1e-12));
    CHECK_THAT(r.lambda_hat(1, 2), WithinAbs(-std::sqrt(2.0), 1e-12));
    // The last edge is (eps/2)/eps after cancellation, so accuracy degrades like 1/eps.
    CHECK_THAT(r.lambda_hat(2, 3), WithinAbs(0.5, 1e-14 / eps));
    REQUIRE(r.min_pivots[3].has_value());
    CHECK(*r.min_pivots[3] < 2.0 * eps);
  }
}

TEST_CASE("unstable instance at eps = 0 is singular at the last node", "[recovery]") {
  try {
    recover_path_lambda(forward_covariance(instability_instance(0.0)), 4);
    FAIL("expected NearSingularSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NearSingularSystem);
    REQUIRE(e.node().has_value());
    CHECK(*e.node() == 3);  // fourth vertex, 0-based
  }
  try {
    recover_bowfree_lambda(forward_covariance(instability_instance(0.0)), path_graph(4));
    FAIL("expected NearSingularSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NearSingularSystem);
    CHECK(e.node() == std::optional<std::size_t>(3));
  }
}

TEST_CASE("recovery input validation", "[recovery]") {
  CHECK_THROWS_AS(recover_path_lambda(Matrix::identity(3), 4), Error);
  CHECK_THROWS_AS(recover_path_lambda(Matrix::identity(1), 1), Error);
  try {
    recover_bowfree_lambda(Matrix::identity(2), MixedGraph(2, {{0, 1}}, {{0, 1}}));
    FAIL("expected NotBowFree");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotBowFree);
  }
}

TEST_CASE("path and general solvers agree", "[recovery][property]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(1, seed));
    const std::size_t n = 2 + seed;
    const Parameters p = random_parameters(path_graph(n), {0.8, default_dimension(n)}, rng);
    const Matrix s = forward_covariance(p);
    const Matrix a = recover_path_lambda(s, n).lambda_hat;
    const Matrix b = recover_bowfree_lambda(s, p.graph).lambda_hat;
    CHECK(test::max_abs_diff(a, b) <= 1e-10);
    CHECK(test::max_abs_diff(a, p.lambda) <= 1e-8);
  }
}

TEST_CASE("clique_of_paths(4,2) round trip", "[recovery]") {
  Rng rng(12);
  const Parameters p = random_parameters(clique_of_paths(4, 2), {0.5, 1000}, rng);
  const Matrix s = forward_covariance(p);
  CHECK(test::max_abs_diff(recover_bowfree_lambda(s, p.graph).lambda_hat, p.lambda) <= 1e-8);
  CHECK(test::max_abs_diff(recover_lambda(s, p.graph).lambda_hat, p.lambda) <= 1e-8);
}

TEST_CASE("zero Lambda is recovered as zero on any graph", "[recovery]") {
  Rng rng(6);
  for (const MixedGraph& g : {clique_of_paths(12, 3), path_graph(7), layered_graph(12, 4, 0.3, rng)}) {
    const Parameters p = random_parameters(g, {0.0, 200}, rng);
    CHECK(max_abs(recover_lambda(forward_covariance(p), g).lambda_hat) <= 1e-14);
  }
}

TEST_CASE("general bow-free round trip", "[recovery][property]") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(derive_seed(31, seed));
    const MixedGraph g = seed % 2 ? clique_of_paths(20, 2) : layered_graph(30, 5, 0.2 + 0.3 * (seed % 3), rng);
    const Parameters p = random_parameters(g, {0.5, 1000}, rng);
    const Matrix s = forward_covariance(p);
    RecoveryResult r;
    try {
      r = recover_bowfree_lambda(s, g);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NearSingularSystem);
      continue;
    }
    ++checked;
    CHECK(test::max_abs_diff(r.lambda_hat, p.lambda) <= 1e-8);
    // Every estimated weight sits on a directed edge.
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        if (!g.has_directed(i, j)) CHECK(r.lambda_hat(i, j) == 0.0);
  }
  CHECK(checked >= 36);
}

TEST_CASE("recover_omega", "[recovery]") {
  const Matrix s = test::displayed_sigma(0.3);
  CHECK(recover_omega(s, Matrix(4, 4)) == s);

  const Parameters p = instability_instance(0.01);
  const Matrix sig = forward_covariance(p);
  const Matrix om = recover_omega(sig, recover_path_lambda(sig, 4).lambda_hat);
  CHECK_THAT(om(0, 2), WithinAbs(0.5, 1e-10));
  CHECK(test::max_abs_diff(om, p.omega) <= 1e-10);

  CHECK_THROWS_AS(recover_omega(s, Matrix(3, 3)), Error);
}

TEST_CASE("Omega round trip respects the zero pattern", "[recovery][property]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(44, seed));
    const MixedGraph g = seed % 2 ? path_graph(25) : clique_of_paths(20, 4);
    const Parameters p = random_parameters(g, {0.5, 1000}, rng);
    const Matrix s = forward_covariance(p);
    const Matrix om = recover_omega(s, recover_lambda(s, g).lambda_hat);
    CHECK(test::max_abs_diff(om, p.omega) <= 1e-8);
    for (const auto& [i, j] : g.directed()) CHECK(std::abs(om(i, j)) <= 1e-8);
  }
}

TEST_CASE("recurrence identity", "[recovery]") {
  Parameters z = instability_instance(0.0);
  z.lambda = Matrix(4, 4);
  CHECK(verify_recurrence_identity(z) == 0.0);
  CHECK(verify_recurrence_identity(instability_instance(0.01)) <= 1e-12);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(17, seed));
    const Parameters p = random_parameters(path_graph(50), {0.5, 1000}, rng);
    CHECK(verify_recurrence_identity(p) <= 1e-10 * max_abs(forward_covariance(p)));
  }
  Parameters notpath = z;
  notpath.graph = clique_of_paths(4, 2);
  try {
    verify_recurrence_identity(notpath);
    FAIL("expected NotAPath");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotAPath);
  }
}

TEST_CASE("recurrence_step reproduces the hand-computed denominator", "[recovery]") {
  // Shift every entry by g and evaluate the last step with the exact upstream weight:
  // (eps/2 + (1 + sqrt2) g) / (eps + (1 + sqrt2) g).
  const double eps = 1e-3, g = 1e-5;
  Matrix s = test::displayed_sigma(eps);
  for (double& v : s.values()) v += g;
  const double c = 1.0 + std::sqrt(2.0);
  const double got = recurrence_step(s, 2, -std::sqrt(2.0));
  CHECK_THAT(got, WithinAbs((eps / 2 + c * g) / (eps + c * g), 1e-10));
}
