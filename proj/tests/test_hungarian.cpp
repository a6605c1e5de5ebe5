#include <catch2/catch_amalgamated.hpp>

#include "mblingam/hungarian.hpp"
#include "mblingam/lingam.hpp"
#include "test_helpers.hpp"

using namespace mblingam;

TEST_CASE("diagonally dominant matrix keeps the identity permutation") {
    Eigen::MatrixXd w(3, 3);
    w << 5.0, 0.1, 0.2,
         0.3, 4.0, 0.1,
         0.2, 0.1, 6.0;
    const auto [perm, permuted] = permute_rows_nonzero_diag(w);
    CHECK(perm == std::vector<int>{0, 1, 2});
    CHECK(permuted.isApprox(w));
}

TEST_CASE("row-swapped diagonal matrix forces the inverse swap") {
    Eigen::MatrixXd w(2, 2);
    w << 0.0, 2.0,
         3.0, 0.0;
    const auto [perm, permuted] = permute_rows_nonzero_diag(w);
    CHECK(perm == std::vector<int>{1, 0});
    CHECK(permuted(0, 0) == 3.0);
    CHECK(permuted(1, 1) == 2.0);
}

TEST_CASE("assignment equals the exhaustive minimum on random matrices") {
    for (int rep = 0; rep < 60; ++rep) {
        const Eigen::MatrixXd w = test_helpers::random_matrix(6, 6, 100u + rep, -2.0, 2.0);
        Eigen::MatrixXd cost(6, 6);
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) cost(i, j) = 1.0 / std::abs(w(j, i));
        }
        const std::vector<int> fast = solve_min_cost_assignment(cost);
        const auto [oracle, oracle_cost] = test_helpers::brute_force_assignment(cost);
        double fast_cost = 0.0;
        for (int i = 0; i < 6; ++i) fast_cost += cost(i, fast[static_cast<std::size_t>(i)]);
        CHECK(fast_cost == Catch::Approx(oracle_cost).epsilon(1e-12));
    }
}

TEST_CASE("degenerate matrix with a forced zero diagonal is rejected") {
    // Column 0 is entirely zero, so every permutation hits a zero diagonal.
    Eigen::MatrixXd w(3, 3);
    w << 0.0, 1.0, 2.0,
         0.0, 3.0, 1.0,
         0.0, 2.0, 2.0;
    CHECK_THROWS_AS(permute_rows_nonzero_diag(w), degenerate_assignment_error);
}

TEST_CASE("sparse but feasible patterns are solved") {
    // Only one zero-free diagonal exists: rows (2, 0, 1).
    Eigen::MatrixXd w(3, 3);
    w << 0.0, 5.0, 0.0,
         0.0, 0.0, 5.0,
         5.0, 0.0, 0.0;
    const auto [perm, permuted] = permute_rows_nonzero_diag(w);
    CHECK(perm == std::vector<int>{2, 0, 1});
    CHECK(permuted.diagonal().minCoeff() == 5.0);
}
