#include <catch2/catch_amalgamated.hpp>

#include "mblingam/model.hpp"
#include "test_helpers.hpp"

using namespace mblingam;

namespace {

Eigen::MatrixXd six_var_b(double b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6, 6);
    m(1, 0) = b;
    m(2, 0) = b;
    m(3, 0) = b;
    m(3, 1) = b;
    m(4, 1) = b;
    m(4, 3) = b;
    m(5, 0) = b;
    m(5, 1) = b;
    m(5, 2) = b;
    m(5, 4) = b;
    return m;
}

LingamEstimate estimate_from(const Eigen::MatrixXd& b, std::vector<int> order) {
    LingamEstimate est;
    est.b_hat = ConnectionMatrix{b};
    est.order = CausalOrder{std::move(order)};
    return est;
}

}  // namespace

TEST_CASE("total_effects of the empty graph is the identity") {
    const auto a = total_effects(make_connection_matrix(Eigen::MatrixXd::Zero(2, 2)));
    CHECK(a.a.isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-14));
}

TEST_CASE("total_effects with a single edge") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(1, 0) = 0.5;
    const auto a = total_effects(make_connection_matrix(b));
    CHECK(a.a(1, 0) == Catch::Approx(0.5).margin(1e-14));
    CHECK(a.a(0, 0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(a.a(1, 1) == Catch::Approx(1.0).margin(1e-14));
    CHECK(a.a(0, 1) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("total_effects matches the Neumann power-sum oracle on the six-variable model") {
    const Eigen::MatrixXd b = six_var_b(0.5);
    const auto a = total_effects(make_connection_matrix(b));
    const Eigen::MatrixXd oracle = test_helpers::neumann_total_effects(b, 6);
    CHECK((a.a - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("total_effects matches the Neumann oracle on random DAGs up to m = 8") {
    for (int m = 2; m <= 8; ++m) {
        for (int rep = 0; rep < 20; ++rep) {
            const Eigen::MatrixXd b =
                test_helpers::random_dag_matrix(m, 1000u * static_cast<unsigned>(m) + rep);
            const auto a = total_effects(ConnectionMatrix{b});
            const Eigen::MatrixXd oracle = test_helpers::neumann_total_effects(b, m);
            CHECK((a.a - oracle).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("total_effects rejects a singular system") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(0, 1) = 1.0;
    b(1, 0) = 1.0;  // det(I - B) = 0
    CHECK_THROWS_AS(total_effects(ConnectionMatrix{b}), singular_matrix_error);
}

TEST_CASE("total effects of a nilpotent B are unit lower triangular in causal order") {
    const Eigen::MatrixXd b = test_helpers::random_dag_matrix(6, 99);
    const auto a = total_effects(ConnectionMatrix{b});
    for (int i = 0; i < 6; ++i) {
        CHECK(a.a(i, i) == Catch::Approx(1.0).margin(1e-12));
        for (int j = i + 1; j < 6; ++j) {
            CHECK(a.a(i, j) == Catch::Approx(0.0).margin(1e-12));
        }
    }
}

TEST_CASE("relabeling conjugates total effects") {
    const Eigen::MatrixXd b = test_helpers::random_dag_matrix(6, 4242);
    const std::vector<int> perm = test_helpers::random_permutation(6, 7);
    const Eigen::MatrixXd p = test_helpers::permutation_matrix(perm);
    const Eigen::MatrixXd lhs = total_effects(ConnectionMatrix{p * b * p.transpose()}).a;
    const Eigen::MatrixXd rhs = p * total_effects(ConnectionMatrix{b}).a * p.transpose();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("hypothesis_indicator reads order and sign") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(1, 0) = 0.3;
    const LingamEstimate est = estimate_from(b, {0, 1});

    CHECK(hypothesis_indicator(est, make_hypothesis(1, 0, Sign::positive)) == 1);
    CHECK(hypothesis_indicator(est, make_hypothesis(1, 0, Sign::negative)) == 0);
    CHECK(hypothesis_indicator(est, make_hypothesis(0, 1, Sign::positive)) == 0);
    CHECK(hypothesis_indicator(est, make_hypothesis(0, 1, Sign::negative)) == 0);
}

TEST_CASE("an exactly zero coefficient matches neither sign") {
    const LingamEstimate est = estimate_from(Eigen::MatrixXd::Zero(2, 2), {0, 1});
    CHECK(hypothesis_indicator(est, make_hypothesis(1, 0, Sign::positive)) == 0);
    CHECK(hypothesis_indicator(est, make_hypothesis(1, 0, Sign::negative)) == 0);
}

TEST_CASE("indicator pattern over the four parameter regions") {
    // Two-variable rule: the estimator keeps the direction with the larger
    // absolute coefficient; each (b12, b21) region fires exactly one of the
    // four signed hypotheses.
    struct Region {
        double b12, b21;
        int effect, cause;
        Sign sign;
    };
    const Region regions[] = {
        {0.2, 0.8, 1, 0, Sign::positive},   // |b21| wins, positive
        {0.2, -0.8, 1, 0, Sign::negative},  // |b21| wins, negative
        {0.8, 0.2, 0, 1, Sign::positive},   // |b12| wins, positive
        {-0.8, 0.2, 0, 1, Sign::negative},  // |b12| wins, negative
    };
    for (const Region& r : regions) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
        b(0, 1) = r.b12;
        b(1, 0) = r.b21;
        const std::vector<int> order =
            std::abs(r.b12) < std::abs(r.b21) ? std::vector<int>{0, 1} : std::vector<int>{1, 0};
        const LingamEstimate est = estimate_from(b, order);

        int fired = 0;
        for (const HypothesisId& h : enumerate_hypotheses(2)) {
            const int v = hypothesis_indicator(est, h);
            fired += v;
            const bool expected =
                h.effect == r.effect && h.cause == r.cause && h.sign == r.sign;
            CHECK(v == (expected ? 1 : 0));
        }
        CHECK(fired == 1);
    }
}

TEST_CASE("exactly one of four indicators fires for dense estimates") {
    for (int rep = 0; rep < 50; ++rep) {
        const int m = 2 + rep % 5;
        Eigen::MatrixXd b = test_helpers::random_matrix(m, m, 500u + rep);
        b.diagonal().setZero();
        LingamEstimate est = estimate_from(b, test_helpers::random_permutation(m, 900u + rep));
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                const int fired = hypothesis_indicator(est, make_hypothesis(i, j, Sign::positive)) +
                                  hypothesis_indicator(est, make_hypothesis(i, j, Sign::negative)) +
                                  hypothesis_indicator(est, make_hypothesis(j, i, Sign::positive)) +
                                  hypothesis_indicator(est, make_hypothesis(j, i, Sign::negative));
                CHECK(fired == 1);
            }
        }
    }
}

TEST_CASE("type validation") {
    CHECK_THROWS_AS(make_hypothesis(1, 1, Sign::positive), std::invalid_argument);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 0) = 0.5;
    CHECK_THROWS_AS(make_connection_matrix(bad), std::invalid_argument);

    CHECK(is_acyclic(ConnectionMatrix{test_helpers::random_dag_matrix(5, 3)}));
    Eigen::MatrixXd cyc = Eigen::MatrixXd::Zero(2, 2);
    cyc(0, 1) = 0.1;
    cyc(1, 0) = 0.1;
    CHECK_FALSE(is_acyclic(ConnectionMatrix{cyc}));

    DataMatrix tiny;
    tiny.values = Eigen::MatrixXd::Zero(1, 5);
    CHECK_THROWS_AS(validate(tiny), std::invalid_argument);
}
