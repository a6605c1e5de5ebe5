#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "mblingam/fastica.hpp"
#include "mblingam/hungarian.hpp"
#include "mblingam/model.hpp"
#include "mblingam/types.hpp"

namespace mblingam {

namespace detail {
// Stand-in cost for a zero entry; any permutation forced through one is
// reported as degenerate afterwards.
inline constexpr double kZeroDiagCost = 1e60;
inline constexpr int kExhaustiveOrderLimit = 8;
inline constexpr int kGreedyOrderLimit = 100;
// Per-component floor on the negentropy objective below which the estimate
// is flagged as resting on weak non-Gaussian signal.
inline constexpr double kWeakSignalPerComponent = 3e-4;
}  // namespace detail

// Row permutation of w that minimizes sum_i 1/|w_perm(i,i)|, solved exactly as
// a linear assignment. Returns the permutation (perm[i] = source row placed at
// row i) and the permuted matrix.
inline std::pair<std::vector<int>, Eigen::MatrixXd> permute_rows_nonzero_diag(
    const Eigen::MatrixXd& w) {
    const Eigen::Index m = w.rows();
    if (w.cols() != m) throw std::invalid_argument("permute_rows_nonzero_diag: square matrix required");

    Eigen::MatrixXd cost(m, m);
    for (Eigen::Index pos = 0; pos < m; ++pos) {
        for (Eigen::Index src = 0; src < m; ++src) {
            const double mag = std::abs(w(src, pos));
            cost(pos, src) = mag > 0.0 ? 1.0 / mag : detail::kZeroDiagCost;
        }
    }
    const std::vector<int> assign = solve_min_cost_assignment(cost);

    std::vector<int> perm(static_cast<std::size_t>(m));
    Eigen::MatrixXd permuted(m, m);
    for (Eigen::Index pos = 0; pos < m; ++pos) {
        const int src = assign[static_cast<std::size_t>(pos)];
        perm[static_cast<std::size_t>(pos)] = src;
        permuted.row(pos) = w.row(src);
        if (w(src, pos) == 0.0) {
            throw degenerate_assignment_error(
                "permute_rows_nonzero_diag: every permutation places a zero on the diagonal");
        }
    }
    return {std::move(perm), std::move(permuted)};
}

// B_hat = I - W' where W' is w_permuted with each row scaled to unit diagonal.
inline ConnectionMatrix estimate_b(const Eigen::MatrixXd& w_permuted) {
    const Eigen::Index m = w_permuted.rows();
    if (w_permuted.cols() != m) throw std::invalid_argument("estimate_b: square matrix required");
    Eigen::MatrixXd b(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double diag = w_permuted(i, i);
        if (diag == 0.0) throw degenerate_assignment_error("estimate_b: zero diagonal entry");
        b.row(i) = -w_permuted.row(i) / diag;
        b(i, i) = 0.0;
    }
    return ConnectionMatrix{std::move(b)};
}

namespace detail {

inline double upper_triangular_mass(const Eigen::MatrixXd& b, const std::vector<int>& order) {
    const std::size_t m = order.size();
    double mass = 0.0;
    for (std::size_t p = 0; p + 1 < m; ++p) {
        for (std::size_t q = p + 1; q < m; ++q) {
            const double v = b(order[p], order[q]);
            mass += v * v;
        }
    }
    return mass;
}

inline std::vector<int> exhaustive_order(const Eigen::MatrixXd& b) {
    const int m = static_cast<int>(b.rows());
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_mass = upper_triangular_mass(b, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double mass = upper_triangular_mass(b, perm);
        if (mass < best_mass) {
            best_mass = mass;
            best = perm;
        }
    }
    return best;
}

// Repeatedly pull out the variable with the least incoming effect mass among
// the remaining ones; approximate but scales past the factorial regime.
inline std::vector<int> greedy_order(const Eigen::MatrixXd& b) {
    const int m = static_cast<int>(b.rows());
    std::vector<int> remaining(static_cast<std::size_t>(m));
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(m));
    while (!remaining.empty()) {
        int best = remaining.front();
        double best_mass = std::numeric_limits<double>::infinity();
        for (int cand : remaining) {
            double mass = 0.0;
            for (int other : remaining) {
                if (other == cand) continue;
                mass += b(cand, other) * b(cand, other);
            }
            if (mass < best_mass) {
                best_mass = mass;
                best = cand;
            }
        }
        order.push_back(best);
        remaining.erase(std::remove(remaining.begin(), remaining.end(), best), remaining.end());
    }
    return order;
}

}  // namespace detail

// Permutation minimizing the squared mass of entries the order forbids
// (strictly upper triangle after conjugation). Exhaustive for small m with
// ties resolved toward the lexicographically smallest permutation.
inline CausalOrder find_causal_order(const ConnectionMatrix& b_hat) {
    const int m = static_cast<int>(b_hat.size());
    if (m > detail::kGreedyOrderLimit) {
        throw std::invalid_argument("find_causal_order: dimension too large");
    }
    std::vector<int> order = m <= detail::kExhaustiveOrderLimit
                                 ? detail::exhaustive_order(b_hat.b)
                                 : detail::greedy_order(b_hat.b);
    return CausalOrder{std::move(order)};
}

// Full ICA-based LiNGAM estimate: center, unmix, fix the row permutation and
// scaling, then search the causal order.
inline LingamEstimate lingam_fit(const DataMatrix& data, const IcaConfig& cfg) {
    const FastIcaResult ica = fastica(data, cfg);
    auto [perm, w_permuted] = permute_rows_nonzero_diag(ica.unmixing);
    ConnectionMatrix b_hat = estimate_b(w_permuted);
    CausalOrder order = find_causal_order(b_hat);

    LingamEstimate est;
    est.order = std::move(order);
    est.b_hat = std::move(b_hat);
    est.ica_objective = ica.objective;
    est.restarts_used = ica.restarts_used;
    est.ica_converged = ica.converged;
    est.weak_nongaussianity =
        ica.objective < detail::kWeakSignalPerComponent * static_cast<double>(data.num_variables());
    return est;
}

}  // namespace mblingam
