#pragma once

#include <Eigen/Dense>

#include "mblingam/types.hpp"

namespace mblingam {

// Output of the LiNGAM estimator. b_hat keeps every entry; the order alone
// decides which entries are structurally permitted.
struct LingamEstimate {
    CausalOrder order;
    ConnectionMatrix b_hat;
    double ica_objective = 0.0;
    int restarts_used = 0;
    bool ica_converged = true;
    bool weak_nongaussianity = false;
};

inline constexpr double kTotalEffectResidualTol = 1e-10;

// A = (I - B)^-1 by partially pivoted LU, verified against the defining
// identity A(I - B) = I.
inline TotalEffectMatrix total_effects(const ConnectionMatrix& cm) {
    const Eigen::Index m = cm.size();
    const Eigen::MatrixXd i_minus_b = Eigen::MatrixXd::Identity(m, m) - cm.b;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(i_minus_b);
    const Eigen::MatrixXd a = lu.solve(Eigen::MatrixXd::Identity(m, m));
    const double residual =
        (a * i_minus_b - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual >= kTotalEffectResidualTol) {
        throw singular_matrix_error("total_effects: I - B is singular (cyclic or degenerate model)");
    }
    return TotalEffectMatrix{a};
}

// 1 iff the estimate places the cause before the effect and the estimated
// coefficient carries the hypothesised sign. An exactly-zero coefficient
// matches neither sign.
inline int hypothesis_indicator(const LingamEstimate& est, const HypothesisId& h) {
    const std::vector<int> k = est.order.positions();
    if (k[static_cast<std::size_t>(h.cause)] >= k[static_cast<std::size_t>(h.effect)]) return 0;
    const double coef = est.b_hat.b(h.effect, h.cause);
    if (coef > 0.0) return h.sign == Sign::positive ? 1 : 0;
    if (coef < 0.0) return h.sign == Sign::negative ? 1 : 0;
    return 0;
}

}  // namespace mblingam
