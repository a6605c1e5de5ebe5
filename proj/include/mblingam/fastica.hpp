#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "mblingam/rng.hpp"
#include "mblingam/types.hpp"

namespace mblingam {

enum class IcaNonlinearity { tanh, cube };

struct IcaConfig {
    int restarts = 8;
    int max_iterations = 1000;
    double convergence_tol = 1e-7;
    IcaNonlinearity nonlinearity = IcaNonlinearity::tanh;
    std::uint64_t seed = 0;
};

inline void validate(const IcaConfig& cfg) {
    if (cfg.restarts < 1) throw std::invalid_argument("IcaConfig: restarts must be >= 1");
    if (cfg.max_iterations < 1) throw std::invalid_argument("IcaConfig: max_iterations must be >= 1");
    if (!(cfg.convergence_tol > 0.0)) throw std::invalid_argument("IcaConfig: convergence_tol must be > 0");
}

struct FastIcaResult {
    Eigen::MatrixXd unmixing;  // rows map centered data to unit-variance components
    double objective = 0.0;    // sum of per-component negentropy approximations
    bool converged = true;
    int restarts_used = 0;
};

namespace detail {

// E[log cosh X] for X ~ N(0,1); baseline of the negentropy approximation.
inline constexpr double kGaussLogCosh = 0.374567207491437974;
// E[X^4]/4 for X ~ N(0,1).
inline constexpr double kGaussQuarticOverFour = 0.75;
inline constexpr double kEigenvalueRelTol = 1e-12;

struct Whitening {
    Eigen::MatrixXd k;  // m x m, cov(k * centered) = I
};

inline Whitening whiten(const Eigen::MatrixXd& centered) {
    const Eigen::Index n = centered.cols();
    const Eigen::MatrixXd cov =
        (centered * centered.transpose()) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
        throw rank_deficiency_error("fastica: eigendecomposition of covariance failed");
    }
    const Eigen::VectorXd lambda = eig.eigenvalues();
    const double lambda_max = lambda.maxCoeff();
    if (!(lambda_max > 0.0) || lambda.minCoeff() < kEigenvalueRelTol * lambda_max) {
        throw rank_deficiency_error("fastica: sample covariance is rank deficient");
    }
    // Fix each eigenvector's sign by its largest-magnitude entry so whitening
    // commutes exactly with a relabeling of the variables.
    Eigen::MatrixXd vectors = eig.eigenvectors();
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index pivot = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&pivot);
        if (vectors(pivot, c) < 0.0) vectors.col(c) = -vectors.col(c);
    }
    const Eigen::MatrixXd k = lambda.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
    return Whitening{k};
}

// W <- (W W^T)^{-1/2} W keeps the rows an orthonormal basis.
inline void symmetric_decorrelate(Eigen::MatrixXd& w) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * w.transpose());
    Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(1e-300);
    w = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose() * w;
}

inline Eigen::MatrixXd random_orthonormal(Eigen::Index m, std::uint64_t seed) {
    rng::Engine eng(seed);
    Eigen::MatrixXd w(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) w(i, j) = eng.normal();
    }
    symmetric_decorrelate(w);
    return w;
}

struct RestartOutcome {
    Eigen::MatrixXd w;  // orthonormal in whitened space
    double objective = 0.0;
    bool converged = false;
};

// tanh through the vectorized exp kernel; Eigen's double tanh is scalar.
template <typename Derived>
auto fast_tanh(const Eigen::ArrayBase<Derived>& y) {
    return 1.0 - 2.0 / ((2.0 * y).exp() + 1.0);
}

// mean of log cosh over a row: |y| + log(1 + exp(-2|y|)) - log 2 termwise.
template <typename Derived>
double mean_log_cosh(const Eigen::ArrayBase<Derived>& y) {
    const auto ay = y.abs();
    return (ay + ((-2.0 * ay).exp() + 1.0).log()).mean() - 0.69314718055994530942;
}

inline RestartOutcome run_restart(const Eigen::MatrixXd& z, const IcaConfig& cfg,
                                  std::uint64_t restart_seed) {
    const Eigen::Index m = z.rows();
    const Eigen::Index n = z.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const bool use_tanh = cfg.nonlinearity == IcaNonlinearity::tanh;

    Eigen::MatrixXd w = random_orthonormal(m, restart_seed);
    RestartOutcome out;
    Eigen::MatrixXd y, g;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        y.noalias() = w * z;
        Eigen::VectorXd gprime_mean(m);
        if (use_tanh) {
            g = fast_tanh(y.array()).matrix();
            gprime_mean = (1.0 - g.array().square()).rowwise().mean();
        } else {
            g = y.array().cube().matrix();
            gprime_mean = 3.0 * y.array().square().rowwise().mean();
        }
        Eigen::MatrixXd w_new = (g * z.transpose()) * inv_n;
        w_new.noalias() -= gprime_mean.asDiagonal() * w;
        symmetric_decorrelate(w_new);

        const double delta =
            (1.0 - (w_new * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
        w = std::move(w_new);
        if (delta < cfg.convergence_tol) {
            out.converged = true;
            break;
        }
    }

    y.noalias() = w * z;
    double objective = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        double mean_g;
        double baseline;
        if (use_tanh) {
            mean_g = mean_log_cosh(y.row(i).array());
            baseline = kGaussLogCosh;
        } else {
            mean_g = 0.25 * y.row(i).array().pow(4).mean();
            baseline = kGaussQuarticOverFour;
        }
        const double diff = mean_g - baseline;
        objective += diff * diff;
    }
    out.objective = objective;
    out.w = std::move(w);
    return out;
}

}  // namespace detail

// Symmetric FastICA with seeded random restarts. The returned unmixing matrix
// maps the centered data to mutually uncorrelated unit-variance rows; among
// restarts the one with the largest negentropy objective wins, ties broken by
// the lowest restart index.
inline FastIcaResult fastica(const DataMatrix& data, const IcaConfig& cfg) {
    validate(cfg);
    const Eigen::MatrixXd centered = data.values.colwise() - data.values.rowwise().mean();
    const detail::Whitening wh = detail::whiten(centered);
    const Eigen::MatrixXd z = wh.k * centered;

    detail::RestartOutcome best;
    bool have_best = false;
    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t restart_seed = rng::derive_seed(cfg.seed, rng::tag::restart, static_cast<std::uint64_t>(r));
        detail::RestartOutcome cur = detail::run_restart(z, cfg, restart_seed);
        if (!have_best || cur.objective > best.objective) {
            best = std::move(cur);
            have_best = true;
        }
    }

    FastIcaResult result;
    result.unmixing = best.w * wh.k;
    result.objective = best.objective;
    result.converged = best.converged;
    result.restarts_used = cfg.restarts;
    return result;
}

}  // namespace mblingam
