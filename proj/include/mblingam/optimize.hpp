#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

namespace mblingam {

struct BoxBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    static BoxBounds unbounded(Eigen::Index dim) {
        const double inf = std::numeric_limits<double>::infinity();
        return BoxBounds{Eigen::VectorXd::Constant(dim, -inf), Eigen::VectorXd::Constant(dim, inf)};
    }
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Max-norm of the projected gradient step; zero exactly at a box-constrained
// stationary point.
inline double projected_gap(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                            const BoxBounds& bounds) {
    return (x - (x - g).cwiseMax(bounds.lower).cwiseMin(bounds.upper)).cwiseAbs().maxCoeff();
}

// Coordinates pinned at a bound with the gradient pushing outward.
inline std::vector<bool> active_set(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                    const BoxBounds& bounds) {
    std::vector<bool> active(static_cast<std::size_t>(x.size()), false);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double span = std::min(1.0, bounds.upper(i) - bounds.lower(i));
        const double tiny = 1e-12 * std::max(1.0, std::abs(span));
        if ((x(i) <= bounds.lower(i) + tiny && g(i) > 0.0) ||
            (x(i) >= bounds.upper(i) - tiny && g(i) < 0.0)) {
            active[static_cast<std::size_t>(i)] = true;
        }
    }
    return active;
}

// Damped Newton polish on the free subspace, with the Hessian taken as
// central differences of the analytic gradient. Accepts steps by gradient-gap
// decrease rather than objective decrease: near the optimum the objective
// comparison drowns in rounding noise long before the gradient does.
inline void newton_polish(const Objective& objective, Eigen::VectorXd& x, double& value,
                          Eigen::VectorXd& grad, const BoxBounds& bounds, double gradient_tol) {
    const Eigen::Index dim = x.size();
    const auto project = [&](Eigen::VectorXd v) {
        return v.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    };

    for (int round = 0; round < 40; ++round) {
        double gap = projected_gap(x, grad, bounds);
        if (gap < gradient_tol) return;

        const std::vector<bool> active = active_set(x, grad, bounds);
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (!active[static_cast<std::size_t>(i)]) free_idx.push_back(i);
        }
        if (free_idx.empty()) return;
        const auto nf = static_cast<Eigen::Index>(free_idx.size());

        Eigen::MatrixXd hess(nf, nf);
        Eigen::VectorXd gp(dim), gm(dim);
        for (Eigen::Index c = 0; c < nf; ++c) {
            const Eigen::Index j = free_idx[static_cast<std::size_t>(c)];
            const double step = 1e-6 * std::max(1.0, std::abs(x(j)));
            Eigen::VectorXd xp = x;
            Eigen::VectorXd xm = x;
            xp(j) += step;
            xm(j) -= step;
            objective(xp, gp);
            objective(xm, gm);
            for (Eigen::Index r = 0; r < nf; ++r) {
                const Eigen::Index i = free_idx[static_cast<std::size_t>(r)];
                hess(r, c) = (gp(i) - gm(i)) / (2.0 * step);
            }
        }
        hess = 0.5 * (hess + hess.transpose()).eval();

        Eigen::VectorXd g_free(nf);
        for (Eigen::Index r = 0; r < nf; ++r) g_free(r) = grad(free_idx[static_cast<std::size_t>(r)]);

        bool accepted = false;
        double ridge = 0.0;
        for (int attempt = 0; attempt < 14 && !accepted; ++attempt) {
            Eigen::MatrixXd damped = hess;
            damped.diagonal().array() += ridge;
            const Eigen::VectorXd delta = damped.ldlt().solve(-g_free);
            if (delta.allFinite()) {
                Eigen::VectorXd x_new = x;
                for (Eigen::Index r = 0; r < nf; ++r) {
                    x_new(free_idx[static_cast<std::size_t>(r)]) += delta(r);
                }
                x_new = project(std::move(x_new));
                Eigen::VectorXd g_new(dim);
                const double f_new = objective(x_new, g_new);
                if (std::isfinite(f_new) && projected_gap(x_new, g_new, bounds) < gap) {
                    x = std::move(x_new);
                    grad = std::move(g_new);
                    value = f_new;
                    accepted = true;
                }
            }
            ridge = ridge == 0.0 ? std::max(1e-8, 1e-6 * hess.diagonal().cwiseAbs().maxCoeff())
                                 : ridge * 10.0;
        }
        if (!accepted) return;
    }
}

}  // namespace detail

// BFGS with projection onto a box: bound-active coordinates are masked out of
// the quasi-Newton direction, a backtracking line search drives the descent
// phase, and a Newton polish pushes the projected gradient below the
// tolerance once objective differences fall under rounding noise.
inline OptimResult minimize_bfgs(const detail::Objective& objective, Eigen::VectorXd x0,
                                 const BoxBounds& bounds, int max_iterations = 500,
                                 double gradient_tol = 1e-8) {
    const Eigen::Index dim = x0.size();
    const auto project = [&](Eigen::VectorXd v) {
        return v.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    };

    OptimResult out;
    Eigen::VectorXd x = project(std::move(x0));
    Eigen::VectorXd grad(dim);
    double value = objective(x, grad);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);
    bool scale_h_on_update = true;

    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        if (detail::projected_gap(x, grad, bounds) < gradient_tol) break;

        const std::vector<bool> active = detail::active_set(x, grad, bounds);
        Eigen::VectorXd g_masked = grad;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (active[static_cast<std::size_t>(i)]) g_masked(i) = 0.0;
        }

        Eigen::VectorXd direction = -(h_inv * g_masked);
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (active[static_cast<std::size_t>(i)]) direction(i) = 0.0;
        }
        if (direction.dot(g_masked) >= 0.0) {
            h_inv.setIdentity();
            scale_h_on_update = true;
            direction = -g_masked;
        }

        double step = 1.0;
        Eigen::VectorXd x_new;
        Eigen::VectorXd grad_new(dim);
        double value_new = value;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = project(x + step * direction);
            const Eigen::VectorXd actual = x_new - x;
            if (actual.cwiseAbs().maxCoeff() == 0.0) break;
            value_new = objective(x_new, grad_new);
            if (std::isfinite(value_new) &&
                value_new <= value + 1e-4 * grad.dot(actual)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // objective differences below noise; polish takes over

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = grad_new - grad;
        const double sty = s.dot(y);
        if (sty > 1e-12 * s.norm() * y.norm()) {
            // Standard curvature rescale before the first update; a far better
            // initial metric than the identity for ill-conditioned fits.
            if (scale_h_on_update) {
                h_inv = (sty / y.squaredNorm()) * Eigen::MatrixXd::Identity(dim, dim);
                scale_h_on_update = false;
            }
            const Eigen::VectorXd hy = h_inv * y;
            const double yhy = y.dot(hy);
            h_inv += ((sty + yhy) / (sty * sty)) * (s * s.transpose()) -
                     (hy * s.transpose() + s * hy.transpose()) / sty;
        }

        x = std::move(x_new);
        grad = std::move(grad_new);
        value = value_new;
    }

    detail::newton_polish(objective, x, value, grad, bounds, gradient_tol);

    out.x = std::move(x);
    out.value = value;
    out.iterations = iter;
    out.converged = detail::projected_gap(out.x, grad, bounds) < gradient_tol;
    return out;
}

}  // namespace mblingam
