#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mblingam/jet.hpp"
#include "mblingam/msboot.hpp"
#include "mblingam/normal.hpp"
#include "mblingam/optimize.hpp"
#include "mblingam/types.hpp"

namespace mblingam {

enum class PsiKind { poly, sing };

inline const char* psi_kind_name(PsiKind k) { return k == PsiKind::poly ? "poly" : "sing"; }

// Scaling-law model for the normalized bootstrap z-value as a function of
// sigma^2. poly: sum_j beta_j t^j. sing: beta_0 + sum_{j>=1} beta_j t^j /
// (1 + beta_{h-1} (sqrt(t) - 1)) with beta_{h-1} in [0,1].
struct PsiModel {
    PsiKind kind = PsiKind::poly;
    std::vector<double> beta;

    int h() const { return static_cast<int>(beta.size()); }
};

inline void validate(const PsiModel& model) {
    const int h = model.h();
    if (model.kind == PsiKind::poly) {
        if (h < 1) throw std::invalid_argument("PsiModel: poly needs h >= 1");
    } else {
        if (h < 3) throw std::invalid_argument("PsiModel: sing needs h >= 3");
        const double last = model.beta.back();
        if (!(last >= 0.0 && last <= 1.0)) {
            throw std::invalid_argument("PsiModel: sing needs trailing beta in [0,1]");
        }
    }
}

namespace detail {

template <int Order>
Jet<Order> psi_jet(const PsiModel& model, double sigma_sq) {
    using J = Jet<Order>;
    const J t = J::variable(sigma_sq);
    if (model.kind == PsiKind::poly) {
        J acc = J::constant(0.0);
        for (int j = 0; j < model.h(); ++j) {
            acc = acc + model.beta[static_cast<std::size_t>(j)] * pow_int(t, j);
        }
        return acc;
    }
    if (!(sigma_sq > 0.0)) throw std::domain_error("psi: sing model needs sigma_sq > 0");
    const J sigma = sqrt(t);
    const int h = model.h();
    const J denom = J::constant(1.0) +
                    model.beta[static_cast<std::size_t>(h - 1)] * (sigma - J::constant(1.0));
    J acc = J::constant(model.beta[0]);
    for (int j = 1; j <= h - 2; ++j) {
        acc = acc + model.beta[static_cast<std::size_t>(j)] * (pow_int(t, j) / denom);
    }
    return acc;
}

}  // namespace detail

inline double psi_eval(const PsiModel& model, double sigma_sq) {
    validate(model);
    return detail::psi_jet<0>(model, sigma_sq).coeff[0];
}

// psi and its first j_max derivatives with respect to sigma^2.
inline std::vector<double> psi_derivs(const PsiModel& model, double sigma_sq, int j_max) {
    validate(model);
    if (j_max < 0 || j_max > 4) throw std::invalid_argument("psi_derivs: j_max must be in [0,4]");
    const Jet<4> jet = detail::psi_jet<4>(model, sigma_sq);
    std::vector<double> out(static_cast<std::size_t>(j_max) + 1);
    for (int k = 0; k <= j_max; ++k) out[static_cast<std::size_t>(k)] = jet.derivative(k);
    return out;
}

// Bootstrap z-value from a count, with the fraction clipped away from 0 and 1.
// Initialization and diagnostics only; ML fitting works on the raw counts.
inline double z_value(long count, long q_effective) {
    if (q_effective < 1) throw std::invalid_argument("z_value: q_effective must be >= 1");
    const double lo = 1.0 / (2.0 * static_cast<double>(q_effective));
    double frac = static_cast<double>(count) / static_cast<double>(q_effective);
    frac = std::min(std::max(frac, lo), 1.0 - lo);
    return -normal_quantile(frac);
}

struct ScaleObservation {
    double sigma_sq = 0.0;
    long count = 0;
    long q = 0;
};

enum class Saturation { none, all_zero, all_q };

struct PsiFitResult {
    PsiModel model;
    double nll = 0.0;
    double aic = 0.0;
    bool converged = false;
    Saturation saturation = Saturation::none;
    // Per-scale (sigma, sigma * z) diagnostics from the clipped fractions.
    std::vector<std::pair<double, double>> z_values;
};

struct PsiFitOptions {
    int max_iterations = 500;
    double gradient_tol = 1e-8;
};

namespace detail {

// d psi / d beta at one scale.
inline Eigen::VectorXd psi_beta_gradient(const PsiModel& model, double sigma_sq) {
    const int h = model.h();
    Eigen::VectorXd g(h);
    if (model.kind == PsiKind::poly) {
        double power = 1.0;
        for (int j = 0; j < h; ++j) {
            g(j) = power;
            power *= sigma_sq;
        }
        return g;
    }
    const double sigma = std::sqrt(sigma_sq);
    const double denom = 1.0 + model.beta[static_cast<std::size_t>(h - 1)] * (sigma - 1.0);
    g(0) = 1.0;
    double weighted_sum = 0.0;
    double power = sigma_sq;
    for (int j = 1; j <= h - 2; ++j) {
        g(j) = power / denom;
        weighted_sum += model.beta[static_cast<std::size_t>(j)] * power;
        power *= sigma_sq;
    }
    g(h - 1) = -(sigma - 1.0) * weighted_sum / (denom * denom);
    return g;
}

// Negative log binomial likelihood (without the constant binomial
// coefficients) and its gradient in beta. p_d = Phi(-psi(t_d)/sigma_d).
inline double nll_core(const PsiModel& model, const std::vector<ScaleObservation>& obs,
                       Eigen::VectorXd& grad) {
    const int h = model.h();
    grad.setZero(h);
    double nll = 0.0;
    for (const ScaleObservation& o : obs) {
        const double sigma = std::sqrt(o.sigma_sq);
        const double eta = psi_jet<0>(model, o.sigma_sq).coeff[0] / sigma;
        const double c = static_cast<double>(o.count);
        const double qc = static_cast<double>(o.q - o.count);
        nll += -c * log_normal_cdf(-eta) - qc * log_normal_cdf(eta);
        const double dnll_deta = c * normal_hazard(-eta) - qc * normal_hazard(eta);
        grad += (dnll_deta / sigma) * psi_beta_gradient(model, o.sigma_sq);
    }
    return nll;
}

inline double log_choose(long q, long c) {
    return std::lgamma(static_cast<double>(q) + 1.0) - std::lgamma(static_cast<double>(c) + 1.0) -
           std::lgamma(static_cast<double>(q - c) + 1.0);
}

// Weighted least squares of the clipped normalized z-values on a polynomial
// design; the delta-method variance of sigma*z supplies the weights.
inline Eigen::VectorXd wls_init(const std::vector<ScaleObservation>& obs, int num_coeffs) {
    const auto d = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd design(d, num_coeffs);
    Eigen::VectorXd target(d);
    Eigen::VectorXd weight(d);
    for (Eigen::Index r = 0; r < d; ++r) {
        const ScaleObservation& o = obs[static_cast<std::size_t>(r)];
        const double lo = 1.0 / (2.0 * static_cast<double>(o.q));
        const double frac = std::min(std::max(static_cast<double>(o.count) / static_cast<double>(o.q), lo), 1.0 - lo);
        const double z = -normal_quantile(frac);
        const double sigma = std::sqrt(o.sigma_sq);
        target(r) = sigma * z;
        const double pdf = normal_pdf(z);
        weight(r) = static_cast<double>(o.q) * pdf * pdf / (o.sigma_sq * frac * (1.0 - frac));
        double power = 1.0;
        for (int j = 0; j < num_coeffs; ++j) {
            design(r, j) = power;
            power *= o.sigma_sq;
        }
    }
    const Eigen::MatrixXd xtw = design.transpose() * weight.asDiagonal();
    const Eigen::VectorXd beta = (xtw * design).ldlt().solve(xtw * target);
    if (!beta.allFinite()) return Eigen::VectorXd::Zero(num_coeffs);
    return beta;
}

}  // namespace detail

// Maximum-likelihood fit of one psi model to per-scale counts. Scales with
// q = 0 are dropped. A table at 0 or Q on every scale short-circuits to a
// saturated fit whose extrapolated p-value is pinned at 0 or 1.
inline PsiFitResult fit_binomial_ml(const std::vector<ScaleObservation>& all_obs, PsiKind kind,
                                    int h, const PsiFitOptions& options = {}) {
    if (kind == PsiKind::poly && h < 1) throw std::invalid_argument("fit_binomial_ml: poly needs h >= 1");
    if (kind == PsiKind::sing && h < 3) throw std::invalid_argument("fit_binomial_ml: sing needs h >= 3");

    std::vector<ScaleObservation> obs;
    obs.reserve(all_obs.size());
    for (const ScaleObservation& o : all_obs) {
        if (o.q == 0) continue;
        if (o.count < 0 || o.count > o.q || !(o.sigma_sq > 0.0)) {
            throw std::invalid_argument("fit_binomial_ml: invalid scale observation");
        }
        obs.push_back(o);
    }
    if (static_cast<int>(obs.size()) < h) {
        throw std::invalid_argument("fit_binomial_ml: fewer usable scales than parameters");
    }

    PsiFitResult result;
    result.model.kind = kind;
    for (const ScaleObservation& o : obs) {
        const double sigma = std::sqrt(o.sigma_sq);
        result.z_values.emplace_back(sigma, sigma * z_value(o.count, o.q));
    }

    bool all_zero = true;
    bool all_q = true;
    for (const ScaleObservation& o : obs) {
        if (o.count != 0) all_zero = false;
        if (o.count != o.q) all_q = false;
    }
    if (all_zero || all_q) {
        result.model.beta.assign(static_cast<std::size_t>(h), 0.0);
        result.saturation = all_zero ? Saturation::all_zero : Saturation::all_q;
        result.nll = 0.0;  // degenerate optimum: the observed table has probability 1
        result.aic = 2.0 * h;
        result.converged = true;
        return result;
    }

    const bool sing = kind == PsiKind::sing;
    Eigen::VectorXd x0(h);
    const Eigen::VectorXd linear_init = detail::wls_init(obs, sing ? h - 1 : h);
    x0.head(linear_init.size()) = linear_init;
    if (sing) x0(h - 1) = 0.5;

    BoxBounds bounds = BoxBounds::unbounded(h);
    if (sing) {
        bounds.lower(h - 1) = 0.0;
        bounds.upper(h - 1) = 1.0;
    }

    PsiModel trial{kind, std::vector<double>(static_cast<std::size_t>(h), 0.0)};
    const auto objective = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& grad) -> double {
        for (int j = 0; j < h; ++j) trial.beta[static_cast<std::size_t>(j)] = beta(j);
        return detail::nll_core(trial, obs, grad);
    };

    const OptimResult opt =
        minimize_bfgs(objective, x0, bounds, options.max_iterations, options.gradient_tol);

    double constant = 0.0;
    for (const ScaleObservation& o : obs) constant -= detail::log_choose(o.q, o.count);

    result.model.beta.assign(opt.x.data(), opt.x.data() + h);
    result.nll = opt.value + constant;
    result.aic = 2.0 * result.nll + 2.0 * h;
    result.converged = opt.converged;
    return result;
}

// Minimum-AIC converged fit; ties go to fewer parameters, then to poly.
inline const PsiFitResult& select_model(const std::vector<PsiFitResult>& fits) {
    const PsiFitResult* best = nullptr;
    for (const PsiFitResult& fit : fits) {
        if (!fit.converged) continue;
        if (best == nullptr) {
            best = &fit;
            continue;
        }
        constexpr double tie_tol = 1e-9;
        if (fit.aic < best->aic - tie_tol) {
            best = &fit;
        } else if (std::abs(fit.aic - best->aic) <= tie_tol) {
            if (fit.model.h() < best->model.h() ||
                (fit.model.h() == best->model.h() && fit.model.kind == PsiKind::poly &&
                 best->model.kind == PsiKind::sing)) {
                best = &fit;
            }
        }
    }
    if (best == nullptr) throw pipeline_error("select_model: no converged fit");
    return *best;
}

// Taylor extrapolation of the fitted law toward sigma^2 = -1, expanded at
// sigma_0^2 = 1: p = Phi(-sum_j (-2)^j/j! psi^(j)(1)), truncated after h terms.
inline double extrapolate_pvalue(const PsiFitResult& best, int h) {
    if (h < 1) throw std::invalid_argument("extrapolate_pvalue: h must be >= 1");
    if (h > 5) throw std::invalid_argument("extrapolate_pvalue: derivatives beyond order 4 unsupported");
    if (best.saturation == Saturation::all_zero) return 0.0;
    if (best.saturation == Saturation::all_q) return 1.0;

    const std::vector<double> derivs = psi_derivs(best.model, 1.0, h - 1);
    double arg = 0.0;
    double coeff = 1.0;  // (-2)^j / j!
    for (int j = 0; j < h; ++j) {
        arg += coeff * derivs[static_cast<std::size_t>(j)];
        coeff *= -2.0 / (j + 1);
    }
    return normal_cdf(-arg);
}

struct PvalueOptions {
    int h = 3;
    std::vector<std::pair<PsiKind, int>> candidates = {
        {PsiKind::poly, 1}, {PsiKind::poly, 2}, {PsiKind::poly, 3}, {PsiKind::sing, 3}};
    PsiFitOptions fit;
};

struct HypothesisResult {
    HypothesisId id;
    double p_bp = 0.0;
    double p_mb = 0.0;
    int bp_scale_index = 0;  // scale used for p_bp (nearest sigma_sq = 1)
    PsiFitResult best;
    std::vector<PsiFitResult> candidates;
    std::vector<std::string> warnings;
};

struct PvalueReport {
    std::vector<std::string> variable_names;
    int m = 0;
    int h = 3;
    std::vector<HypothesisResult> results;
};

// Full fitting stage: per hypothesis, fit every candidate psi model to the
// count table, select by AIC, and extrapolate.
inline PvalueReport compute_pvalues(const BpCountTable& table, const PvalueOptions& options = {}) {
    PvalueReport report;
    report.variable_names = table.variable_names;
    report.m = table.m;
    report.h = options.h;

    const int num_scales = table.plan.num_scales();
    const int bp_scale = table.plan.scale_nearest_unit();

    for (std::size_t hidx = 0; hidx < table.hypotheses.size(); ++hidx) {
        HypothesisResult entry;
        entry.id = table.hypotheses[hidx];
        entry.bp_scale_index = bp_scale;

        std::vector<ScaleObservation> obs;
        obs.reserve(static_cast<std::size_t>(num_scales));
        for (int d = 0; d < num_scales; ++d) {
            obs.push_back(ScaleObservation{table.plan.entries[static_cast<std::size_t>(d)].sigma_sq,
                                           table.counts[static_cast<std::size_t>(d)][hidx],
                                           table.q_effective[static_cast<std::size_t>(d)]});
        }

        const ScaleObservation& bp_obs = obs[static_cast<std::size_t>(bp_scale)];
        if (bp_obs.q < 1) throw pipeline_error("compute_pvalues: no effective replicates at the unit scale");
        entry.p_bp = static_cast<double>(bp_obs.count) / static_cast<double>(bp_obs.q);

        bool all_zero = true;
        bool all_q = true;
        for (const ScaleObservation& o : obs) {
            if (o.q == 0) continue;
            if (o.count != 0) all_zero = false;
            if (o.count != o.q) all_q = false;
        }
        if (all_zero || all_q) {
            entry.best = fit_binomial_ml(obs, PsiKind::poly, 1, options.fit);
            entry.p_mb = all_zero ? 0.0 : 1.0;
            entry.warnings.push_back("saturated: every replicate at every scale agreed");
            report.results.push_back(std::move(entry));
            continue;
        }

        for (const auto& [kind, h] : options.candidates) {
            entry.candidates.push_back(fit_binomial_ml(obs, kind, h, options.fit));
        }
        entry.best = select_model(entry.candidates);
        entry.p_mb = extrapolate_pvalue(entry.best, options.h);
        report.results.push_back(std::move(entry));
    }
    return report;
}

}  // namespace mblingam
