#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mblingam/msboot.hpp"
#include "mblingam/parallel.hpp"
#include "mblingam/psifit.hpp"
#include "mblingam/rng.hpp"
#include "mblingam/types.hpp"

namespace mblingam {

class unknown_preset_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// External influences are Laplace with the given variance.
struct NoiseSpec {
    double variance = 2.0;
};

// Laplace(0, scale_b) draws; variance 2 * scale_b^2.
inline Eigen::VectorXd sample_laplace(double scale_b, long count, std::uint64_t seed) {
    if (!(scale_b > 0.0)) throw std::invalid_argument("sample_laplace: scale must be > 0");
    rng::Engine eng(seed);
    Eigen::VectorXd out(count);
    for (long i = 0; i < count; ++i) out(i) = eng.laplace(scale_b);
    return out;
}

// x = (I - B)^{-1} e columnwise with independent Laplace noise columns. Works
// for any B with invertible I - B, which covers the boundary generators whose
// symmetric B has no causal ordering.
inline DataMatrix generate_dataset(const ConnectionMatrix& b, long n, const NoiseSpec& noise,
                                   std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    if (!(noise.variance > 0.0)) throw std::invalid_argument("generate_dataset: variance must be > 0");
    const Eigen::Index m = b.size();
    const TotalEffectMatrix mixing = total_effects(b);

    const double scale_b = std::sqrt(noise.variance / 2.0);
    rng::Engine eng(rng::derive_seed(seed, rng::tag::noise));
    Eigen::MatrixXd e(m, n);
    for (long t = 0; t < n; ++t) {
        for (Eigen::Index i = 0; i < m; ++i) e(i, t) = eng.laplace(scale_b);
    }

    DataMatrix data;
    data.values = mixing.a * e;
    data.variable_names = default_variable_names(m);
    return data;
}

struct PlanParams {
    double sigma_sq_min = 1.0 / 9.0;
    double sigma_sq_max = 9.0;
    int num_scales = 13;
    long replicates = 1000;
};

struct SimConfig {
    ConnectionMatrix model;
    NoiseSpec noise;
    long n = 1000;
    int datasets = 1280;
    PlanParams plan;
    IcaConfig ica;
    int h = 3;
    std::vector<double> alpha_grid;  // defaults to 0.01..0.99 on construction
    std::uint64_t master_seed = 1;
};

inline std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    grid.reserve(99);
    for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
    return grid;
}

inline void validate(const SimConfig& cfg) {
    if (cfg.datasets < 1) throw std::invalid_argument("SimConfig: datasets must be >= 1");
    if (!(cfg.noise.variance > 0.0)) throw std::invalid_argument("SimConfig: noise variance must be > 0");
    for (double a : cfg.alpha_grid) {
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("SimConfig: alpha values must lie in (0,1)");
    }
    validate(cfg.ica);
}

struct HypothesisCalibration {
    HypothesisId id;
    std::vector<int> dataset_index;
    std::vector<double> p_bp;
    std::vector<double> p_mb;
    std::vector<double> reject_bp;  // per alpha: Prob{p_bp < alpha}
    std::vector<double> reject_mb;
    double ks_bp = 0.0;  // Kolmogorov-Smirnov distance to uniform
    double ks_mb = 0.0;
};

struct CalibrationReport {
    std::vector<std::string> variable_names;
    std::vector<double> alpha_grid;
    int datasets_requested = 0;
    int datasets_failed = 0;
    std::vector<HypothesisCalibration> hypotheses;
};

namespace detail {

inline double ks_to_uniform(std::vector<double> sample) {
    if (sample.empty()) return 0.0;
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double x = sample[i];
        ks = std::max(ks, (static_cast<double>(i) + 1.0) / n - x);
        ks = std::max(ks, x - static_cast<double>(i) / n);
    }
    return ks;
}

inline double reject_fraction(const std::vector<double>& sample, double alpha) {
    if (sample.empty()) return 0.0;
    long hits = 0;
    for (double p : sample) {
        if (p < alpha) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sample.size());
}

}  // namespace detail

// Full calibration study: generate datasets from the configured model, run
// the bootstrap-count and fitting stages on each, and aggregate per-hypothesis
// p-value samples into rejection curves and KS distances.
inline CalibrationReport run_experiment(const SimConfig& cfg, int threads = 1) {
    validate(cfg);
    const int m = static_cast<int>(cfg.model.size());
    const std::vector<double> alpha_grid =
        cfg.alpha_grid.empty() ? default_alpha_grid() : cfg.alpha_grid;

    const std::vector<HypothesisId> hypotheses = enumerate_hypotheses(m);
    const std::size_t num_hyp = hypotheses.size();

    struct DatasetOutcome {
        bool ok = false;
        std::vector<double> p_bp;
        std::vector<double> p_mb;
    };
    std::vector<DatasetOutcome> outcomes(static_cast<std::size_t>(cfg.datasets));

    PvalueOptions pv_options;
    pv_options.h = cfg.h;

    parallel_for_index(static_cast<std::size_t>(cfg.datasets), threads, [&](std::size_t idx) {
        const std::uint64_t dataset_seed =
            rng::derive_seed(cfg.master_seed, rng::tag::dataset, static_cast<std::uint64_t>(idx));
        DatasetOutcome& slot = outcomes[idx];
        try {
            const DataMatrix data = generate_dataset(cfg.model, cfg.n, cfg.noise, dataset_seed);
            const ScalePlan plan = build_scale_plan(cfg.n, cfg.plan.sigma_sq_min,
                                                    cfg.plan.sigma_sq_max, cfg.plan.num_scales,
                                                    cfg.plan.replicates);
            const BpCountTable table = count_events(
                data, plan, cfg.ica, rng::derive_seed(dataset_seed, rng::tag::replicate), 1);
            const PvalueReport report = compute_pvalues(table, pv_options);
            slot.p_bp.resize(num_hyp);
            slot.p_mb.resize(num_hyp);
            for (const HypothesisResult& r : report.results) {
                const auto hidx = static_cast<std::size_t>(hypothesis_index(m, r.id));
                slot.p_bp[hidx] = r.p_bp;
                slot.p_mb[hidx] = r.p_mb;
            }
            slot.ok = true;
        } catch (const std::exception&) {
            slot.ok = false;
        }
    });

    CalibrationReport report;
    report.variable_names = default_variable_names(m);
    report.alpha_grid = alpha_grid;
    report.datasets_requested = cfg.datasets;
    for (const DatasetOutcome& o : outcomes) {
        if (!o.ok) ++report.datasets_failed;
    }
    if (10 * report.datasets_failed > cfg.datasets) {
        throw pipeline_error("run_experiment: more than 10% of datasets failed");
    }

    report.hypotheses.resize(num_hyp);
    for (std::size_t hidx = 0; hidx < num_hyp; ++hidx) {
        HypothesisCalibration& cal = report.hypotheses[hidx];
        cal.id = hypotheses[hidx];
        for (int i = 0; i < cfg.datasets; ++i) {
            const DatasetOutcome& o = outcomes[static_cast<std::size_t>(i)];
            if (!o.ok) continue;
            cal.dataset_index.push_back(i);
            cal.p_bp.push_back(o.p_bp[hidx]);
            cal.p_mb.push_back(o.p_mb[hidx]);
        }
        cal.reject_bp.reserve(alpha_grid.size());
        cal.reject_mb.reserve(alpha_grid.size());
        for (double alpha : alpha_grid) {
            cal.reject_bp.push_back(detail::reject_fraction(cal.p_bp, alpha));
            cal.reject_mb.push_back(detail::reject_fraction(cal.p_mb, alpha));
        }
        cal.ks_bp = detail::ks_to_uniform(cal.p_bp);
        cal.ks_mb = detail::ks_to_uniform(cal.p_mb);
    }
    return report;
}

// ---- Presets -----------------------------------------------------------

namespace detail {

inline ConnectionMatrix two_var_symmetric(double b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 1) = b;
    m(1, 0) = b;
    return ConnectionMatrix{std::move(m)};
}

inline ConnectionMatrix six_var_chain(double b) {
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
    return ConnectionMatrix{std::move(m)};
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
    return {"paper-2var-b0", "paper-2var-b001", "paper-2var-b01", "paper-6var-b0",
            "paper-6var-b05", "desk-2var-b0",   "desk-2var-b001", "desk-2var-b01",
            "desk-6var-b0",   "desk-6var-b05"};
}

// Named study configurations: the five full-size models (1280 datasets,
// Q = 1000) and desk-scale variants that shrink the replication counts
// (200 datasets, Q = 500) while keeping n = 1000 and the 13-scale ladder.
inline SimConfig preset_config(const std::string& name) {
    SimConfig cfg;
    cfg.alpha_grid = default_alpha_grid();

    std::string base = name;
    if (name.rfind("desk-", 0) == 0) {
        cfg.datasets = 200;
        cfg.plan.replicates = 500;
        base = "paper-" + name.substr(5);
    }

    if (base == "paper-2var-b0") {
        cfg.model = detail::two_var_symmetric(0.0);
    } else if (base == "paper-2var-b001") {
        cfg.model = detail::two_var_symmetric(0.01);
    } else if (base == "paper-2var-b01") {
        cfg.model = detail::two_var_symmetric(0.1);
    } else if (base == "paper-6var-b0") {
        cfg.model = detail::six_var_chain(0.0);
    } else if (base == "paper-6var-b05") {
        cfg.model = detail::six_var_chain(0.5);
    } else {
        throw unknown_preset_error("unknown preset: " + name);
    }
    return cfg;
}

}  // namespace mblingam
