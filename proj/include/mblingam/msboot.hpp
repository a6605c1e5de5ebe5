#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mblingam/lingam.hpp"
#include "mblingam/parallel.hpp"
#include "mblingam/rng.hpp"
#include "mblingam/types.hpp"

namespace mblingam {

struct ScaleEntry {
    long n_star = 0;
    double sigma_sq = 0.0;  // n / n_star, recomputed after rounding
};

struct ScalePlan {
    std::vector<ScaleEntry> entries;  // ascending sigma_sq
    long n = 0;
    long replicates = 0;  // Q

    int num_scales() const { return static_cast<int>(entries.size()); }

    // Index of the scale whose sigma_sq is closest to 1 (the ordinary
    // bootstrap); first such index on ties.
    int scale_nearest_unit() const {
        int best = 0;
        double best_gap = std::abs(entries.front().sigma_sq - 1.0);
        for (int d = 1; d < num_scales(); ++d) {
            const double gap = std::abs(entries[static_cast<std::size_t>(d)].sigma_sq - 1.0);
            if (gap < best_gap) {
                best_gap = gap;
                best = d;
            }
        }
        return best;
    }
};

// Geometric ladder of target scales over [sigma_sq_min, sigma_sq_max]. Bootstrap
// sample sizes are rounded to integers (floor 2), duplicates collapsed, and each
// sigma_sq recomputed as n / n_star so downstream fits see the sampled scale.
inline ScalePlan build_scale_plan(long n, double sigma_sq_min, double sigma_sq_max, int num_scales,
                                  long replicates = 1000) {
    if (!(sigma_sq_min > 0.0) || !(sigma_sq_max > sigma_sq_min)) {
        throw std::invalid_argument("build_scale_plan: need 0 < sigma_sq_min < sigma_sq_max");
    }
    if (num_scales < 2) throw std::invalid_argument("build_scale_plan: need at least 2 scales");
    if (static_cast<double>(n) / sigma_sq_max < 2.0) {
        throw std::invalid_argument("build_scale_plan: n / sigma_sq_max must be at least 2");
    }
    if (replicates < 1) throw std::invalid_argument("build_scale_plan: replicates must be >= 1");

    const double log_min = std::log(sigma_sq_min);
    const double log_max = std::log(sigma_sq_max);
    std::vector<long> n_stars;
    for (int d = 0; d < num_scales; ++d) {
        const double t = num_scales == 1 ? 0.0 : static_cast<double>(d) / (num_scales - 1);
        const double target = std::exp(log_min + t * (log_max - log_min));
        long n_star = std::llround(static_cast<double>(n) / target);
        if (n_star < 2) n_star = 2;
        n_stars.push_back(n_star);
    }

    // n_star descending == sigma_sq ascending; collapse rounding collisions.
    std::sort(n_stars.begin(), n_stars.end(), std::greater<>());
    n_stars.erase(std::unique(n_stars.begin(), n_stars.end()), n_stars.end());
    if (n_stars.size() < 2) {
        throw std::invalid_argument("build_scale_plan: fewer than 2 distinct scales after rounding");
    }

    ScalePlan plan;
    plan.n = n;
    plan.replicates = replicates;
    for (long n_star : n_stars) {
        plan.entries.push_back(ScaleEntry{n_star, static_cast<double>(n) / static_cast<double>(n_star)});
    }
    return plan;
}

// n_star columns drawn i.i.d. uniformly with replacement from the columns of
// data; fully determined by the seed.
inline DataMatrix resample(const DataMatrix& data, long n_star, std::uint64_t seed) {
    if (n_star < 2) throw std::invalid_argument("resample: n_star must be >= 2");
    const Eigen::Index n = data.num_samples();
    rng::Engine eng(seed);
    DataMatrix out;
    out.variable_names = data.variable_names;
    out.values.resize(data.num_variables(), n_star);
    for (long t = 0; t < n_star; ++t) {
        const auto idx = static_cast<Eigen::Index>(eng.uniform_index(static_cast<std::size_t>(n)));
        out.values.col(t) = data.values.col(idx);
    }
    return out;
}

// Per-hypothesis, per-scale bootstrap event counts out of Q replicates.
struct BpCountTable {
    ScalePlan plan;
    std::vector<std::string> variable_names;
    int m = 0;
    std::vector<HypothesisId> hypotheses;       // enumerate_hypotheses(m) order
    std::vector<std::vector<long>> counts;      // [scale][hypothesis]
    std::vector<long> q_effective;              // per scale, excludes failed replicates

    long count_for(int scale, const HypothesisId& h) const {
        return counts[static_cast<std::size_t>(scale)]
                     [static_cast<std::size_t>(hypothesis_index(m, h))];
    }
};

// Step through every (scale, replicate) cell: resample, fit LiNGAM, and mark
// which signed hypotheses the estimate supports. Replicates whose fit fails
// (rank-deficient resample) are dropped from that scale's effective Q.
inline BpCountTable count_events(const DataMatrix& data, const ScalePlan& plan,
                                 const IcaConfig& cfg, std::uint64_t master_seed,
                                 int threads = 1) {
    validate(data);
    validate(cfg);
    if (plan.num_scales() < 2) throw std::invalid_argument("count_events: plan needs >= 2 scales");

    const int m = static_cast<int>(data.num_variables());
    const int num_scales = plan.num_scales();
    const long q = plan.replicates;
    const std::vector<HypothesisId> hypotheses = enumerate_hypotheses(m);
    const std::size_t num_hyp = hypotheses.size();

    std::vector<std::atomic<long>> counts(static_cast<std::size_t>(num_scales) * num_hyp);
    std::vector<std::atomic<long>> failures(static_cast<std::size_t>(num_scales));
    for (auto& c : counts) c.store(0);
    for (auto& f : failures) f.store(0);

    const std::size_t total = static_cast<std::size_t>(num_scales) * static_cast<std::size_t>(q);
    parallel_for_index(total, threads, [&](std::size_t task) {
        const int d = static_cast<int>(task / static_cast<std::size_t>(q));
        const long rep = static_cast<long>(task % static_cast<std::size_t>(q));
        const std::uint64_t rep_seed = rng::derive_seed(
            master_seed, rng::tag::replicate, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(rep));

        const DataMatrix boot =
            resample(data, plan.entries[static_cast<std::size_t>(d)].n_star,
                     rng::derive_seed(rep_seed, rng::tag::resample));
        IcaConfig rep_cfg = cfg;
        rep_cfg.seed = rng::derive_seed(rep_seed, rng::tag::ica);

        LingamEstimate est;
        try {
            est = lingam_fit(boot, rep_cfg);
        } catch (const rank_deficiency_error&) {
            failures[static_cast<std::size_t>(d)].fetch_add(1);
            return;
        } catch (const degenerate_assignment_error&) {
            failures[static_cast<std::size_t>(d)].fetch_add(1);
            return;
        }
        for (std::size_t hidx = 0; hidx < num_hyp; ++hidx) {
            if (hypothesis_indicator(est, hypotheses[hidx]) == 1) {
                counts[static_cast<std::size_t>(d) * num_hyp + hidx].fetch_add(1);
            }
        }
    });

    BpCountTable table;
    table.plan = plan;
    table.variable_names =
        data.variable_names.empty() ? default_variable_names(m) : data.variable_names;
    table.m = m;
    table.hypotheses = hypotheses;
    table.counts.assign(static_cast<std::size_t>(num_scales), std::vector<long>(num_hyp, 0));
    table.q_effective.assign(static_cast<std::size_t>(num_scales), 0);
    for (int d = 0; d < num_scales; ++d) {
        const long failed = failures[static_cast<std::size_t>(d)].load();
        const long q_eff = q - failed;
        if (q_eff < (q + 1) / 2) {
            throw pipeline_error("count_events: more than half the replicates failed at one scale");
        }
        table.q_effective[static_cast<std::size_t>(d)] = q_eff;
        for (std::size_t hidx = 0; hidx < num_hyp; ++hidx) {
            table.counts[static_cast<std::size_t>(d)][hidx] =
                counts[static_cast<std::size_t>(d) * num_hyp + hidx].load();
        }
    }
    return table;
}

}  // namespace mblingam
