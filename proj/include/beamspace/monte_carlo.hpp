// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "capacity.hpp"
#include "channel.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace beamspace {

// How the equal-power policy spends the dual budgets on a P-mode system.
enum class DualEpRule {
    truncate,  // P_rad / N_eff on the first N_eff modes (the EADoF allocation)
    scale,     // equal power on all P modes, scaled down to satisfy both budgets
};

// Whether allocations are re-optimized per channel draw or computed once from
// the mean channel (E[H^H H] = M I) and held fixed.
enum class AllocationTiming { per_trial, average_channel };

struct CurveOptions {
    ConstraintMode mode = ConstraintMode::dual;
    std::vector<Policy> policies{Policy::ep, Policy::wf};
    std::vector<int> p_list;
    double snr_db = 20.0;
    double epsilon = 0.02;  // Ohm^-1
    double sigma_sq = 1.0;
    int trials = 500;
    std::uint64_t seed = 1;
    DualEpRule dual_ep_rule = DualEpRule::scale;
    AllocationTiming timing = AllocationTiming::per_trial;
    unsigned threads = worker_count();
};

struct CurvePoint {
    int P = 0;
    Policy policy = Policy::wf;
    ConstraintMode mode = ConstraintMode::dual;
    double snr_db = 0.0;
    double epsilon = 0.0;
    double capacity_mean_bits = 0.0;
    double capacity_std = 0.0;
    double ideal_mean_bits = 0.0;  // ideal P x P MIMO, same policy and budget
    double ideal_std = 0.0;
    int n_eff = 0;
    int trials = 0;
    bool feasible = true;
};

struct SampleStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation
};

inline SampleStats sample_stats(const std::vector<double>& values) {
    SampleStats s;
    if (values.empty()) return s;
    s.mean = pairwise_sum(values) / static_cast<double>(values.size());
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - s.mean) * (values[i] - s.mean);
        s.std = std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
    }
    return s;
}

// Capacity of one P-mode system (P receive antennas) for one channel draw.
// `allocation_channel` is the channel used to choose the covariance; the
// capacity is always evaluated on `h_iid`.
inline AllocationResult allocate(const MatrixXc& h_iid, const MatrixXc& allocation_channel, const VectorXr& lambda, const ConstraintSpec& spec,
                                 Policy policy, DualEpRule rule) {
    AllocationResult r;
    switch (spec.mode) {
    case ConstraintMode::radiated: r = capacity_radiated(allocation_channel, spec, policy, lambda); break;
    case ConstraintMode::current: r = capacity_current(allocation_channel, lambda, spec, policy); break;
    case ConstraintMode::dual:
        if (policy == Policy::wf) r = dual_wf(allocation_channel, lambda, spec);
        else r = rule == DualEpRule::truncate ? dual_ep(allocation_channel, lambda, spec) : dual_ep_scaled(allocation_channel, lambda, spec);
        break;
    }
    if (&allocation_channel != &h_iid) {
        const MatrixXc channel = spec.mode == ConstraintMode::current
                                     ? MatrixXc(h_iid * lambda.cwiseMax(0.0).cwiseSqrt().cast<cdouble>().asDiagonal())
                                     : h_iid;
        r.capacity_bits = capacity_bits(channel, r.covariance, spec.sigma_sq);
    }
    return r;
}

// Mean capacity versus the number P of leading modes, for each policy, with an
// ideal P x P MIMO reference drawn on the same channel realizations.
// Draws for curve point P, trial t come from sub-stream (P, t) of `seed`.
inline std::vector<CurvePoint> monte_carlo_capacity(const VectorXr& lambda, const CurveOptions& options) {
    detail::require(options.trials >= 1, "trials must be at least 1", "trials");
    detail::require(options.epsilon > 0.0, "epsilon must be positive", "epsilon");
    for (int p : options.p_list)
        detail::require(p >= 1 && p <= lambda.size(), "P = " + std::to_string(p) + " outside 1.." + std::to_string(lambda.size()), "P");

    const ConstraintSpec spec = ConstraintSpec::from_snr(options.mode, options.snr_db, options.epsilon, options.sigma_sq);
    ConstraintSpec ideal_spec = spec;
    ideal_spec.mode = ConstraintMode::radiated;
    if (options.mode == ConstraintMode::current) ideal_spec.p_rad = spec.i_in_sq;

    std::vector<CurvePoint> out;
    for (int p : options.p_list) {
        const VectorXr lam = lambda.head(p);
        const std::size_t np = options.policies.size();
        std::vector<std::vector<double>> cap(np, std::vector<double>(options.trials));
        std::vector<std::vector<double>> ideal(np, std::vector<double>(options.trials));
        std::vector<char> infeasible(np, 0);

        const MatrixXc mean_channel = MatrixXc::Identity(p, p) * std::sqrt(static_cast<double>(p));
        parallel_for(
            static_cast<std::size_t>(options.trials),
            [&](std::size_t t) {
                auto rng = trial_rng(options.seed, static_cast<std::uint64_t>(p), static_cast<int>(t));
                const MatrixXc h = complex_gaussian(p, p, rng);
                const MatrixXc& chooser = options.timing == AllocationTiming::per_trial ? h : mean_channel;
                for (std::size_t k = 0; k < np; ++k) {
                    try {
                        const auto r = allocate(h, chooser, lam, spec, options.policies[k], options.dual_ep_rule);
                        cap[k][t] = r.capacity_bits;
                        if (!r.feasible) infeasible[k] = 1;
                        const auto ri = allocate(h, chooser, VectorXr::Ones(p), ideal_spec, options.policies[k], options.dual_ep_rule);
                        ideal[k][t] = ri.capacity_bits;
                    } catch (const NumericalError& e) {
                        throw NumericalError(std::string(e.what()) + " (P = " + std::to_string(p) + ", trial " + std::to_string(t) + ")");
                    }
                }
            },
            options.threads);

        for (std::size_t k = 0; k < np; ++k) {
            CurvePoint pt;
            pt.P = p;
            pt.policy = options.policies[k];
            pt.mode = options.mode;
            pt.snr_db = options.snr_db;
            pt.epsilon = options.epsilon;
            const auto s = sample_stats(cap[k]);
            const auto si = sample_stats(ideal[k]);
            pt.capacity_mean_bits = s.mean;
            pt.capacity_std = s.std;
            pt.ideal_mean_bits = si.mean;
            pt.ideal_std = si.std;
            pt.n_eff = eadof(lam, options.epsilon);
            pt.trials = options.trials;
            pt.feasible = infeasible[k] == 0;
            out.push_back(pt);
        }
    }
    return out;
}

} // namespace beamspace
