// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capacity.hpp"
#include "channel.hpp"
#include "csv.hpp"
#include "loaded_network.hpp"
#include "monte_carlo.hpp"
#include "parallel.hpp"
#include "port_model.hpp"

namespace beamspace {

// ---- discretization convergence ------------------------------------------

enum class Receiver { mirror, ideal };

inline Receiver parse_receiver(const std::string& s) {
    if (s == "mirror") return Receiver::mirror;
    if (s == "ideal") return Receiver::ideal;
    throw ValidationError("unknown receiver '" + s + "' (expected mirror or ideal)", "rx");
}

struct ConvergenceOptions {
    std::vector<int> densities{2, 4, 6, 8, 10};  // sub-elements per wavelength
    double size_wavelengths = 1.0;               // square aperture side
    double frequency_hz = 2.4e9;
    int ring_points = 256;
    double snr_db = 20.0;  // I_in^2 / sigma^2
    int trials = 500;
    std::uint64_t seed = 1;
    Receiver rx = Receiver::mirror;
    unsigned threads = worker_count();
};

struct ConvergenceRow {
    int density = 0;
    int ports = 0;
    int usable_rank = 0;
    double capacity_mean_bits = 0.0;
    double capacity_std = 0.0;
    int trials = 0;
};

// z-directed sub-elements on a square aperture, single polarization, azimuthal
// ring PAS, current-norm water-filling. The mirror receiver is a copy of the
// transmitter: H = Q Lambda^1/2 H_iid Lambda^1/2 Q^H with i.i.d. H_iid.
inline std::vector<ConvergenceRow> convergence_experiment(const ConvergenceOptions& o) {
    detail::require(!o.densities.empty(), "density list is empty", "densities");
    for (std::size_t i = 0; i < o.densities.size(); ++i) {
        detail::require(o.densities[i] >= 1, "densities must be positive", "densities");
        if (i) detail::require(o.densities[i] > o.densities[i - 1], "densities must be ascending", "densities");
    }
    detail::require(o.trials >= 1, "trials must be at least 1", "trials");
    const double wavelength = kSpeedOfLight / o.frequency_hz;
    const ConstraintSpec spec = ConstraintSpec::from_snr(ConstraintMode::current, o.snr_db, 1.0);

    std::vector<ConvergenceRow> out;
    for (int density : o.densities) {
        const int count = static_cast<int>(std::lround(density * o.size_wavelengths));
        DipoleGridSpec g;
        g.rows = g.cols = std::max(1, count);
        g.spacing_m = wavelength / density;
        g.frequency_hz = o.frequency_hz;
        g.orientation = Orientation::z;
        g.grid = ring_grid(o.ring_points, 1);
        const auto ds = synthesize_dipole_grid(g);
        const auto basis = modal_decomposition(ds);
        const int r = basis.usable_rank;
        const VectorXr lam = basis.lambda.head(r);
        const VectorXr root = lam.cwiseSqrt();

        std::vector<double> cap(static_cast<std::size_t>(o.trials));
        parallel_for(
            cap.size(),
            [&](std::size_t t) {
                auto rng = trial_rng(o.seed, static_cast<std::uint64_t>(density), static_cast<int>(t));
                const MatrixXc h = complex_gaussian(r, r, rng);
                MatrixXc channel = h * root.cast<cdouble>().asDiagonal();  // current basis
                if (o.rx == Receiver::mirror) channel = root.cast<cdouble>().asDiagonal() * channel;
                cap[t] = capacity_radiated(channel, ConstraintSpec{spec.i_in_sq, spec.i_in_sq, spec.sigma_sq, ConstraintMode::radiated},
                                           Policy::wf)
                             .capacity_bits;
            },
            o.threads);
        const auto s = sample_stats(cap);
        out.push_back({density, ds.ports(), r, s.mean, s.std, o.trials});
    }
    return out;
}

// ---- EADoF table -----------------------------------------------------------

struct EadofRow {
    double epsilon = 0.0;
    int n_eff = 0;
};

inline std::vector<EadofRow> eadof_table(const VectorXr& lambda, const std::vector<double>& eps_grid) {
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        detail::require(eps_grid[i] > 0.0 && std::isfinite(eps_grid[i]), "epsilon values must be positive", "epsilon");
        if (i) detail::require(eps_grid[i] > eps_grid[i - 1], "epsilon grid must be ascending", "epsilon");
    }
    std::vector<EadofRow> out;
    for (double e : eps_grid) out.push_back({e, eadof(lambda, e)});
    return out;
}

// n log-spaced values in [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int n) {
    detail::require(lo > 0.0 && hi > lo && n >= 2, "need 0 < lo < hi and n >= 2", "epsilon");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return out;
}

// ---- fed structure versus the modal bound ----------------------------------

struct FedCapacityOptions {
    std::vector<double> snr_db{20.0};
    double epsilon = 0.02;
    double sigma_sq = 1.0;
    int trials = 500;
    int receive_antennas = 0;  // 0: Q
    std::uint64_t seed = 1;
    unsigned threads = worker_count();
};

struct FedCapacityRow {
    double snr_db = 0.0;
    double fed_mean_bits = 0.0;
    double fed_std = 0.0;
    double bound_mean_bits = 0.0;  // dual WF on the Q x Q system of the Q leading modes
    double bound_std = 0.0;
    double bound_all_mean_bits = 0.0;  // dual WF over every usable mode with the same receiver
    double bound_all_std = 0.0;
    double ideal_mean_bits = 0.0;  // ideal M x Q MIMO with budget P_rad
    double ideal_std = 0.0;
    double max_excess_all_bits = 0.0;  // max over trials of fed - bound_all (never positive)
    int trials = 0;
};

// Port currents per unit feed current: rows of the feeds are identity, rows
// of the parasitic ports are the solved I_P.
inline MatrixXc feed_current_map(const PortDataset& ds, const FeedLoadConfig& cfg) {
    const auto sp = synthesized_patterns(ds, cfg);
    const auto others = complement_ports(ds.ports(), cfg.feeds);
    const Eigen::Index q = static_cast<Eigen::Index>(cfg.feeds.size());
    MatrixXc t = MatrixXc::Zero(ds.ports(), q);
    for (Eigen::Index j = 0; j < q; ++j) t(cfg.feeds[static_cast<std::size_t>(j)], j) = 1.0;
    for (std::size_t i = 0; i < others.size(); ++i) t.row(others[i]) = sp.I_P.row(static_cast<Eigen::Index>(i));
    return t;
}

// Monte Carlo capacity of the Q-feed loaded structure next to the no-feed
// dual-constraint bounds, on identical channel draws H_iid (M x usable rank).
// Fed covariances R_A act through the current map T: radiated power
// Tr(R_A T^H K_T T) and current norm Tr(R_A T^H T) over all ports.
// `bound` restricts to the Q leading modes (the P = Q point of the bound
// curve); it dominates the fed mean by unitary invariance of H_iid and
// eigenvalue interlacing. `bound_all` uses every mode and dominates each draw.
inline std::vector<FedCapacityRow> fed_capacity(const PortDataset& ds, const ModalBasis& basis, const FeedLoadConfig& cfg,
                                                const FedCapacityOptions& o) {
    detail::require(o.trials >= 1, "trials must be at least 1", "trials");
    detail::require(o.epsilon > 0.0, "epsilon must be positive", "epsilon");
    const MatrixXc t = feed_current_map(ds, cfg);
    const int q = static_cast<int>(cfg.feeds.size());
    const int m = o.receive_antennas > 0 ? o.receive_antennas : q;
    const int r = basis.usable_rank;
    const VectorXr lam = basis.lambda.head(r);
    const MatrixXc c = lam.cwiseSqrt().cast<cdouble>().asDiagonal() * basis.Q.leftCols(r).adjoint() * t;  // r x Q
    const MatrixXc a_rad = hermitian_part(c.adjoint() * c);
    const MatrixXc a_cur = hermitian_part(t.adjoint() * t);

    std::vector<FedCapacityRow> out;
    for (std::size_t si = 0; si < o.snr_db.size(); ++si) {
        const ConstraintSpec spec = ConstraintSpec::from_snr(ConstraintMode::dual, o.snr_db[si], o.epsilon, o.sigma_sq);
        ConstraintSpec ideal_spec = spec;
        ideal_spec.mode = ConstraintMode::radiated;
        const std::size_t n = static_cast<std::size_t>(o.trials);
        std::vector<double> fed(n), bound(n), bound_all(n), ideal(n);
        parallel_for(
            n,
            [&](std::size_t k) {
                auto rng = trial_rng(o.seed, 0xFEDULL, static_cast<int>(k));
                const MatrixXc h = complex_gaussian(m, r, rng);
                const int lead = std::min(q, r);
                bound[k] = dual_wf(h.leftCols(lead), lam.head(lead), spec).capacity_bits;
                bound_all[k] = dual_wf(h, lam, spec).capacity_bits;
                fed[k] = solve_dual_constraint(h * c, a_rad, a_cur, spec.p_rad, spec.i_in_sq, spec.sigma_sq).capacity_bits;
                ideal[k] = capacity_radiated(h.leftCols(lead), ideal_spec, Policy::wf).capacity_bits;
            },
            o.threads);
        FedCapacityRow row;
        row.snr_db = o.snr_db[si];
        const auto f = sample_stats(fed), b = sample_stats(bound), ba = sample_stats(bound_all), i = sample_stats(ideal);
        row.fed_mean_bits = f.mean;
        row.fed_std = f.std;
        row.bound_mean_bits = b.mean;
        row.bound_std = b.std;
        row.bound_all_mean_bits = ba.mean;
        row.bound_all_std = ba.std;
        row.ideal_mean_bits = i.mean;
        row.ideal_std = i.std;
        row.max_excess_all_bits = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) row.max_excess_all_bits = std::max(row.max_excess_all_bits, fed[k] - bound_all[k]);
        row.trials = o.trials;
        out.push_back(row);
    }
    return out;
}

// ---- CSV tables --------------------------------------------------------------

inline CsvTable bounds_csv(const std::vector<CurvePoint>& pts, const std::string& manifest = {}) {
    CsvTable t;
    t.schema = "bounds";
    t.manifest = manifest;
    t.header = {"P", "policy", "mode", "snr_db", "epsilon", "capacity_mean_bits", "capacity_std", "n_eff", "ideal_mean_bits", "ideal_std",
                "trials", "feasible"};
    for (const auto& p : pts)
        t.add_row() << p.P << to_string(p.policy) << to_string(p.mode) << p.snr_db << p.epsilon << p.capacity_mean_bits << p.capacity_std
                    << p.n_eff << p.ideal_mean_bits << p.ideal_std << p.trials << (p.feasible ? 1 : 0);
    return t;
}

inline CsvTable eadof_csv(const std::vector<EadofRow>& rows, const std::string& manifest = {}) {
    CsvTable t;
    t.schema = "eadof";
    t.manifest = manifest;
    t.header = {"epsilon", "n_eff"};
    for (const auto& r : rows) t.add_row() << r.epsilon << r.n_eff;
    return t;
}

inline CsvTable convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& manifest = {}) {
    CsvTable t;
    t.schema = "convergence";
    t.manifest = manifest;
    t.header = {"sub_elements_per_wavelength", "ports", "usable_rank", "capacity_mean_bits", "capacity_std", "trials"};
    for (const auto& r : rows) t.add_row() << r.density << r.ports << r.usable_rank << r.capacity_mean_bits << r.capacity_std << r.trials;
    return t;
}

inline CsvTable fed_capacity_csv(const std::vector<FedCapacityRow>& rows, const std::string& manifest = {}) {
    CsvTable t;
    t.schema = "fed_capacity";
    t.manifest = manifest;
    t.header = {"snr_db", "fed_mean_bits", "fed_std", "bound_mean_bits", "bound_std", "ideal_mean_bits", "ideal_std", "fed_over_bound",
                "bound_all_mean_bits", "bound_all_std", "trials"};
    for (const auto& r : rows)
        t.add_row() << r.snr_db << r.fed_mean_bits << r.fed_std << r.bound_mean_bits << r.bound_std << r.ideal_mean_bits << r.ideal_std
                    << r.fed_mean_bits / r.bound_mean_bits << r.bound_all_mean_bits << r.bound_all_std << r.trials;
    return t;
}

inline CsvTable modes_csv(const ModalBasis& basis, const std::string& manifest = {}) {
    CsvTable t;
    t.schema = "modes";
    t.manifest = manifest;
    t.header = {"index", "lambda_ohm", "usable"};
    for (int i = 0; i < basis.size(); ++i) t.add_row() << (i + 1) << basis.lambda(i) << (i < basis.usable_rank ? 1 : 0);
    return t;
}

} // namespace beamspace
