// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "port_model.hpp"

namespace beamspace {

inline constexpr double kDefaultMaxReactance = 2000.0;  // ohms
inline constexpr double kMaxConditionNumber = 1e12;

// Q fed ports plus one load per remaining port. `loads[i]` belongs to the i-th
// non-feed port in ascending port order; std::nullopt marks an open port.
struct FeedLoadConfig {
    std::vector<int> feeds;                    // 0-based, in feed order
    std::vector<std::optional<double>> loads;  // ohms (reactance), length N - Q
    double objective = 0.0;
    std::string provenance;
};

inline std::vector<int> complement_ports(int n, const std::vector<int>& feeds) {
    std::vector<char> is_feed(static_cast<std::size_t>(n), 0);
    for (int f : feeds) is_feed[static_cast<std::size_t>(f)] = 1;
    std::vector<int> out;
    for (int p = 0; p < n; ++p)
        if (!is_feed[static_cast<std::size_t>(p)]) out.push_back(p);
    return out;
}

inline void validate_feeds(int n, const std::vector<int>& feeds, const std::vector<int>* feasible = nullptr) {
    std::vector<int> sorted = feeds;
    std::sort(sorted.begin(), sorted.end());
    detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "duplicate feed index", "feeds");
    for (int f : feeds) {
        detail::require(f >= 0 && f < n, "feed index " + std::to_string(f + 1) + " out of range 1.." + std::to_string(n), "feeds");
        if (feasible)
            detail::require(std::find(feasible->begin(), feasible->end(), f) != feasible->end(),
                            "feed index " + std::to_string(f + 1) + " is not a feasible feed", "feeds");
    }
}

inline void validate_config(const PortDataset& ds, const FeedLoadConfig& cfg, double max_reactance = std::numeric_limits<double>::infinity()) {
    validate_feeds(ds.ports(), cfg.feeds, &ds.feasible_feeds);
    detail::require(cfg.loads.size() == static_cast<std::size_t>(ds.ports()) - cfg.feeds.size(),
                    "expected " + std::to_string(ds.ports() - static_cast<int>(cfg.feeds.size())) + " loads", "loads");
    for (const auto& l : cfg.loads)
        if (l) detail::require(std::isfinite(*l) && std::abs(*l) <= max_reactance, "load reactance must be finite and within bounds", "loads");
}

// Blocks of Z for the feed / parasitic partition; parasitic ports ascending.
struct ImpedanceBlocks {
    std::vector<int> feeds;
    std::vector<int> parasitic;
    MatrixXc Z_A;   // Q x Q
    MatrixXc Z_AP;  // Q x (N - Q)
    MatrixXc Z_PA;  // (N - Q) x Q
    MatrixXc Z_P;   // (N - Q) x (N - Q)
};

inline ImpedanceBlocks partition_impedance(const MatrixXc& z, const std::vector<int>& feeds) {
    detail::require(z.rows() == z.cols(), "Z must be square", "Z");
    const int n = static_cast<int>(z.rows());
    validate_feeds(n, feeds);
    ImpedanceBlocks b;
    b.feeds = feeds;
    b.parasitic = complement_ports(n, feeds);
    b.Z_A = submatrix(z, b.feeds, b.feeds);
    b.Z_AP = submatrix(z, b.feeds, b.parasitic);
    b.Z_PA = submatrix(z, b.parasitic, b.feeds);
    b.Z_P = submatrix(z, b.parasitic, b.parasitic);
    return b;
}

namespace detail {

// LU of (Z_L + j X) with a conditioning check.
inline Eigen::PartialPivLU<MatrixXc> factor_loaded(const MatrixXc& z_loaded, const VectorXr& reactance) {
    MatrixXc a = z_loaded;
    for (Eigen::Index i = 0; i < reactance.size(); ++i) a(i, i) += cdouble(0.0, reactance(i));
    Eigen::PartialPivLU<MatrixXc> lu(a);
    if (a.rows() > 0) {
        const double rc = lu.rcond();
        if (!(rc > 1.0 / kMaxConditionNumber))
            throw NumericalError("loaded impedance matrix (Z_P + jX^L) is singular or ill-conditioned (condition estimate " +
                                 (rc > 0.0 ? std::to_string(1.0 / rc) : std::string("inf")) + ")");
    }
    return lu;
}

// Indices into `parasitic` of ports with a finite load, and those reactances.
inline void split_loads(const std::vector<std::optional<double>>& loads, std::vector<int>& loaded_local, VectorXr& reactance) {
    loaded_local.clear();
    std::vector<double> x;
    for (std::size_t i = 0; i < loads.size(); ++i)
        if (loads[i]) {
            loaded_local.push_back(static_cast<int>(i));
            x.push_back(*loads[i]);
        }
    reactance = Eigen::Map<const VectorXr>(x.data(), static_cast<Eigen::Index>(x.size()));
}

} // namespace detail

// i_P = -(Z_P + jX^L)^-1 Z_PA i_A. Open ports carry no current and are removed
// from the solve. `loads` has one entry per parasitic port.
inline VectorXc parasitic_currents(const ImpedanceBlocks& blocks, const std::vector<std::optional<double>>& loads, const VectorXc& i_a) {
    detail::require(loads.size() == blocks.parasitic.size(), "one load per parasitic port required", "loads");
    detail::require(i_a.size() == static_cast<Eigen::Index>(blocks.feeds.size()), "one current per feed required", "i_A");
    std::vector<int> loaded;
    VectorXr x;
    detail::split_loads(loads, loaded, x);
    VectorXc i_p = VectorXc::Zero(static_cast<Eigen::Index>(blocks.parasitic.size()));
    if (loaded.empty()) return i_p;
    const MatrixXc z_l = submatrix(blocks.Z_P, loaded, loaded);
    MatrixXc z_la(static_cast<Eigen::Index>(loaded.size()), blocks.Z_PA.cols());
    for (std::size_t r = 0; r < loaded.size(); ++r) z_la.row(static_cast<Eigen::Index>(r)) = blocks.Z_PA.row(loaded[r]);
    const auto lu = detail::factor_loaded(z_l, x);
    const VectorXc sol = -lu.solve(z_la * i_a);
    for (std::size_t r = 0; r < loaded.size(); ++r) i_p(loaded[r]) = sol(static_cast<Eigen::Index>(r));
    return i_p;
}

// Normalized pattern inner products rho_jk = <e_j, e_k> / (|e_j| |e_k|).
inline MatrixXc pattern_correlation(const MatrixXc& gram) {
    const Eigen::Index q = gram.rows();
    MatrixXc rho(q, q);
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index k = 0; k < q; ++k) rho(j, k) = gram(j, k) / std::sqrt(gram(j, j).real() * gram(k, k).real());
    for (Eigen::Index j = 0; j < q; ++j) rho(j, j) = 1.0;
    return rho;
}

// Sum over ordered pairs j != k of |rho_jk|.
inline double correlation_objective(const MatrixXc& rho) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < rho.rows(); ++j)
        for (Eigen::Index k = 0; k < rho.cols(); ++k)
            if (j != k) acc += std::abs(rho(j, k));
    return acc;
}

struct SynthesizedPatterns {
    MatrixXc E_T_fed;  // K x Q
    MatrixXc rho;      // Q x Q
    double objective = 0.0;
    MatrixXc I_P;      // (N - Q) x Q parasitic currents per unit feed current
};

// Patterns of the fed ports with the parasitic ports loaded:
// E_T = E_A - E_P (Z_P + jX^L)^-1 Z_PA.
inline SynthesizedPatterns synthesized_patterns(const PortDataset& ds, const FeedLoadConfig& cfg) {
    validate_config(ds, cfg);
    const auto blocks = partition_impedance(ds.Z, cfg.feeds);
    const Eigen::Index q = static_cast<Eigen::Index>(cfg.feeds.size());
    SynthesizedPatterns out;
    out.I_P = MatrixXc::Zero(static_cast<Eigen::Index>(blocks.parasitic.size()), q);
    std::vector<int> loaded;
    VectorXr x;
    detail::split_loads(cfg.loads, loaded, x);
    if (!loaded.empty()) {
        const MatrixXc z_l = submatrix(blocks.Z_P, loaded, loaded);
        MatrixXc z_la(static_cast<Eigen::Index>(loaded.size()), q);
        for (std::size_t r = 0; r < loaded.size(); ++r) z_la.row(static_cast<Eigen::Index>(r)) = blocks.Z_PA.row(loaded[r]);
        const auto lu = detail::factor_loaded(z_l, x);
        const MatrixXc sol = -lu.solve(z_la);
        for (std::size_t r = 0; r < loaded.size(); ++r) out.I_P.row(loaded[r]) = sol.row(static_cast<Eigen::Index>(r));
    }
    out.E_T_fed = columns(ds.E, cfg.feeds) + columns(ds.E, blocks.parasitic) * out.I_P;
    out.rho = pattern_correlation(out.E_T_fed.adjoint() * out.E_T_fed);
    out.objective = correlation_objective(out.rho);
    return out;
}

// Precomputed pieces for repeated objective evaluation on one dataset: the
// pattern Gram matrix E^H E replaces the K-row pattern products, so each
// evaluation costs one factorization of the loaded block plus small products.
class LoadedNetwork {
public:
    explicit LoadedNetwork(const PortDataset& ds) : ds_(&ds), gram_(ds.E.adjoint() * ds.E) {}

    const PortDataset& dataset() const { return *ds_; }
    const MatrixXc& gram() const { return gram_; }
    int ports() const { return ds_->ports(); }

    struct Evaluation {
        double objective = 0.0;         // sum_{j != k} |rho_jk|
        double smooth_objective = 0.0;  // sum_{j != k} sqrt(|rho_jk|^2 + delta^2)
        VectorXr gradient;              // of the smooth objective, when requested
        MatrixXc rho;
    };

    // `loaded` are ports terminated by reactances `x`; every other non-feed port is open.
    Evaluation evaluate(const std::vector<int>& feeds, const std::vector<int>& loaded, const VectorXr& x, bool with_gradient,
                        double delta = 1e-8) const {
        const Eigen::Index q = static_cast<Eigen::Index>(feeds.size());
        const Eigen::Index nl = static_cast<Eigen::Index>(loaded.size());
        MatrixXc g = submatrix(gram_, feeds, feeds);
        MatrixXc i_l(nl, q);
        MatrixXc t_inv;  // T A^-1, Q x n_L
        if (nl > 0) {
            const MatrixXc z_l = submatrix(ds_->Z, loaded, loaded);
            const MatrixXc z_la = submatrix(ds_->Z, loaded, feeds);
            const auto lu = detail::factor_loaded(z_l, x);
            i_l = -lu.solve(z_la);
            const MatrixXc g_al = submatrix(gram_, feeds, loaded);
            const MatrixXc g_ll = submatrix(gram_, loaded, loaded);
            const MatrixXc t = g_al + i_l.adjoint() * g_ll;  // Q x n_L
            const MatrixXc cross = g_al * i_l;
            g += cross + cross.adjoint() + i_l.adjoint() * g_ll * i_l;
            if (with_gradient) {
                // (T A^-1) = (A^-T T^T)^T; A is complex symmetric so A^-T = A^-1.
                t_inv = lu.solve(t.transpose()).transpose();
            }
        }
        g = hermitian_part(g);

        Evaluation ev;
        ev.rho = pattern_correlation(g);
        MatrixXr phi = MatrixXr::Zero(q, q);
        for (Eigen::Index j = 0; j < q; ++j)
            for (Eigen::Index k = 0; k < q; ++k)
                if (j != k) {
                    const double a = std::abs(ev.rho(j, k));
                    ev.objective += a;
                    phi(j, k) = std::sqrt(a * a + delta * delta);
                    ev.smooth_objective += phi(j, k);
                }
        if (!with_gradient) return ev;

        ev.gradient = VectorXr::Zero(nl);
        if (nl == 0 || q < 2) return ev;
        // df = Re sum_{j!=k} C_jk dG_jk - sum_j a_j dG_jj / G_jj
        MatrixXc c = MatrixXc::Zero(q, q);
        VectorXr a = VectorXr::Zero(q);
        for (Eigen::Index j = 0; j < q; ++j)
            for (Eigen::Index k = 0; k < q; ++k)
                if (j != k) {
                    const double s = std::sqrt(g(j, j).real() * g(k, k).real());
                    c(j, k) = std::conj(ev.rho(j, k)) / (phi(j, k) * s);
                    a(j) += std::norm(ev.rho(j, k)) / phi(j, k);
                }
        for (Eigen::Index m = 0; m < nl; ++m) {
            // dG = D + D^H with D = -j t r^T, t = (T A^-1) e_m, r = row m of I_L.
            const VectorXc tm = t_inv.col(m);
            const VectorXc rm = i_l.row(m).transpose();
            double df = 0.0;
            for (Eigen::Index j = 0; j < q; ++j) {
                for (Eigen::Index k = 0; k < q; ++k) {
                    const cdouble d_jk = cdouble(0.0, -1.0) * tm(j) * rm(k);
                    const cdouble d_kj = cdouble(0.0, -1.0) * tm(k) * rm(j);
                    const cdouble dg = d_jk + std::conj(d_kj);
                    if (j != k) df += (c(j, k) * dg).real();
                    else df -= a(j) * dg.real() / g(j, j).real();
                }
            }
            ev.gradient(m) = df;
        }
        return ev;
    }

private:
    const PortDataset* ds_;
    MatrixXc gram_;
};

} // namespace beamspace
