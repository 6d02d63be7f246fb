// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "quadrature.hpp"

namespace beamspace {

inline const std::string kTagSurfaceGap = "surface-gap";
inline const std::string kTagGroundFeed = "ground-feed";

// Open-circuit description of an N-port radiating structure at one frequency.
//
// Column n of E is the far-field pattern of port n driven by a unit current with
// every other port open, sampled on `grid`. Each row is pre-multiplied by the
// square root of its quadrature weight so that E^H E approximates the surface
// integral of the pattern inner products.
struct PortDataset {
    double frequency_hz = 0.0;
    double eta_ohm = kFreeSpaceImpedance;
    AngleGrid grid;
    MatrixXc E;                        // K x N
    MatrixXc Z;                        // N x N, open-circuit impedance
    std::vector<int> feasible_feeds;   // 0-based port indices
    std::vector<std::string> tags;     // per-port
    bool lossless_consistent = false;  // Re{diag Z} matches the radiated self-power

    int ports() const { return static_cast<int>(E.cols()); }
    Eigen::Index rows() const { return E.rows(); }

    // (1/eta) Re{diag E^H E} versus Re{diag Z}, relative to max Re{diag Z}.
    double lossless_residual() const {
        const int n = ports();
        double worst = 0.0, scale = 0.0;
        for (int i = 0; i < n; ++i) {
            const double radiated = E.col(i).squaredNorm() / eta_ohm;
            worst = std::max(worst, std::abs(radiated - Z(i, i).real()));
            scale = std::max(scale, std::abs(Z(i, i).real()));
        }
        return scale > 0.0 ? worst / scale : worst;
    }

    void validate(double reciprocity_tolerance = 1e-9, double lossless_tolerance = 1e-9) const {
        grid.validate();
        detail::require(std::isfinite(frequency_hz) && frequency_hz > 0.0, "must be positive", "frequency_hz");
        detail::require(std::isfinite(eta_ohm) && eta_ohm > 0.0, "must be positive", "eta_ohm");
        detail::require(E.cols() >= 1, "dataset has no ports", "E");
        detail::require(E.rows() == grid.rows(), "row count " + std::to_string(E.rows()) + " does not match grid rows " + std::to_string(grid.rows()), "E");
        detail::require(E.rows() >= E.cols(), "dimension error: K = " + std::to_string(E.rows()) + " < N = " + std::to_string(E.cols()), "E");
        detail::require(Z.rows() == E.cols() && Z.cols() == E.cols(), "must be N x N with N = " + std::to_string(E.cols()), "Z");
        detail::require(all_finite(E), "non-finite entry", "E");
        detail::require(all_finite(Z), "non-finite entry", "Z");
        const double zmax = max_abs(Z);
        detail::require(symmetry_residual(Z) <= reciprocity_tolerance * zmax,
                        "reciprocity violated: max|Z - Z^T| exceeds tolerance", "Z");
        const int n = ports();
        std::vector<int> seen;
        for (int f : feasible_feeds) {
            detail::require(f >= 0 && f < n, "index out of range", "feasible_feeds");
            seen.push_back(f);
        }
        std::sort(seen.begin(), seen.end());
        detail::require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), "duplicate index", "feasible_feeds");
        detail::require(tags.empty() || tags.size() == static_cast<std::size_t>(n), "must have one tag per port", "tags");
        if (lossless_consistent)
            detail::require(lossless_residual() <= lossless_tolerance, "radiated self-power disagrees with Re{diag Z}", "Z");
    }
};

// K_T = (1/eta) E^H E, the radiated-power quadratic form on port currents.
inline MatrixXc compute_correlation(const PortDataset& dataset) {
    if (!all_finite(dataset.E)) throw ValidationError("non-finite entry", "E");
    MatrixXc k = dataset.E.adjoint() * dataset.E / dataset.eta_ohm;
    return hermitian_part(k);
}

// Eigen-structure of K_T: descending radiation resistances `lambda`, the unitary
// current basis `Q` and the unit-radiated-power pattern basis `B` = E Q Lambda^-1/2.
struct ModalBasis {
    VectorXr lambda;
    MatrixXc Q;
    MatrixXc B;    // K x N; empty when built from K_T alone
    MatrixXc K_T;
    double eta_ohm = kFreeSpaceImpedance;
    // Modes [0, usable_rank) have lambda > eps_floor * lambda[0].
    int usable_rank = 0;

    int size() const { return static_cast<int>(lambda.size()); }
    bool degenerate() const { return usable_rank < size(); }

    // First p modes (largest radiation resistance).
    ModalBasis leading(int p) const {
        detail::require(p >= 0 && p <= size(), "requested more modes than available");
        ModalBasis out;
        out.lambda = lambda.head(p);
        out.Q = Q.leftCols(p);
        if (B.size() > 0) out.B = B.leftCols(p);
        out.K_T = K_T;
        out.eta_ohm = eta_ohm;
        out.usable_rank = std::min(usable_rank, p);
        return out;
    }
};

struct DecompositionOptions {
    double eps_floor = 1e-12;  // relative to lambda[0]
    double tie_gap = 1e-12;    // relative eigenvalue gap treated as a tie
};

namespace detail {

// Makes eigenvector columns deterministic: inside groups of (near) equal
// eigenvalues the basis is rebuilt from the projections of e_1, e_2, ... onto
// the group subspace; isolated columns get their largest entry real-positive.
// `companion` columns (B) receive the same unitary mixing.
inline void canonicalize_columns(const VectorXr& lambda, MatrixXc& q, MatrixXc* companion, double tie_gap) {
    const Eigen::Index n = lambda.size();
    if (n == 0) return;
    const double scale = std::max(std::abs(lambda(0)), std::numeric_limits<double>::min());
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index end = start + 1;
        while (end < n && std::abs(lambda(end - 1) - lambda(end)) < tie_gap * scale) ++end;
        const Eigen::Index m = end - start;
        if (m == 1) {
            Eigen::Index arg = 0;
            q.col(start).cwiseAbs().maxCoeff(&arg);
            const cdouble v = q(arg, start);
            if (std::abs(v) > 0.0) {
                const cdouble phase = std::conj(v) / std::abs(v);
                q.col(start) *= phase;
                if (companion) companion->col(start) *= phase;
            }
        } else {
            const MatrixXc block = q.middleCols(start, m);
            MatrixXc chosen(q.rows(), m);
            Eigen::Index count = 0;
            for (Eigen::Index k = 0; k < q.rows() && count < m; ++k) {
                VectorXc v = block * block.row(k).adjoint();  // projection of e_k
                for (Eigen::Index c = 0; c < count; ++c) v -= chosen.col(c) * chosen.col(c).dot(v);
                for (Eigen::Index c = 0; c < count; ++c) v -= chosen.col(c) * chosen.col(c).dot(v);
                const double nv = v.norm();
                if (nv > 1e-6) chosen.col(count++) = v / nv;
            }
            if (count == m) {
                const MatrixXc rotation = block.adjoint() * chosen;  // m x m unitary
                q.middleCols(start, m) = chosen;
                if (companion) companion->middleCols(start, m) = companion->middleCols(start, m) * rotation;
            }
        }
        start = end;
    }
}

inline int usable_rank(const VectorXr& lambda, double eps_floor) {
    if (lambda.size() == 0 || !(lambda(0) > 0.0)) return 0;
    int r = 0;
    while (r < lambda.size() && lambda(r) > eps_floor * lambda(0)) ++r;
    return r;
}

} // namespace detail

// Eigendecomposition of a Hermitian K_T alone (no pattern basis).
inline ModalBasis modal_decomposition(const MatrixXc& k_t, const DecompositionOptions& options = {}) {
    detail::require(k_t.rows() == k_t.cols(), "K_T must be square");
    detail::require(all_finite(k_t), "non-finite entry in K_T");
    detail::require(hermitian_residual(k_t) <= 1e-10 * std::max(1.0, max_abs(k_t)), "K_T must be Hermitian");
    const Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(k_t));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of K_T failed");
    ModalBasis out;
    out.lambda = es.eigenvalues().reverse();
    out.Q = es.eigenvectors().rowwise().reverse();
    out.K_T = k_t;
    detail::canonicalize_columns(out.lambda, out.Q, nullptr, options.tie_gap);
    out.usable_rank = detail::usable_rank(out.lambda, options.eps_floor);
    return out;
}

// Modal basis of a dataset. Computed from the thin SVD of E / sqrt(eta) so
// that B stays orthonormal to working precision even for modes with tiny
// radiation resistance; lambda are the squared singular values.
inline ModalBasis modal_decomposition(const PortDataset& dataset, const DecompositionOptions& options = {}) {
    detail::require(dataset.rows() >= dataset.ports(), "K < N: correlation matrix is rank-deficient by construction", "E");
    if (!all_finite(dataset.E)) throw ValidationError("non-finite entry", "E");
    const double sqrt_eta = std::sqrt(dataset.eta_ohm);
    const MatrixXc scaled = dataset.E / sqrt_eta;
    Eigen::BDCSVD<MatrixXc> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD of the steering matrix failed");
    ModalBasis out;
    out.eta_ohm = dataset.eta_ohm;
    out.lambda = svd.singularValues().cwiseAbs2();
    out.Q = svd.matrixV();
    out.B = svd.matrixU() * sqrt_eta;
    out.K_T = compute_correlation(dataset);
    detail::canonicalize_columns(out.lambda, out.Q, &out.B, options.tie_gap);
    out.usable_rank = detail::usable_rank(out.lambda, options.eps_floor);
    return out;
}

enum class Orientation { x, y, z, xy, xyz };

inline std::vector<std::array<double, 3>> orientation_axes(Orientation o) {
    switch (o) {
    case Orientation::x: return {{1, 0, 0}};
    case Orientation::y: return {{0, 1, 0}};
    case Orientation::z: return {{0, 0, 1}};
    case Orientation::xy: return {{1, 0, 0}, {0, 1, 0}};
    case Orientation::xyz: return {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
    }
    return {};
}

inline Orientation parse_orientation(const std::string& s) {
    if (s == "x") return Orientation::x;
    if (s == "y") return Orientation::y;
    if (s == "z") return Orientation::z;
    if (s == "xy") return Orientation::xy;
    if (s == "xyz") return Orientation::xyz;
    throw ValidationError("unknown orientation '" + s + "' (expected x, y, z, xy or xyz)", "orientation");
}

struct DipoleGridSpec {
    int rows = 2;
    int cols = 2;
    double spacing_m = 0.0;
    double frequency_hz = 2.4e9;
    Orientation orientation = Orientation::x;
    // Length of each Hertzian element; 0 selects the spacing (one element per sub-cell).
    double dipole_length_m = 0.0;
    double self_reactance_ohm = 0.0;
    double eta_ohm = kFreeSpaceImpedance;
    AngleGrid grid = sphere_grid(16, 2);
    // 0-based feasible feed ports; empty selects the ground-feed ports (all ports if there are none).
    std::vector<int> feasible_feeds;
};

// theta-hat and phi-hat far-field components of one element at one angle.
struct DipoleSample {
    cdouble theta_component;
    cdouble phi_component;
};

// Hertzian element at `position` with moment along `axis`, unit current.
inline DipoleSample hertzian_pattern(const std::array<double, 3>& axis, const std::array<double, 3>& position,
                                     double k, double length, double eta, double theta, double phi) {
    const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cp = std::cos(phi);
    const std::array<double, 3> r_hat{st * cp, st * sp, ct};
    const std::array<double, 3> theta_hat{ct * cp, ct * sp, -st};
    const std::array<double, 3> phi_hat{-sp, cp, 0.0};
    auto dot = [](const std::array<double, 3>& a, const std::array<double, 3>& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
    // |e|^2 integrates to eta * R_rad with R_rad = eta (k l)^2 / (6 pi).
    const cdouble amplitude = cdouble(0.0, eta * k * length / (4.0 * kPi)) * std::polar(1.0, k * dot(r_hat, position));
    return {amplitude * dot(axis, theta_hat), amplitude * dot(axis, phi_hat)};
}

// Synthetic lossless dataset made of Hertzian elements on a planar rows x cols
// grid (xy-plane, centred on the origin). Ports are ordered by orientation
// block: all z ("ground-feed") elements first, then x, then y ("surface-gap").
// Re{Z} is the pattern-overlap resistance (1/eta) Re{E^H E}; Im{Z} is a
// stand-in reactance X_mn = R_mn cot(k d_mn) clamped to 5 sqrt(R_mm R_nn),
// zero for co-located pairs, and `self_reactance_ohm` on the diagonal.
inline PortDataset synthesize_dipole_grid(const DipoleGridSpec& spec) {
    detail::require(spec.rows >= 1 && spec.cols >= 1, "rows and cols must be at least 1", "rows");
    detail::require(std::isfinite(spec.spacing_m) && spec.spacing_m > 0.0, "spacing must be positive", "spacing");
    detail::require(std::isfinite(spec.frequency_hz) && spec.frequency_hz > 0.0, "frequency must be positive", "frequency_hz");
    detail::require(spec.dipole_length_m >= 0.0, "dipole length must be non-negative", "dipole_length");
    spec.grid.validate();

    const auto axes = orientation_axes(spec.orientation);
    const int sites = spec.rows * spec.cols;
    const int n = sites * static_cast<int>(axes.size());
    detail::require(spec.grid.rows() >= n,
                    "dimension error: grid has K = " + std::to_string(spec.grid.rows()) + " rows but N = " + std::to_string(n) + " ports",
                    "grid");

    const double k = 2.0 * kPi * spec.frequency_hz / kSpeedOfLight;
    const double length = spec.dipole_length_m > 0.0 ? spec.dipole_length_m : spec.spacing_m;

    std::vector<std::array<double, 3>> position(n), axis(n);
    PortDataset ds;
    ds.frequency_hz = spec.frequency_hz;
    ds.eta_ohm = spec.eta_ohm;
    ds.grid = spec.grid;
    ds.tags.resize(n);
    int port = 0;
    for (const auto& a : axes) {
        for (int r = 0; r < spec.rows; ++r) {
            for (int c = 0; c < spec.cols; ++c) {
                position[port] = {(c - 0.5 * (spec.cols - 1)) * spec.spacing_m, (r - 0.5 * (spec.rows - 1)) * spec.spacing_m, 0.0};
                axis[port] = a;
                ds.tags[port] = a[2] != 0.0 ? kTagGroundFeed : kTagSurfaceGap;
                ++port;
            }
        }
    }

    const auto samples = static_cast<Eigen::Index>(spec.grid.samples());
    ds.E.resize(spec.grid.rows(), n);
    for (int p = 0; p < n; ++p) {
        for (Eigen::Index s = 0; s < samples; ++s) {
            const auto f = hertzian_pattern(axis[p], position[p], k, length, spec.eta_ohm, spec.grid.theta[s], spec.grid.phi[s]);
            const double sw = std::sqrt(spec.grid.weight[s]);
            ds.E(s, p) = f.theta_component * sw;
            if (spec.grid.polarizations == 2) ds.E(samples + s, p) = f.phi_component * sw;
        }
    }

    const MatrixXc k_t = compute_correlation(ds);
    MatrixXr resistance = k_t.real();
    resistance = 0.5 * (resistance + resistance.transpose()).eval();
    MatrixXr reactance = MatrixXr::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        reactance(i, i) = spec.self_reactance_ohm;
        for (int j = i + 1; j < n; ++j) {
            const double dx = position[i][0] - position[j][0], dy = position[i][1] - position[j][1], dz = position[i][2] - position[j][2];
            const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
            double x = 0.0;
            if (d > 0.0) {
                const double limit = 5.0 * std::sqrt(std::abs(resistance(i, i) * resistance(j, j)));
                const double kd = k * d;
                x = std::clamp(resistance(i, j) * std::cos(kd) / std::sin(kd), -limit, limit);
                if (!std::isfinite(x)) x = std::copysign(limit, resistance(i, j));
            }
            reactance(i, j) = reactance(j, i) = x;
        }
    }
    ds.Z = resistance.cast<cdouble>() + cdouble(0.0, 1.0) * reactance.cast<cdouble>();

    if (!spec.feasible_feeds.empty()) {
        ds.feasible_feeds = spec.feasible_feeds;
    } else {
        for (int p = 0; p < n; ++p)
            if (ds.tags[p] == kTagGroundFeed) ds.feasible_feeds.push_back(p);
    }
    if (ds.feasible_feeds.empty()) {
        ds.feasible_feeds.clear();
        for (int p = 0; p < n; ++p) ds.feasible_feeds.push_back(p);
    }
    ds.lossless_consistent = true;
    ds.validate();
    return ds;
}

} // namespace beamspace
