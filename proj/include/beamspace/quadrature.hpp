// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace beamspace {

// Angular samples with solid-angle quadrature weights. Patterns sampled on the
// grid carry one row per (sample, polarization): rows [0, n) hold the theta-hat
// component and, for dual polarization, rows [n, 2n) the phi-hat component.
struct AngleGrid {
    std::vector<double> theta;   // [0, pi]
    std::vector<double> phi;     // [0, 2 pi)
    std::vector<double> weight;  // steradians, > 0
    int polarizations = 1;       // 1 or 2

    std::size_t samples() const { return theta.size(); }
    Eigen::Index rows() const { return static_cast<Eigen::Index>(theta.size()) * polarizations; }

    double total_weight() const {
        double acc = 0.0;
        for (double w : weight) acc += w;
        return acc;
    }

    void validate() const {
        detail::require(polarizations == 1 || polarizations == 2, "polarizations must be 1 or 2", "grid.polarizations");
        detail::require(!theta.empty(), "grid has no samples", "grid.theta");
        detail::require(phi.size() == theta.size(), "length differs from theta", "grid.phi");
        detail::require(weight.size() == theta.size(), "length differs from theta", "grid.weight");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            detail::require(std::isfinite(theta[i]) && theta[i] >= 0.0 && theta[i] <= kPi, "theta outside [0, pi]", "grid.theta");
            detail::require(std::isfinite(phi[i]) && phi[i] >= 0.0 && phi[i] < 2.0 * kPi, "phi outside [0, 2pi)", "grid.phi");
            detail::require(std::isfinite(weight[i]) && weight[i] > 0.0, "weights must be positive", "grid.weight");
        }
    }
};

// Gauss-Legendre nodes and weights on [-1, 1], found by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    detail::require(n >= 1, "Gauss-Legendre order must be positive");
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

// Full-sphere grid: Gauss-Legendre in cos(theta) with n_theta nodes, uniform
// trapezoid in phi with 2 * n_theta nodes. Weights sum to 4 pi.
inline AngleGrid sphere_grid(int n_theta, int polarizations = 2) {
    detail::require(n_theta >= 1, "n_theta must be positive");
    const auto [x, w] = gauss_legendre(n_theta);
    const int n_phi = 2 * n_theta;
    AngleGrid g;
    g.polarizations = polarizations;
    g.theta.reserve(static_cast<std::size_t>(n_theta) * n_phi);
    for (int i = 0; i < n_theta; ++i) {
        const double th = std::acos(std::clamp(x[i], -1.0, 1.0));
        for (int j = 0; j < n_phi; ++j) {
            g.theta.push_back(th);
            g.phi.push_back(2.0 * kPi * j / n_phi);
            g.weight.push_back(w[i] * 2.0 * kPi / n_phi);
        }
    }
    g.validate();
    return g;
}

// Azimuth ring at theta = pi/2 for a 2D-uniform PAS. Weights sum to 2 pi.
inline AngleGrid ring_grid(int n_phi, int polarizations = 1) {
    detail::require(n_phi >= 1, "n_phi must be positive");
    AngleGrid g;
    g.polarizations = polarizations;
    for (int j = 0; j < n_phi; ++j) {
        g.theta.push_back(kPi / 2.0);
        g.phi.push_back(2.0 * kPi * j / n_phi);
        g.weight.push_back(2.0 * kPi / n_phi);
    }
    g.validate();
    return g;
}

} // namespace beamspace
