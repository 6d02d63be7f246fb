// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace beamspace {

enum class Policy { ep, wf };
enum class ConstraintMode { radiated, current, dual };

inline std::string to_string(Policy p) { return p == Policy::ep ? "ep" : "wf"; }
inline std::string to_string(ConstraintMode m) {
    switch (m) {
    case ConstraintMode::radiated: return "radiated";
    case ConstraintMode::current: return "current";
    case ConstraintMode::dual: return "dual";
    }
    return "?";
}
inline Policy parse_policy(const std::string& s) {
    if (s == "ep") return Policy::ep;
    if (s == "wf") return Policy::wf;
    throw ValidationError("unknown policy '" + s + "' (expected ep or wf)", "policy");
}
inline ConstraintMode parse_mode(const std::string& s) {
    if (s == "radiated") return ConstraintMode::radiated;
    if (s == "current") return ConstraintMode::current;
    if (s == "dual") return ConstraintMode::dual;
    throw ValidationError("unknown mode '" + s + "' (expected radiated, current or dual)", "mode");
}

// Budgets for Tr(R_i K_T) <= p_rad and Tr(R_i) <= i_in_sq with noise power sigma_sq.
struct ConstraintSpec {
    double p_rad = 1.0;    // W
    double i_in_sq = 1.0;  // A^2
    double sigma_sq = 1.0; // W
    ConstraintMode mode = ConstraintMode::radiated;

    double epsilon() const { return i_in_sq / p_rad; }

    void validate() const {
        detail::require(p_rad > 0.0 && !std::isnan(p_rad), "must be positive", "p_rad");
        detail::require(i_in_sq > 0.0 && !std::isnan(i_in_sq), "must be positive", "i_in_sq");
        detail::require(sigma_sq > 0.0 && std::isfinite(sigma_sq), "must be positive", "sigma_sq");
    }

    // SNR convention: I_in^2 / sigma^2 for the current mode, P_rad / sigma^2 otherwise.
    static ConstraintSpec from_snr(ConstraintMode mode, double snr_db, double epsilon, double sigma_sq = 1.0) {
        const double snr = std::pow(10.0, snr_db / 10.0);
        ConstraintSpec s;
        s.mode = mode;
        s.sigma_sq = sigma_sq;
        if (mode == ConstraintMode::current) {
            s.i_in_sq = snr * sigma_sq;
            s.p_rad = s.i_in_sq / epsilon;
        } else {
            s.p_rad = snr * sigma_sq;
            s.i_in_sq = epsilon * s.p_rad;
        }
        return s;
    }
};

struct AllocationResult {
    VectorXr diag_power;   // diagonal of the optimal covariance in the solved basis
    MatrixXc covariance;   // full covariance (R_beta, or R_gamma for the current mode)
    double capacity_bits = 0.0;
    double mu_rad = 0.0;
    double mu_in = 0.0;
    int n_used = 0;        // strictly positive eigen-allocations
    int n_eff = 0;         // EADoF used by the equal-power dual rule
    double radiated_power = 0.0;
    double current_norm = 0.0;
    double slack_radiated = 0.0;
    double slack_current = 0.0;
    double kkt_residual = 0.0;
    bool feasible = true;
};

// Largest N_eff with mean(1 / lambda[0..N_eff)) <= epsilon; 0 if even one mode fails.
inline int eadof(const VectorXr& lambda, double epsilon) {
    detail::require(epsilon > 0.0, "epsilon must be positive", "epsilon");
    double sum = 0.0;
    int best = 0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (!(lambda(i) > 0.0)) break;
        if (i > 0) detail::require(lambda(i) <= lambda(i - 1), "lambda must be descending", "lambda");
        sum += 1.0 / lambda(i);
        if (sum / static_cast<double>(i + 1) <= epsilon) best = static_cast<int>(i + 1);
        else break;
    }
    return best;
}

// Smallest epsilon for which the first n modes are usable: mean(1 / lambda[0..n)).
inline double minimum_epsilon(const VectorXr& lambda, int n) {
    detail::require(n >= 1 && n <= lambda.size(), "n out of range");
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += 1.0 / lambda(i);
    return sum / n;
}

struct WaterFill {
    VectorXr power;
    double level = 0.0;  // water level; 0 if nothing is allocated
};

// Classic water-filling over parallel gains: p_i = max(0, level - sigma2 / g_i), sum p = budget.
inline WaterFill water_fill(const VectorXr& gains, double budget, double sigma_sq) {
    const Eigen::Index n = gains.size();
    WaterFill out;
    out.power = VectorXr::Zero(n);
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < n; ++i)
        if (gains(i) > 0.0) order.push_back(i);
    if (order.empty() || !(budget > 0.0)) return out;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return gains(a) > gains(b); });
    double inv_sum = 0.0;
    std::size_t active = 0;
    double level = 0.0;
    for (std::size_t m = 1; m <= order.size(); ++m) {
        inv_sum += sigma_sq / gains(order[m - 1]);
        const double candidate = (budget + inv_sum) / static_cast<double>(m);
        if (candidate > sigma_sq / gains(order[m - 1])) {
            active = m;
            level = candidate;
        } else {
            break;
        }
    }
    for (std::size_t m = 0; m < active; ++m) out.power(order[m]) = std::max(0.0, level - sigma_sq / gains(order[m]));
    out.level = level;
    return out;
}

namespace detail {

struct WeightedSolution {
    MatrixXc covariance;
    double capacity = 0.0;
    double level = 0.0;
    int n_used = 0;
};

// max log2|I + H R H^H / sigma2|  s.t.  Tr(R W) <= budget, W Hermitian positive definite.
// Whitening by W^-1/2 turns this into ordinary water-filling.
inline WeightedSolution weighted_water_filling(const MatrixXc& h, const MatrixXc& w_inv_sqrt, double budget, double sigma_sq) {
    const Eigen::Index n = h.cols();
    WeightedSolution out;
    out.covariance = MatrixXc::Zero(n, n);
    if (n == 0) return out;
    const MatrixXc g = h * w_inv_sqrt;
    const Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(g.adjoint() * g));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed during water-filling");
    const VectorXr gains = es.eigenvalues().cwiseMax(0.0);
    const auto wf = water_fill(gains, budget, sigma_sq);
    const MatrixXc v = w_inv_sqrt * es.eigenvectors();
    out.covariance = v * wf.power.cast<cdouble>().asDiagonal() * v.adjoint();
    out.level = wf.level;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (wf.power(i) > 0.0) {
            out.capacity += std::log2(1.0 + gains(i) * wf.power(i) / sigma_sq);
            ++out.n_used;
        }
    }
    return out;
}

inline double trace_product(const MatrixXc& r, const MatrixXc& a) { return (r * a).trace().real(); }

inline int count_positive_eigen(const MatrixXc& r) {
    if (r.rows() == 0) return 0;
    const Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(r), Eigen::EigenvaluesOnly);
    const double tol = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    return static_cast<int>((es.eigenvalues().array() > tol).count());
}

} // namespace detail

struct DualSolverOptions {
    int max_bisections = 200;
    double tolerance = 1e-13;  // relative constraint residual targeted by the search
    double kkt_limit = 1e-8;   // residual above which the search is reported as failed
};

class DualSolverError : public NumericalError {
public:
    DualSolverError(const std::string& what, AllocationResult best) : NumericalError(what), best_(std::move(best)) {}
    const AllocationResult& best_iterate() const { return best_; }

private:
    AllocationResult best_;
};

// Gaussian-input capacity under two trace budgets:
//   max log2|I + H R H^H / sigma2|  s.t.  Tr(R A_rad) <= p_rad,  Tr(R A_cur) <= i_in_sq.
//
// The Lagrangian weight is W = mu_rad A_rad + mu_in A_cur. Writing it as
// c * (a A_rad + (1 - a) A_cur / eps) with eps = i_in_sq / p_rad, the inner
// problem for a fixed shape `a` is water-filling with combined budget p_rad
// (level = log2(e) / c), and a single bisection on the shape, in logit
// coordinates, makes both constraints tight. When the optimum of one
// single-constraint problem already satisfies the other budget, it is returned
// as is with the other multiplier set to zero.
inline AllocationResult solve_dual_constraint(const MatrixXc& h, const MatrixXc& a_rad, const MatrixXc& a_cur, double p_rad, double i_in_sq,
                                              double sigma_sq, const DualSolverOptions& options = {}) {
    const Eigen::Index n = h.cols();
    detail::require(a_rad.rows() == n && a_rad.cols() == n && a_cur.rows() == n && a_cur.cols() == n, "constraint matrices must be N x N");
    const double eps = i_in_sq / p_rad;

    auto finish = [&](const detail::WeightedSolution& s, double mu_rad, double mu_in) {
        AllocationResult r;
        r.covariance = s.covariance;
        r.diag_power = s.covariance.diagonal().real();
        r.capacity_bits = s.capacity;
        r.mu_rad = mu_rad;
        r.mu_in = mu_in;
        r.n_used = s.n_used;
        r.radiated_power = detail::trace_product(s.covariance, a_rad);
        r.current_norm = detail::trace_product(s.covariance, a_cur);
        r.slack_radiated = p_rad - r.radiated_power;
        r.slack_current = i_in_sq - r.current_norm;
        const double viol_rad = std::max(0.0, -r.slack_radiated) / p_rad;
        const double viol_cur = std::max(0.0, -r.slack_current) / i_in_sq;
        const double cs_rad = mu_rad > 0.0 ? std::abs(r.slack_radiated) / p_rad : 0.0;
        const double cs_cur = mu_in > 0.0 ? std::abs(r.slack_current) / i_in_sq : 0.0;
        r.kkt_residual = std::max({viol_rad, viol_cur, cs_rad, cs_cur});
        return r;
    };

    // Radiated budget alone.
    {
        const auto s = detail::weighted_water_filling(h, inverse_sqrt_hpd(a_rad), p_rad, sigma_sq);
        if (detail::trace_product(s.covariance, a_cur) <= i_in_sq) return finish(s, s.level > 0.0 ? kLog2e / s.level : 0.0, 0.0);
    }
    // Current budget alone.
    {
        const auto s = detail::weighted_water_filling(h, inverse_sqrt_hpd(a_cur), i_in_sq, sigma_sq);
        if (detail::trace_product(s.covariance, a_rad) <= p_rad) return finish(s, 0.0, s.level > 0.0 ? kLog2e / s.level : 0.0);
    }

    // Both budgets bind. t = log(a / (1 - a)); radiated usage decreases in t.
    auto solve_at = [&](double t) {
        const double a = 1.0 / (1.0 + std::exp(-t));
        const MatrixXc w = a * a_rad + (1.0 - a) / eps * a_cur;
        auto s = detail::weighted_water_filling(h, inverse_sqrt_hpd(w), p_rad, sigma_sq);
        const double c = s.level > 0.0 ? kLog2e / s.level : 0.0;
        auto r = finish(s, c * a, c * (1.0 - a) / eps);
        return r;
    };
    auto excess = [&](const AllocationResult& r) { return (r.radiated_power - p_rad) / p_rad; };

    double lo = -1.0, hi = 1.0;
    AllocationResult r_lo = solve_at(lo), r_hi = solve_at(hi);
    for (int k = 0; k < 64 && excess(r_lo) <= 0.0; ++k) r_lo = solve_at(lo *= 2.0);
    for (int k = 0; k < 64 && excess(r_hi) >= 0.0; ++k) r_hi = solve_at(hi *= 2.0);

    AllocationResult best = std::abs(excess(r_lo)) < std::abs(excess(r_hi)) ? r_lo : r_hi;
    auto score = [&](const AllocationResult& r) { return std::max(r.kkt_residual, std::abs(excess(r))); };
    for (int it = 0; it < options.max_bisections; ++it) {
        if (score(best) < options.tolerance) break;
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const auto r = solve_at(mid);
        if (score(r) < score(best)) best = r;
        if (excess(r) > 0.0) lo = mid;
        else hi = mid;
    }
    if (score(best) > options.kkt_limit)
        throw DualSolverError("dual-constraint multiplier search did not converge (residual " + std::to_string(score(best)) + ")", best);
    return best;
}

namespace detail {

inline MatrixXc diag_matrix(const VectorXr& d) { return d.cast<cdouble>().asDiagonal(); }

inline VectorXr inverse_lambda(const VectorXr& lambda) {
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        require(lambda(i) > 0.0, "lambda must be positive for current-constrained problems (restrict to the usable rank)", "lambda");
    return lambda.cwiseInverse();
}

inline AllocationResult from_covariance(const MatrixXc& channel, const MatrixXc& cov, double sigma_sq) {
    AllocationResult r;
    r.covariance = cov;
    r.diag_power = cov.diagonal().real();
    r.capacity_bits = capacity_bits(channel, cov, sigma_sq);
    r.n_used = count_positive_eigen(cov);
    return r;
}

} // namespace detail

// Radiated-power constraint, solved in the orthonormal-pattern basis
// (allocation R_beta with Tr(R_beta) <= P_rad): identical to ideal M x N MIMO.
// `lambda`, if given, is only used to report the resulting current norm.
inline AllocationResult capacity_radiated(const MatrixXc& h_iid, const ConstraintSpec& spec, Policy policy, const VectorXr& lambda = {}) {
    spec.validate();
    const Eigen::Index n = h_iid.cols();
    AllocationResult r;
    if (policy == Policy::ep) {
        r = detail::from_covariance(h_iid, MatrixXc::Identity(n, n) * (spec.p_rad / static_cast<double>(n)), spec.sigma_sq);
    } else {
        const auto s = detail::weighted_water_filling(h_iid, MatrixXc::Identity(n, n), spec.p_rad, spec.sigma_sq);
        r.covariance = s.covariance;
        r.diag_power = s.covariance.diagonal().real();
        r.capacity_bits = s.capacity;
        r.n_used = s.n_used;
        r.mu_rad = s.level > 0.0 ? kLog2e / s.level : 0.0;
    }
    r.radiated_power = r.covariance.trace().real();
    r.slack_radiated = spec.p_rad - r.radiated_power;
    if (lambda.size() == n) {
        r.current_norm = (r.diag_power.array() / lambda.array()).sum();
        r.slack_current = spec.i_in_sq - r.current_norm;
    } else {
        r.current_norm = std::numeric_limits<double>::quiet_NaN();
        r.slack_current = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

// Current-norm constraint, solved in the current basis: allocation R_gamma
// with Tr(R_gamma) <= I_in^2 on the channel H_iid Lambda^1/2.
inline AllocationResult capacity_current(const MatrixXc& h_iid, const VectorXr& lambda, const ConstraintSpec& spec, Policy policy) {
    spec.validate();
    const Eigen::Index n = h_iid.cols();
    detail::require(lambda.size() == n, "lambda length must match the number of columns of H_iid");
    const MatrixXc channel = h_iid * lambda.cwiseMax(0.0).cwiseSqrt().cast<cdouble>().asDiagonal();
    AllocationResult r;
    if (policy == Policy::ep) {
        r = detail::from_covariance(channel, MatrixXc::Identity(n, n) * (spec.i_in_sq / static_cast<double>(n)), spec.sigma_sq);
    } else {
        const auto s = detail::weighted_water_filling(channel, MatrixXc::Identity(n, n), spec.i_in_sq, spec.sigma_sq);
        r.covariance = s.covariance;
        r.diag_power = s.covariance.diagonal().real();
        r.capacity_bits = s.capacity;
        r.n_used = s.n_used;
        r.mu_in = s.level > 0.0 ? kLog2e / s.level : 0.0;
    }
    r.current_norm = r.covariance.trace().real();
    r.radiated_power = (r.diag_power.array() * lambda.array().max(0.0)).sum();
    r.slack_current = spec.i_in_sq - r.current_norm;
    r.slack_radiated = std::numeric_limits<double>::quiet_NaN();
    return r;
}

// Equal power P_rad / N_eff on the first N_eff modes, nothing elsewhere.
inline AllocationResult dual_ep(const MatrixXc& h_iid, const VectorXr& lambda, const ConstraintSpec& spec) {
    spec.validate();
    const Eigen::Index n = h_iid.cols();
    detail::require(lambda.size() == n, "lambda length must match the number of columns of H_iid");
    const int n_eff = eadof(lambda, spec.epsilon());
    AllocationResult r;
    r.n_eff = n_eff;
    if (n_eff == 0) {
        r.feasible = false;
        r.covariance = MatrixXc::Zero(n, n);
        r.diag_power = VectorXr::Zero(n);
        r.slack_radiated = spec.p_rad;
        r.slack_current = spec.i_in_sq;
        return r;
    }
    VectorXr p = VectorXr::Zero(n);
    p.head(n_eff).setConstant(spec.p_rad / n_eff);
    r = detail::from_covariance(h_iid, detail::diag_matrix(p), spec.sigma_sq);
    r.n_eff = n_eff;
    r.radiated_power = p.sum();
    r.current_norm = (p.head(n_eff).array() / lambda.head(n_eff).array()).sum();
    r.slack_radiated = spec.p_rad - r.radiated_power;
    r.slack_current = spec.i_in_sq - r.current_norm;
    return r;
}

// Equal power on all N modes, scaled down until both budgets hold:
// p = min(P_rad / N, I_in^2 / sum(1 / lambda)). This is the equal-power curve
// that drops once N exceeds the EADoF.
inline AllocationResult dual_ep_scaled(const MatrixXc& h_iid, const VectorXr& lambda, const ConstraintSpec& spec) {
    spec.validate();
    const Eigen::Index n = h_iid.cols();
    detail::require(lambda.size() == n, "lambda length must match the number of columns of H_iid");
    const VectorXr inv = detail::inverse_lambda(lambda);
    const double p = std::min(spec.p_rad / static_cast<double>(n), spec.i_in_sq / inv.sum());
    auto r = detail::from_covariance(h_iid, MatrixXc::Identity(n, n) * p, spec.sigma_sq);
    r.n_eff = eadof(lambda, spec.epsilon());
    r.radiated_power = p * static_cast<double>(n);
    r.current_norm = p * inv.sum();
    r.slack_radiated = spec.p_rad - r.radiated_power;
    r.slack_current = spec.i_in_sq - r.current_norm;
    return r;
}

// Water-filling under both budgets in the orthonormal-pattern basis:
// Tr(R_beta) <= P_rad and Tr(R_beta Lambda^-1) <= I_in^2.
inline AllocationResult dual_wf(const MatrixXc& h_iid, const VectorXr& lambda, const ConstraintSpec& spec, const DualSolverOptions& options = {}) {
    spec.validate();
    const Eigen::Index n = h_iid.cols();
    detail::require(lambda.size() == n, "lambda length must match the number of columns of H_iid");
    const VectorXr inv = detail::inverse_lambda(lambda);
    auto r = solve_dual_constraint(h_iid, MatrixXc::Identity(n, n), detail::diag_matrix(inv), spec.p_rad, spec.i_in_sq, spec.sigma_sq, options);
    r.n_eff = eadof(lambda, spec.epsilon());
    return r;
}

} // namespace beamspace
