// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"

namespace beamspace {

using cdouble = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;
using MatrixXr = Eigen::MatrixXd;
using VectorXr = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLog2e = std::numbers::log2e;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kFreeSpaceImpedance = 376.730313668;

inline double max_abs(const MatrixXc& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double max_abs(const MatrixXr& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool all_finite(const MatrixXc& m) {
    return m.real().allFinite() && m.imag().allFinite();
}

// Largest entry of |A - A^T|, used for reciprocity checks.
inline double symmetry_residual(const MatrixXc& a) { return max_abs(MatrixXc(a - a.transpose())); }
inline double hermitian_residual(const MatrixXc& a) { return max_abs(MatrixXc(a - a.adjoint())); }

inline MatrixXc hermitian_part(const MatrixXc& a) { return 0.5 * (a + a.adjoint()); }

// log2 det(I + A) for Hermitian positive semi-definite A.
inline double log2_det_identity_plus(const MatrixXc& a) {
    if (a.rows() == 0) return 0.0;
    const Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(a), Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        acc += std::log2(1.0 + std::max(0.0, es.eigenvalues()(i)));
    return acc;
}

// log2 |I + H R H^H / sigma2|, the capacity of a Gaussian channel for input covariance R.
inline double capacity_bits(const MatrixXc& h, const MatrixXc& covariance, double sigma_sq) {
    if (h.rows() == 0 || h.cols() == 0) return 0.0;
    const MatrixXc g = h * covariance * h.adjoint() / sigma_sq;
    return log2_det_identity_plus(g);
}

// Summation by recursive halving; the result depends only on the order of `values`.
inline double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

// Selects rows and columns of a square matrix by index.
inline MatrixXc submatrix(const MatrixXc& a, std::span<const int> rows, std::span<const int> cols) {
    MatrixXc out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(rows[r], cols[c]);
    return out;
}

inline MatrixXc columns(const MatrixXc& a, std::span<const int> cols) {
    MatrixXc out(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
    return out;
}

// Inverse square root of a Hermitian positive definite matrix.
inline MatrixXc inverse_sqrt_hpd(const MatrixXc& a) {
    const Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(a));
    const VectorXr& ev = es.eigenvalues();
    if (ev.size() > 0 && !(ev.minCoeff() > 0.0))
        throw NumericalError("matrix is not positive definite (min eigenvalue " + std::to_string(ev.minCoeff()) + ")");
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace beamspace
