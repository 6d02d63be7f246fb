// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include <gtest/gtest.h>

#include <beamspace/channel.hpp>

#include "oracles.hpp"

using namespace beamspace;

namespace {

ModalBasis line_basis(int ports, int n_theta = 4) {
    DipoleGridSpec s;
    s.rows = 1;
    s.cols = ports;
    s.spacing_m = 0.2 * kSpeedOfLight / s.frequency_hz;
    s.grid = sphere_grid(n_theta, 2);
    return modal_decomposition(synthesize_dipole_grid(s));
}

// Kolmogorov-Smirnov statistic of a sample against a CDF.
double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

Eigen::VectorXcd vec(const MatrixXc& m) { return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size()); }

} // namespace

TEST(DrawHiid, DeterministicPerSeedTrialAndStream) {
    const auto basis = line_basis(3);
    ChannelSpec spec;
    spec.M = 3;
    spec.rng_seed = 42;
    const auto a = draw_h_iid(spec, basis, 7);
    const auto b = draw_h_iid(spec, basis, 7);
    EXPECT_EQ(max_abs(MatrixXc(a.H_iid - b.H_iid)), 0.0);
    EXPECT_GT(max_abs(MatrixXc(a.H_iid - draw_h_iid(spec, basis, 8).H_iid)), 0.0);
    EXPECT_GT(max_abs(MatrixXc(a.H_iid - draw_h_iid(spec, basis, 7, 1).H_iid)), 0.0);
    spec.rng_seed = 43;
    EXPECT_GT(max_abs(MatrixXc(a.H_iid - draw_h_iid(spec, basis, 7).H_iid)), 0.0);
    EXPECT_EQ(a.H_iid.rows(), 3);
    EXPECT_EQ(a.H_iid.cols(), 3);
}

TEST(DrawHiid, UnitVarianceEntries) {
    const auto basis = line_basis(2);
    ChannelSpec spec;
    spec.M = 2;
    double sum = 0.0;
    cdouble mean = 0.0;
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
        const auto h = draw_h_iid(spec, basis, t).H_iid;
        sum += std::norm(h(0, 0));
        mean += h(0, 0);
    }
    EXPECT_GE(sum / n, 0.94);
    EXPECT_LE(sum / n, 1.06);
    EXPECT_LT(std::abs(mean / static_cast<double>(n)), 0.05);
}

TEST(DrawHiid, RayleighMagnitude) {
    const auto basis = line_basis(2);
    ChannelSpec spec;
    spec.M = 2;
    std::vector<double> mags;
    for (int t = 0; t < 2000; ++t) mags.push_back(std::abs(draw_h_iid(spec, basis, t).H_iid(1, 0)));
    const double d = ks_one_sample(mags, [](double r) { return 1.0 - std::exp(-r * r); });
    EXPECT_LT(d, 1.95 / std::sqrt(2000.0));
}

TEST(DrawHiid, UnitarilyInvariant) {
    const auto basis = line_basis(3);
    ChannelSpec spec;
    spec.M = 3;
    const MatrixXc u = oracle::random_unitary(3);
    std::vector<double> rotated, plain;
    for (int t = 0; t < 2000; ++t) {
        rotated.push_back(std::abs((u * draw_h_iid(spec, basis, t, 1).H_iid)(0, 0)));
        plain.push_back(std::abs(draw_h_iid(spec, basis, t, 2).H_iid(0, 0)));
    }
    // Two-sample critical value at alpha = 0.001.
    EXPECT_LT(ks_two_sample(rotated, plain), 1.95 * std::sqrt(2.0 / 2000.0));
}

TEST(DrawHiid, RejectsReceiverSmallerThanRank) {
    const auto basis = line_basis(3);
    ChannelSpec spec;
    spec.M = 2;
    EXPECT_THROW(draw_h_iid(spec, basis, 0), ValidationError);
    spec.M = 3;
    spec.trials = 0;
    EXPECT_THROW(draw_h_iid(spec, basis, 0), ValidationError);
}

TEST(VirtualChannel, SameSecondOrderStatisticsAsDirectDraw) {
    const auto basis = line_basis(3);
    ChannelSpec spec;
    spec.M = 3;
    const MatrixXc e_r = ideal_receive_patterns(basis.B.rows(), 3, basis.eta_ohm, 5);
    EXPECT_LT(max_abs(MatrixXc(e_r.adjoint() * e_r / basis.eta_ohm - MatrixXc::Identity(3, 3))), 1e-12);
    const int n = 6000;
    const int d = 9;
    MatrixXc c_fast = MatrixXc::Zero(d, d), c_slow = MatrixXc::Zero(d, d);
    for (int t = 0; t < n; ++t) {
        const Eigen::VectorXcd a = vec(draw_h_iid(spec, basis, t).H_iid);
        const Eigen::VectorXcd b = vec(draw_h_iid_via_virtual_channel(spec, basis, e_r, t).H_iid);
        c_fast += a * a.adjoint();
        c_slow += b * b.adjoint();
    }
    c_fast /= n;
    c_slow /= n;
    auto op_norm = [](const MatrixXc& m) { return Eigen::JacobiSVD<MatrixXc>(m).singularValues()(0); };
    EXPECT_LT(op_norm(c_fast - MatrixXc::Identity(d, d)), 0.1);
    EXPECT_LT(op_norm(c_slow - MatrixXc::Identity(d, d)), 0.1);
}

TEST(ComposeChannel, FactorsThroughModalBasis) {
    const auto basis = line_basis(4);
    const MatrixXc h_iid = oracle::gaussian(4, 4);
    const MatrixXc h = compose_channel(h_iid, basis);
    const MatrixXc root = basis.lambda.cwiseSqrt().cast<cdouble>().asDiagonal();
    EXPECT_LT(max_abs(MatrixXc(h * basis.Q - h_iid * root)), 1e-12 * max_abs(h));
    // H^H H = Q Lambda^1/2 H_iid^H H_iid Lambda^1/2 Q^H
    const MatrixXc gram = basis.Q * root * h_iid.adjoint() * h_iid * root * basis.Q.adjoint();
    EXPECT_LT(max_abs(MatrixXc(h.adjoint() * h - gram)), 1e-10 * max_abs(gram));
    // Linear in H_iid.
    const MatrixXc g_iid = oracle::gaussian(4, 4);
    const MatrixXc lin = compose_channel(MatrixXc(2.0 * h_iid + g_iid), basis) - 2.0 * h - compose_channel(g_iid, basis);
    EXPECT_LT(max_abs(lin), 1e-12 * max_abs(h));
    EXPECT_THROW(compose_channel(oracle::gaussian(4, 3), basis), ValidationError);
}

TEST(ComposeChannel, ReceivedPowerIsRadiatedPowerInExpectation) {
    // E_H ||H i||^2 = M i^H K_T i for i.i.d. unit-variance H_iid.
    const auto basis = line_basis(3);
    ChannelSpec spec;
    spec.M = 3;
    const Eigen::VectorXcd i = oracle::gaussian(3, 1);
    const double target = spec.M * (i.adjoint() * basis.K_T * i)(0, 0).real();
    double acc = 0.0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) acc += (compose_channel(draw_h_iid(spec, basis, t).H_iid, basis) * i).squaredNorm();
    EXPECT_NEAR(acc / n, target, 0.05 * target);
}
