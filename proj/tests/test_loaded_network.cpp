// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <beamspace/loaded_network.hpp>

#include "oracles.hpp"

using namespace beamspace;

namespace {

PortDataset coupled_grid() {
    DipoleGridSpec s;
    s.rows = 2;
    s.cols = 2;
    s.orientation = Orientation::xy;
    s.spacing_m = 0.2 * kSpeedOfLight / s.frequency_hz;
    s.grid = sphere_grid(8, 2);
    s.self_reactance_ohm = -30.0;
    s.feasible_feeds = {0, 1, 2, 3, 4, 5, 6, 7};
    return synthesize_dipole_grid(s);
}

PortDataset tiny_dataset(const MatrixXc& z, const MatrixXc& e, std::vector<int> feasible) {
    PortDataset ds;
    ds.frequency_hz = 1e9;
    ds.grid = sphere_grid(2, 1);
    ds.E = e;
    ds.Z = z;
    ds.feasible_feeds = std::move(feasible);
    return ds;
}

std::vector<std::optional<double>> random_loads(std::size_t n, double open_fraction = 0.0) {
    std::vector<std::optional<double>> l(n);
    for (auto& x : l)
        if (oracle::uniform(0.0, 1.0) >= open_fraction) x = oracle::uniform(-300.0, 300.0);
    return l;
}

} // namespace

TEST(PartitionImpedance, ExtractsBlocksInFeedOrder) {
    MatrixXc z(3, 3);
    z << 1, 2, 3, 2, 5, 6, 3, 6, 9;
    const auto b = partition_impedance(z, {2, 0});
    EXPECT_EQ(b.parasitic, (std::vector<int>{1}));
    MatrixXc za(2, 2);
    za << 9, 3, 3, 1;
    EXPECT_EQ(b.Z_A, za);
    EXPECT_EQ(b.Z_AP(0, 0), cdouble(6.0));
    EXPECT_EQ(b.Z_AP(1, 0), cdouble(2.0));
    EXPECT_EQ(b.Z_PA, b.Z_AP.transpose());
    EXPECT_EQ(b.Z_P(0, 0), cdouble(5.0));
    EXPECT_THROW(partition_impedance(z, {1, 1}), ValidationError);
    EXPECT_THROW(partition_impedance(z, {3}), ValidationError);
}

TEST(ParasiticCurrents, HandSolvedTwoPort) {
    MatrixXc z(2, 2);
    z << 2.0, 1.0, 1.0, 5.0;
    const auto b = partition_impedance(z, {0});
    VectorXc ia(1);
    ia << 1.0;
    EXPECT_NEAR(std::abs(parasitic_currents(b, {0.0}, ia)(0) - cdouble(-0.2)), 0.0, 1e-15);
    // jX = 5j: i_P = -1 / (5 + 5j)
    EXPECT_NEAR(std::abs(parasitic_currents(b, {5.0}, ia)(0) - cdouble(-0.1, 0.1)), 0.0, 1e-15);
    EXPECT_EQ(parasitic_currents(b, {std::nullopt}, ia)(0), cdouble(0.0));
}

TEST(ParasiticCurrents, SatisfyPortLaws) {
    // Loaded ports see V = -jX i, open ports carry no current.
    const auto ds = coupled_grid();
    const std::vector<int> feeds{1, 6};
    const auto b = partition_impedance(ds.Z, feeds);
    for (int t = 0; t < 10; ++t) {
        const auto loads = random_loads(b.parasitic.size(), 0.3);
        const VectorXc ia = oracle::gaussian(2, 1);
        const VectorXc ip = parasitic_currents(b, loads, ia);
        VectorXc i = VectorXc::Zero(ds.ports());
        for (int k = 0; k < 2; ++k) i(feeds[static_cast<std::size_t>(k)]) = ia(k);
        for (std::size_t r = 0; r < b.parasitic.size(); ++r) i(b.parasitic[r]) = ip(static_cast<Eigen::Index>(r));
        const VectorXc v = ds.Z * i;
        for (std::size_t r = 0; r < b.parasitic.size(); ++r) {
            if (loads[r]) EXPECT_LT(std::abs(v(b.parasitic[r]) + cdouble(0.0, *loads[r]) * ip(static_cast<Eigen::Index>(r))), 1e-9 * v.cwiseAbs().maxCoeff());
            else EXPECT_EQ(ip(static_cast<Eigen::Index>(r)), cdouble(0.0));
        }
    }
}

TEST(SynthesizedPatterns, AllOpenGivesFeedPatterns) {
    const auto ds = coupled_grid();
    FeedLoadConfig cfg;
    cfg.feeds = {3, 0};
    cfg.loads.assign(6, std::nullopt);
    const auto sp = synthesized_patterns(ds, cfg);
    EXPECT_EQ(sp.E_T_fed, columns(ds.E, cfg.feeds));
    EXPECT_EQ(sp.I_P, MatrixXc::Zero(6, 2));
}

TEST(SynthesizedPatterns, SuperpositionOfFeedCurrents) {
    const auto ds = coupled_grid();
    FeedLoadConfig cfg;
    cfg.feeds = {0, 5, 2};
    cfg.loads = random_loads(5, 0.2);
    const auto sp = synthesized_patterns(ds, cfg);
    const auto b = partition_impedance(ds.Z, cfg.feeds);
    const VectorXc ia = oracle::gaussian(3, 1);
    const VectorXc ip = parasitic_currents(b, cfg.loads, ia);
    const VectorXc direct = columns(ds.E, cfg.feeds) * ia + columns(ds.E, b.parasitic) * ip;
    EXPECT_LT((sp.E_T_fed * ia - direct).norm(), 1e-10 * direct.norm());
}

TEST(SynthesizedPatterns, CorrelationProperties) {
    const auto ds = coupled_grid();
    for (int t = 0; t < 10; ++t) {
        FeedLoadConfig cfg;
        cfg.feeds = {t % 8, (t + 3) % 8, (t + 5) % 8};
        cfg.loads = random_loads(5, 0.2);
        const auto sp = synthesized_patterns(ds, cfg);
        EXPECT_LT(hermitian_residual(sp.rho), 1e-12);
        for (int j = 0; j < 3; ++j) {
            EXPECT_EQ(sp.rho(j, j), cdouble(1.0));
            for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(sp.rho(j, k)), 1.0 + 1e-12);
        }
        EXPECT_GE(sp.objective, 0.0);
        EXPECT_LE(sp.objective, 6.0 + 1e-12);
    }
}

TEST(SynthesizedPatterns, IdenticalPatternsAreFullyCorrelated) {
    MatrixXc e = MatrixXc::Zero(8, 2);
    e.col(0) = oracle::gaussian(8, 1);
    e.col(1) = e.col(0) * std::polar(1.0, 0.7);
    MatrixXc z = e.adjoint() * e / kFreeSpaceImpedance;
    z = 0.5 * (z + z.transpose()).eval();
    const auto ds = tiny_dataset(z, e, {0, 1});
    FeedLoadConfig cfg;
    cfg.feeds = {0, 1};
    const auto sp = synthesized_patterns(ds, cfg);
    EXPECT_NEAR(std::abs(sp.rho(0, 1)), 1.0, 1e-12);
    EXPECT_NEAR(sp.objective, 2.0, 1e-12);
}

TEST(SynthesizedPatterns, InvariantUnderFeedRelabelAndPatternPhase) {
    auto ds = coupled_grid();
    FeedLoadConfig cfg;
    cfg.feeds = {0, 3, 6};
    cfg.loads = random_loads(5);
    const double base = synthesized_patterns(ds, cfg).objective;
    FeedLoadConfig swapped = cfg;
    swapped.feeds = {6, 0, 3};
    EXPECT_NEAR(synthesized_patterns(ds, swapped).objective, base, 1e-12 * base);
    // A global phase on every pattern leaves all correlations unchanged.
    ds.E *= std::polar(1.0, 1.1);
    EXPECT_NEAR(synthesized_patterns(ds, cfg).objective, base, 1e-12 * base);
}

TEST(LoadedNetwork, GramEvaluationMatchesPatternProducts) {
    const auto ds = coupled_grid();
    const LoadedNetwork net(ds);
    for (int t = 0; t < 10; ++t) {
        FeedLoadConfig cfg;
        cfg.feeds = {t % 8, (t + 1) % 8};
        cfg.loads = random_loads(6, 0.3);
        const auto sp = synthesized_patterns(ds, cfg);
        const auto par = complement_ports(8, cfg.feeds);
        std::vector<int> loaded;
        std::vector<double> x;
        for (std::size_t i = 0; i < par.size(); ++i)
            if (cfg.loads[i]) loaded.push_back(par[i]), x.push_back(*cfg.loads[i]);
        const auto ev = net.evaluate(cfg.feeds, loaded, Eigen::Map<VectorXr>(x.data(), static_cast<Eigen::Index>(x.size())), false);
        EXPECT_NEAR(ev.objective, sp.objective, 1e-10);
        EXPECT_LT(max_abs(MatrixXc(ev.rho - sp.rho)), 1e-10);
    }
}

TEST(LoadedNetwork, AnalyticGradientMatchesCentralDifferences) {
    const auto ds = coupled_grid();
    const LoadedNetwork net(ds);
    const std::vector<int> feeds{0, 2, 5};
    const std::vector<int> loaded{1, 3, 4, 6, 7};
    const double delta = 1e-3;
    for (int t = 0; t < 20; ++t) {
        VectorXr x(5);
        for (int i = 0; i < 5; ++i) x(i) = oracle::uniform(-400.0, 400.0);
        const auto ev = net.evaluate(feeds, loaded, x, true, delta);
        for (int m = 0; m < 5; ++m) {
            const double h = 1e-4 * std::max(1.0, std::abs(x(m)));
            VectorXr xp = x, xm = x;
            xp(m) += h;
            xm(m) -= h;
            const double fd = (net.evaluate(feeds, loaded, xp, false, delta).smooth_objective - net.evaluate(feeds, loaded, xm, false, delta).smooth_objective) / (2 * h);
            EXPECT_LT(std::abs(ev.gradient(m) - fd), 1e-4 * std::max(std::abs(fd), 1e-3 * ev.gradient.cwiseAbs().maxCoeff())) << "point " << t << " port " << m;
        }
    }
}

TEST(LoadedNetwork, SingularLoadIsNumericalError) {
    MatrixXc z = MatrixXc::Zero(2, 2);
    z(0, 0) = 1.0;
    z(1, 1) = cdouble(0.0, 5.0);
    MatrixXc e = MatrixXc::Zero(8, 2);
    e(0, 0) = e(1, 1) = 1.0;
    const auto ds = tiny_dataset(z, e, {0});
    FeedLoadConfig cfg;
    cfg.feeds = {0};
    cfg.loads = {-5.0};
    try {
        synthesized_patterns(ds, cfg);
        FAIL();
    } catch (const NumericalError& err) {
        EXPECT_NE(std::string(err.what()).find("Z_P + jX^L"), std::string::npos);
    }
    const LoadedNetwork net(ds);
    EXPECT_THROW(net.evaluate({0}, {1}, VectorXr::Constant(1, -5.0), false), NumericalError);
}

TEST(FeedLoadConfig, Validation) {
    auto ds = coupled_grid();
    ds.feasible_feeds = {0, 1, 2};
    FeedLoadConfig cfg;
    cfg.feeds = {0, 1};
    cfg.loads.assign(6, 10.0);
    EXPECT_NO_THROW(validate_config(ds, cfg));
    auto field = [&](const FeedLoadConfig& c, double xmax = 1e300) {
        try {
            validate_config(ds, c, xmax);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    FeedLoadConfig bad = cfg;
    bad.feeds = {0, 0};
    EXPECT_EQ(field(bad), "feeds");
    bad.feeds = {0, 5};  // not feasible
    EXPECT_EQ(field(bad), "feeds");
    bad.feeds = {0, 8};
    EXPECT_EQ(field(bad), "feeds");
    bad = cfg;
    bad.loads.pop_back();
    EXPECT_EQ(field(bad), "loads");
    bad = cfg;
    bad.loads[2] = std::nan("");
    EXPECT_EQ(field(bad), "loads");
    EXPECT_EQ(field(cfg, 5.0), "loads");
}
