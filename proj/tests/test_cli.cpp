// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <beamspace/beamspace.hpp>

#include "oracles.hpp"

using namespace beamspace;

namespace {

struct RunResult {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::string& work_dir() {
    static const std::string dir = oracle::temp_dir(BEAMSPACE_TEST_TMP, "cli");
    return dir;
}

RunResult run(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const std::string base = work_dir() + "/run" + std::to_string(counter++);
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(BEAMSPACE_CLI_PATH) + " " + args + " >" + base + ".out 2>" + base + ".err";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(base + ".out");
    r.err = slurp(base + ".err");
    return r;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("no column " + name);
    return static_cast<std::size_t>(it - header.begin());
}

// 2x2 xy grid with the x-dipoles as feasible feeds; written once.
const std::string& grid_dataset() {
    static const std::string path = [] {
        const std::string p = work_dir() + "/grid.json";
        const auto r = run("gen --rows 2 --cols 2 --spacing-wl 0.2 --orientation xy --angles 8 --self-reactance -30 --feeds 1,2,3,4 --out " + p);
        if (r.status != 0) throw std::runtime_error("gen failed: " + r.err);
        return p;
    }();
    return path;
}

} // namespace

TEST(Cli, GenWritesDatasetAndManifest) {
    const std::string p = work_dir() + "/gen_a.json";
    const auto r = run("gen --rows 2 --cols 2 --spacing 0.03 --orientation x --out " + p);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto ds = load_dataset(p);
    EXPECT_EQ(ds.ports(), 4);
    EXPECT_EQ(ds.feasible_feeds, (std::vector<int>{0, 1, 2, 3}));
    const auto manifest = nlohmann::json::parse(slurp(p + ".manifest.json"));
    EXPECT_EQ(manifest.at("command"), "gen");
    EXPECT_EQ(manifest.at("ports"), 4);
    // Rerun reproduces the dataset byte for byte.
    const std::string q = work_dir() + "/gen_b.json";
    ASSERT_EQ(run("gen --rows 2 --cols 2 --spacing 0.03 --orientation x --out " + q).status, 0);
    EXPECT_EQ(slurp(p), slurp(q));
    // stdout form matches the file.
    EXPECT_EQ(run("gen --rows 2 --cols 2 --spacing 0.03 --orientation x").out, slurp(p));
}

TEST(Cli, ValidationErrorsExitTwo) {
    auto r = run("gen --rows 2 --cols 2 --spacing -1");
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("spacing"), std::string::npos);
    EXPECT_EQ(run("gen --rows 2 --cols 2 --spacing 0.03 --orientation q").status, 2);
    EXPECT_EQ(run("bounds --dataset /nonexistent.json").status, 2);
    EXPECT_EQ(run("bounds --dataset " + grid_dataset() + " --policy greedy --trials 2").status, 2);
    EXPECT_EQ(run("bounds --dataset " + grid_dataset() + " --p-list 99 --trials 2").status, 2);
    EXPECT_EQ(run("bounds").status, 2);
    EXPECT_EQ(run("frobnicate").status, 2);
    const std::string bad = work_dir() + "/bad.json";
    std::ofstream(bad) << "{\"frequency_hz\": 1e9}";
    r = run("eadof --dataset " + bad);
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("eta_ohm"), std::string::npos);
}

TEST(Cli, BoundsRadiatedEqualsIdeal) {
    const std::string out = work_dir() + "/bounds_rad.csv";
    const auto r = run("bounds --dataset " + grid_dataset() + " --mode radiated --policy wf --trials 30 --p-list 1,3,5 --out " + out);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rows = csv_rows(slurp(out));
    ASSERT_EQ(rows.size(), 4u);
    const auto c = column(rows[0], "capacity_mean_bits"), i = column(rows[0], "ideal_mean_bits");
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k][c], rows[k][i]);
    EXPECT_EQ(slurp(out).rfind("# schema=bounds/1 manifest=bounds_rad.csv.manifest.json\n", 0), 0u);
    const auto manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
    EXPECT_EQ(manifest.at("dataset_sha256").get<std::string>().size(), 64u);
    EXPECT_EQ(manifest.at("params").at("trials"), "30");
}

TEST(Cli, BoundsMatchesLibrary) {
    const auto r = run("bounds --dataset " + grid_dataset() + " --mode dual --policy both --trials 20 --seed 4 --epsilon 0.05 --snr-db 15");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto ds = load_dataset(grid_dataset());
    const auto basis = modal_decomposition(ds);
    CurveOptions o;
    o.trials = 20;
    o.seed = 4;
    o.epsilon = 0.05;
    o.snr_db = 15.0;
    for (int p = 1; p <= basis.usable_rank; ++p) o.p_list.push_back(p);
    EXPECT_EQ(r.out, bounds_csv(monte_carlo_capacity(basis.lambda.head(basis.usable_rank), o)).str());
}

TEST(Cli, ThreadCountDoesNotChangeResults) {
    const std::string args = "bounds --dataset " + grid_dataset() + " --trials 24 --p-list 2,4";
    const auto a = run(args, "BEAMSPACE_THREADS=1");
    const auto b = run(args, "BEAMSPACE_THREADS=3");
    ASSERT_EQ(a.status, 0);
    EXPECT_EQ(a.out, b.out);
}

TEST(Cli, EadofTable) {
    const auto r = run("eadof --dataset " + grid_dataset() + " --epsilon 0.001,0.02,0.5,100");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"epsilon", "n_eff"}));
    EXPECT_EQ(rows[2][0], "0.02");
    for (std::size_t k = 2; k < rows.size(); ++k) EXPECT_GE(std::stoi(rows[k][1]), std::stoi(rows[k - 1][1]));
    EXPECT_EQ(std::stoi(rows[4][1]), 8);

    const std::string single = work_dir() + "/single.json";
    ASSERT_EQ(run("gen --rows 1 --cols 1 --spacing 0.01 --out " + single).status, 0);
    const auto s = csv_rows(run("eadof --dataset " + single + " --eps-min 1e-4 --eps-max 10 --eps-count 20").out);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_TRUE(s[k][1] == "0" || s[k][1] == "1");
    EXPECT_EQ(s.back()[1], "1");
}

TEST(Cli, ConvergenceRuns) {
    const auto r = run("convergence --densities 2,4 --trials 10 --ring-points 32");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][1], "4");
    EXPECT_EQ(rows[2][1], "16");
    EXPECT_EQ(run("convergence --densities 4,2 --trials 2").status, 2);
}

TEST(Cli, OptimizeAndExport) {
    const std::string cfg = work_dir() + "/opt_config.json", log = work_dir() + "/opt_log.json", out = work_dir() + "/opt.csv";
    const auto r = run("optimize --dataset " + grid_dataset() + " --q 2 --restarts 2 --max-iter 60 --trials 40 --snr-db 10,20 --out-config " +
                       cfg + " --log " + log + " --out " + out);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto config = load_config(cfg);
    EXPECT_EQ(config.feeds.size(), 2u);
    EXPECT_EQ(config.loads.size(), 6u);
    const auto l = nlohmann::json::parse(slurp(log));
    EXPECT_LT(l.at("objective").get<double>(), l.at("open_load_objective").get<double>());
    EXPECT_FALSE(nlohmann::json::parse(slurp(cfg)).at("iteration_log").empty());
    const auto rows = csv_rows(slurp(out));
    ASSERT_EQ(rows.size(), 3u);
    const auto fed = column(rows[0], "fed_mean_bits"), all = column(rows[0], "bound_all_mean_bits");
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LE(std::stod(rows[k][fed]), std::stod(rows[k][all]));

    auto e = run("export --dataset " + grid_dataset() + " --what rho --config " + cfg);
    ASSERT_EQ(e.status, 0) << e.err;
    const auto rho = csv_rows(e.out);
    ASSERT_EQ(rho.size(), 5u);
    EXPECT_EQ(rho[1][4], "1");
    e = run("export --dataset " + grid_dataset() + " --what patterns --config " + cfg);
    ASSERT_EQ(e.status, 0) << e.err;
    EXPECT_EQ(csv_rows(e.out).size(), 1u + 8u * 16u * 2u);
    e = run("export --dataset " + grid_dataset() + " --what modes");
    ASSERT_EQ(e.status, 0);
    EXPECT_EQ(csv_rows(e.out).size(), 9u);
    EXPECT_EQ(run("export --dataset " + grid_dataset() + " --what rho").status, 2);
}

TEST(Cli, SingularLoadExitsThree) {
    PortDataset ds;
    ds.frequency_hz = 1e9;
    ds.grid = sphere_grid(2, 1);
    ds.E = MatrixXc::Zero(8, 2);
    ds.E(0, 0) = ds.E(1, 1) = 1.0;
    ds.Z = MatrixXc::Zero(2, 2);
    ds.Z(0, 0) = 1.0;
    ds.Z(1, 1) = cdouble(0.0, 5.0);
    ds.feasible_feeds = {0};
    const std::string p = work_dir() + "/singular.json", c = work_dir() + "/singular_config.json";
    save_dataset(ds, p);
    FeedLoadConfig cfg;
    cfg.feeds = {0};
    cfg.loads = {-5.0};
    save_config(cfg, c);
    const auto r = run("export --dataset " + p + " --what rho --config " + c);
    EXPECT_EQ(r.status, 3);
    EXPECT_NE(r.err.find("Z_P + jX^L"), std::string::npos);
}
