// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include <beamspace/nport_json.hpp>

#include "oracles.hpp"

using namespace beamspace;
using nlohmann::json;

namespace {

PortDataset small_dataset() {
    DipoleGridSpec s;
    s.rows = 2;
    s.cols = 2;
    s.spacing_m = 0.037;
    s.orientation = Orientation::xy;
    s.self_reactance_ohm = -37.5;
    s.grid = sphere_grid(6, 2);
    return synthesize_dipole_grid(s);
}

bool bit_equal(const MatrixXc& a, const MatrixXc& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && std::memcmp(a.data(), b.data(), sizeof(cdouble) * static_cast<std::size_t>(a.size())) == 0;
}

template <typename T>
bool bit_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(T) * a.size()) == 0;
}

std::string field_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "<no error>";
}

} // namespace

TEST(NportJson, RoundTripIsBitExact) {
    const auto ds = small_dataset();
    const auto dir = oracle::temp_dir(BEAMSPACE_TEST_TMP, "nport");
    const std::string path = dir + "/ds.json";
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    EXPECT_TRUE(bit_equal(ds.E, back.E));
    EXPECT_TRUE(bit_equal(ds.Z, back.Z));
    EXPECT_TRUE(bit_equal(ds.grid.theta, back.grid.theta));
    EXPECT_TRUE(bit_equal(ds.grid.phi, back.grid.phi));
    EXPECT_TRUE(bit_equal(ds.grid.weight, back.grid.weight));
    EXPECT_EQ(ds.grid.polarizations, back.grid.polarizations);
    EXPECT_EQ(ds.frequency_hz, back.frequency_hz);
    EXPECT_EQ(ds.eta_ohm, back.eta_ohm);
    EXPECT_EQ(ds.feasible_feeds, back.feasible_feeds);
    EXPECT_EQ(ds.tags, back.tags);
    EXPECT_EQ(ds.lossless_consistent, back.lossless_consistent);
    // Saving again reproduces the file byte for byte.
    EXPECT_EQ(nport_json::dump(ds), nport_json::dump(back));
}

TEST(NportJson, FeedsAreOneBasedOnDisk) {
    auto ds = small_dataset();
    ds.feasible_feeds = {0, 2};
    const json j = nport_json::to_json(ds);
    EXPECT_EQ(j.at("feasible_feeds"), json({1, 3}));
}

TEST(NportJson, AcceptsFlatRowMajorMatrices) {
    const auto ds = small_dataset();
    json j = nport_json::to_json(ds);
    for (const char* m : {"E", "Z"})
        for (const char* part : {"re", "im"}) {
            json flat = json::array();
            for (const auto& row : j[m][part])
                for (const auto& v : row) flat.push_back(v);
            j[m][part] = flat;
        }
    const auto back = nport_json::from_json(j);
    EXPECT_TRUE(bit_equal(ds.E, back.E));
    EXPECT_TRUE(bit_equal(ds.Z, back.Z));
}

TEST(NportJson, RejectsFewerAnglesThanPorts) {
    PortDataset ds;
    ds.frequency_hz = 1e9;
    ds.grid = sphere_grid(1, 1);  // K = 2
    ds.E = MatrixXc::Ones(2, 3);
    ds.Z = MatrixXc::Identity(3, 3);
    ds.feasible_feeds = {0};
    const json j = nport_json::to_json(ds);
    try {
        nport_json::from_json(j);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("dimension"), std::string::npos);
        EXPECT_EQ(e.field(), "E");
    }
}

TEST(NportJson, RejectsNonReciprocalZ) {
    json j = nport_json::to_json(small_dataset());
    j["Z"]["re"][0][1] = j["Z"]["re"][0][1].get<double>() + 1e-3;
    try {
        nport_json::from_json(j);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "Z");
        EXPECT_NE(std::string(e.what()).find("reciprocity"), std::string::npos);
    }
    // Asymmetry below the import tolerance is accepted.
    json k = nport_json::to_json(small_dataset());
    k["Z"]["im"][0][1] = k["Z"]["im"][0][1].get<double>() * (1.0 + 1e-9);
    EXPECT_NO_THROW(nport_json::from_json(k));
}

TEST(NportJson, StructuredErrorsNameTheField) {
    const json good = nport_json::to_json(small_dataset());
    {
        json j = good;
        j.erase("frequency_hz");
        EXPECT_EQ(field_of([&] { nport_json::from_json(j); }), "frequency_hz");
    }
    {
        json j = good;
        j["grid"]["weight"][2] = "x";
        EXPECT_EQ(field_of([&] { nport_json::from_json(j); }), "grid.weight[2]");
    }
    {
        json j = good;
        j["E"]["re"].erase(0);
        EXPECT_EQ(field_of([&] { nport_json::from_json(j); }), "E.re");
    }
    {
        json j = good;
        j["feasible_feeds"] = json({0});
        EXPECT_EQ(field_of([&] { nport_json::from_json(j); }), "feasible_feeds");
    }
    {
        json j = good;
        j["grid"]["polarizations"] = 3;
        EXPECT_NE(field_of([&] { nport_json::from_json(j); }).find("polarizations"), std::string::npos);
    }
}

TEST(NportJson, RejectsMalformedFiles) {
    EXPECT_THROW(nport_json::parse("{not json"), ValidationError);
    EXPECT_THROW(load_dataset("/nonexistent/ds.json"), ValidationError);
}
