// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "port_model.hpp"

namespace beamspace {

// NPORT-JSON: the on-disk form of a PortDataset.
//
//   { "frequency_hz": f, "eta_ohm": eta,
//     "grid": { "theta": [...], "phi": [...], "weight": [...], "polarizations": 1|2 },
//     "E": { "re": [[row 0], ...], "im": [[row 0], ...] },   K x N, row-major
//     "Z": { "re": [[...]], "im": [[...]] },                 N x N
//     "feasible_feeds": [1-based indices], "tags": ["ground-feed", ...] }
//
// Doubles are written in shortest round-trip form, so save/load is bit-exact.
namespace nport_json {

inline constexpr double kReciprocityTolerance = 1e-6;

namespace detail {

using nlohmann::json;

inline const json& member(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ValidationError("missing required field", path);
    return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ValidationError("expected a number", path);
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError("non-finite number", path);
    return d;
}

inline std::vector<double> number_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw ValidationError("expected an array of numbers", path);
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

// Accepts nested rows ([[...], ...]) or a flat row-major array.
inline MatrixXr real_matrix(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
    if (!v.is_array()) throw ValidationError("expected an array", path);
    MatrixXr m(rows, cols);
    if (!v.empty() && v[0].is_array()) {
        if (static_cast<Eigen::Index>(v.size()) != rows)
            throw ValidationError("dimension mismatch: expected " + std::to_string(rows) + " rows, found " + std::to_string(v.size()), path);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto row = number_array(v[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
            if (static_cast<Eigen::Index>(row.size()) != cols)
                throw ValidationError("dimension mismatch: expected " + std::to_string(cols) + " columns, found " + std::to_string(row.size()),
                                      path + "[" + std::to_string(r) + "]");
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
        }
    } else {
        const auto flat = number_array(v, path);
        if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
            throw ValidationError("dimension mismatch: expected " + std::to_string(rows * cols) + " entries, found " + std::to_string(flat.size()), path);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    }
    return m;
}

// Column count of a matrix with `rows` rows stored nested or flat.
inline Eigen::Index col_count(const json& v, Eigen::Index rows, const std::string& path) {
    if (!v.is_array() || v.empty()) throw ValidationError("expected a non-empty array", path);
    if (v[0].is_array()) {
        if (static_cast<Eigen::Index>(v.size()) != rows)
            throw ValidationError("dimension mismatch: " + std::to_string(v.size()) + " rows but grid implies " + std::to_string(rows), path);
        return static_cast<Eigen::Index>(v[0].size());
    }
    const auto total = static_cast<Eigen::Index>(v.size());
    if (rows <= 0 || total % rows != 0)
        throw ValidationError("dimension mismatch: " + std::to_string(total) + " entries is not a multiple of " + std::to_string(rows) + " rows", path);
    return total / rows;
}

inline MatrixXc complex_matrix(const json& obj, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
    const MatrixXr re = real_matrix(member(obj, "re", path + ".re"), rows, cols, path + ".re");
    const MatrixXr im = real_matrix(member(obj, "im", path + ".im"), rows, cols, path + ".im");
    MatrixXc m(rows, cols);
    m.real() = re;
    m.imag() = im;
    return m;
}

inline json rows_of(const MatrixXr& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline json complex_json(const MatrixXc& m) { return json{{"re", rows_of(m.real())}, {"im", rows_of(m.imag())}}; }

} // namespace detail

inline nlohmann::json to_json(const PortDataset& ds) {
    using nlohmann::json;
    json feeds = json::array();
    for (int f : ds.feasible_feeds) feeds.push_back(f + 1);
    return json{
        {"frequency_hz", ds.frequency_hz},
        {"eta_ohm", ds.eta_ohm},
        {"grid", {{"theta", ds.grid.theta}, {"phi", ds.grid.phi}, {"weight", ds.grid.weight}, {"polarizations", ds.grid.polarizations}}},
        {"E", detail::complex_json(ds.E)},
        {"Z", detail::complex_json(ds.Z)},
        {"feasible_feeds", feeds},
        {"tags", ds.tags},
        {"lossless_consistent", ds.lossless_consistent},
    };
}

inline PortDataset from_json(const nlohmann::json& j) {
    using detail::member;
    if (!j.is_object()) throw ValidationError("top level must be an object", "$");
    PortDataset ds;
    ds.frequency_hz = detail::number(member(j, "frequency_hz", "frequency_hz"), "frequency_hz");
    ds.eta_ohm = detail::number(member(j, "eta_ohm", "eta_ohm"), "eta_ohm");

    const auto& g = member(j, "grid", "grid");
    ds.grid.theta = detail::number_array(member(g, "theta", "grid.theta"), "grid.theta");
    ds.grid.phi = detail::number_array(member(g, "phi", "grid.phi"), "grid.phi");
    ds.grid.weight = detail::number_array(member(g, "weight", "grid.weight"), "grid.weight");
    const auto& pol = member(g, "polarizations", "grid.polarizations");
    if (!pol.is_number_integer()) throw ValidationError("expected an integer", "grid.polarizations");
    ds.grid.polarizations = pol.get<int>();
    ds.grid.validate();

    const auto& e = member(j, "E", "E");
    const Eigen::Index k = ds.grid.rows();
    const Eigen::Index n = detail::col_count(member(e, "re", "E.re"), k, "E.re");
    if (k < n) throw ValidationError("dimension error: K = " + std::to_string(k) + " < N = " + std::to_string(n), "E");
    ds.E = detail::complex_matrix(e, k, n, "E");
    ds.Z = detail::complex_matrix(member(j, "Z", "Z"), n, n, "Z");

    for (const auto& f : member(j, "feasible_feeds", "feasible_feeds")) {
        if (!f.is_number_integer()) throw ValidationError("expected integer indices", "feasible_feeds");
        const int idx = f.get<int>();
        if (idx < 1 || idx > n) throw ValidationError("index " + std::to_string(idx) + " out of range 1.." + std::to_string(n), "feasible_feeds");
        ds.feasible_feeds.push_back(idx - 1);
    }
    if (j.contains("tags")) {
        if (!j.at("tags").is_array()) throw ValidationError("expected an array of strings", "tags");
        for (const auto& t : j.at("tags")) {
            if (!t.is_string()) throw ValidationError("expected strings", "tags");
            ds.tags.push_back(t.get<std::string>());
        }
    }
    if (j.contains("lossless_consistent")) ds.lossless_consistent = j.at("lossless_consistent").get<bool>();

    // Lossless consistency is advisory for imported data.
    ds.validate(kReciprocityTolerance, std::numeric_limits<double>::infinity());
    return ds;
}

inline std::string dump(const PortDataset& ds) { return to_json(ds).dump() + "\n"; }

inline PortDataset parse(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what(), "$");
    }
    return from_json(j);
}

} // namespace nport_json

inline void save_dataset(const PortDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing", path);
    out << nport_json::dump(ds);
    if (!out) throw ValidationError("write failed", path);
}

inline PortDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open for reading", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return nport_json::parse(buf.str());
}

} // namespace beamspace
