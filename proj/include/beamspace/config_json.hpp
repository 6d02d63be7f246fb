// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "loaded_network.hpp"
#include "optimizer.hpp"

namespace beamspace {

// FeedLoadConfig on disk:
//   { "feeds": [1-based], "loads": [ohms | null], "objective": x,
//     "provenance": "...", "iteration_log": [ {...}, ... ] }
// `loads` follows the non-feed ports in ascending order; null is an open port.
namespace config_json {

inline nlohmann::json iteration_log(const AltOptState& st) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& r : st.history) {
        nlohmann::json feeds = nlohmann::json::array();
        for (int f : r.feeds) feeds.push_back(f + 1);
        log.push_back({{"iteration", r.iteration},
                       {"feeds", feeds},
                       {"objective_after_loads", r.objective_loads},
                       {"objective", r.objective},
                       {"load_iterations", r.load_iterations},
                       {"load_warning", r.load_warning},
                       {"wall_seconds", r.wall_seconds}});
    }
    return log;
}

inline nlohmann::json to_json(const FeedLoadConfig& cfg, const nlohmann::json& log = nlohmann::json::array()) {
    nlohmann::json feeds = nlohmann::json::array();
    for (int f : cfg.feeds) feeds.push_back(f + 1);
    nlohmann::json loads = nlohmann::json::array();
    for (const auto& l : cfg.loads) loads.push_back(l ? nlohmann::json(*l) : nlohmann::json(nullptr));
    return {{"feeds", feeds}, {"loads", loads}, {"objective", cfg.objective}, {"provenance", cfg.provenance}, {"iteration_log", log}};
}

inline FeedLoadConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("expected an object", "$");
    FeedLoadConfig cfg;
    if (!j.contains("feeds") || !j.at("feeds").is_array()) throw ValidationError("missing or not an array", "feeds");
    for (std::size_t i = 0; i < j.at("feeds").size(); ++i) {
        const auto& f = j.at("feeds")[i];
        if (!f.is_number_integer()) throw ValidationError("expected 1-based integer indices", "feeds[" + std::to_string(i) + "]");
        cfg.feeds.push_back(f.get<int>() - 1);
    }
    if (!j.contains("loads") || !j.at("loads").is_array()) throw ValidationError("missing or not an array", "loads");
    for (std::size_t i = 0; i < j.at("loads").size(); ++i) {
        const auto& l = j.at("loads")[i];
        if (l.is_null()) cfg.loads.emplace_back();
        else if (l.is_number() && std::isfinite(l.get<double>())) cfg.loads.emplace_back(l.get<double>());
        else throw ValidationError("expected a finite number or null", "loads[" + std::to_string(i) + "]");
    }
    if (j.contains("objective") && j.at("objective").is_number()) cfg.objective = j.at("objective").get<double>();
    if (j.contains("provenance") && j.at("provenance").is_string()) cfg.provenance = j.at("provenance").get<std::string>();
    return cfg;
}

} // namespace config_json

inline void save_config(const FeedLoadConfig& cfg, const std::string& path, const nlohmann::json& log = nlohmann::json::array()) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing", path);
    out << config_json::to_json(cfg, log).dump(2) << "\n";
    if (!out) throw ValidationError("write failed", path);
}

inline FeedLoadConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open for reading", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what(), "$");
    }
    return config_json::from_json(j);
}

} // namespace beamspace
