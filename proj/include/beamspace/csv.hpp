// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace beamspace {

// 17 significant digits: enough to round-trip any double.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Versioned CSV: a `# schema=<name>/<version> manifest=<file>` line, a header
// row, then data rows.
struct CsvTable {
    std::string schema;
    int version = 1;
    std::string manifest;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    struct Row {
        std::vector<std::string>& cells;
        Row& operator<<(double v) {
            cells.push_back(format_number(v));
            return *this;
        }
        Row& operator<<(int v) {
            cells.push_back(std::to_string(v));
            return *this;
        }
        Row& operator<<(const std::string& v) {
            cells.push_back(v);
            return *this;
        }
        Row& operator<<(const char* v) { return *this << std::string(v); }
    };

    Row add_row() {
        rows.emplace_back();
        return Row{rows.back()};
    }

    std::string str() const {
        std::ostringstream out;
        out << "# schema=" << schema << "/" << version;
        if (!manifest.empty()) out << " manifest=" << manifest;
        out << "\n";
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
            out << "\n";
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out.str();
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ValidationError("cannot open for writing", path);
        f << str();
        if (!f) throw ValidationError("write failed", path);
    }
};

} // namespace beamspace
