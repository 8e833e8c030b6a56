#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spatter/errors.hpp"

namespace spatter::csv {

/// Locale-independent shortest-ish decimal for report files.
inline std::string fmt(double v, int significant = 10) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // drop negative zero
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", significant, v);
    return buf;
}

/// Splits one CSV line. Double-quoted cells may contain separators; a
/// doubled quote inside them is a literal quote. Unquoted cells are trimmed.
inline std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false, was_quoted = false;
    auto finish = [&] {
        if (!was_quoted) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            std::size_t b = 0;
            while (b < cell.size() && cell[b] == ' ') ++b;
            cell.erase(0, b);
        }
        cells.push_back(std::move(cell));
        cell.clear();
        was_quoted = false;
    };
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"' && cell.find_first_not_of(' ') == std::string::npos) {
            cell.clear();
            quoted = was_quoted = true;
        } else if (ch == sep) {
            finish();
        } else if (!(was_quoted && (ch == ' ' || ch == '\r'))) {
            cell += ch;
        }
    }
    if (quoted) throw FormatError("unterminated quoted cell");
    if (!line.empty()) finish();
    return cells;
}

/// Header-addressed table of string cells.
class Table {
public:
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    bool has(const std::string& column) const {
        for (const auto& h : header)
            if (h == column) return true;
        return false;
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw FormatError("missing column '" + name + "'");
    }

    double number(std::size_t row, const std::string& name) const {
        const auto& cell = rows.at(row).at(column(name));
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument(cell);
            return v;
        } catch (const std::exception&) {
            throw FormatError("row " + std::to_string(row + 1) + ", column '" + name + "': not a number: '" + cell + "'");
        }
    }

    const std::string& text(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }
};

inline Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw FormatError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (!have_header) throw FormatError(path.string() + ": empty CSV");
    return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spatter::csv
