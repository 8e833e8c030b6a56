#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "spatter/errors.hpp"
#include "spatter/grid.hpp"

namespace spatter::pgm {

/// Writes an 8-bit binary PGM (P5, maxval 255).
inline void write(const std::filesystem::path& path, const Grid<std::uint8_t>& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.raw().data()), static_cast<std::streamsize>(img.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

namespace detail {

inline void skip_ws_and_comments(const std::string& buf, std::size_t& pos) {
    while (pos < buf.size()) {
        if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
            ++pos;
        } else if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
}

inline std::size_t read_uint(const std::string& buf, std::size_t& pos, const std::string& name) {
    skip_ws_and_comments(buf, pos);
    std::size_t start = pos;
    std::size_t v = 0;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
        v = v * 10 + static_cast<std::size_t>(buf[pos] - '0');
        if (v > (1u << 30)) throw FormatError(name + ": header value too large");
        ++pos;
    }
    if (pos == start) throw FormatError(name + ": malformed PGM header");
    return v;
}

}  // namespace detail

/// Reads an 8-bit binary PGM (P5, maxval <= 255).
inline Grid<std::uint8_t> read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') throw FormatError(name + ": not a binary PGM (P5)");
    std::size_t pos = 2;
    const std::size_t w = detail::read_uint(buf, pos, name);
    const std::size_t h = detail::read_uint(buf, pos, name);
    const std::size_t maxval = detail::read_uint(buf, pos, name);
    if (maxval == 0 || maxval > 255) throw FormatError(name + ": only 8-bit PGM is supported");
    if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
        throw FormatError(name + ": malformed PGM header");
    }
    ++pos;
    if (buf.size() - pos != w * h) {
        throw FormatError(name + ": pixel payload has " + std::to_string(buf.size() - pos) +
                          " bytes, expected " + std::to_string(w * h));
    }
    std::vector<std::uint8_t> data(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.end());
    return Grid<std::uint8_t>(w, h, std::move(data));
}

}  // namespace spatter::pgm
