#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatter/errors.hpp"
#include "spatter/grid.hpp"
#include "spatter/homography.hpp"
#include "spatter/image.hpp"

namespace spatter {

// ---------------------------------------------------------------------------
// Perspective correction
// ---------------------------------------------------------------------------

/// Bilinear sample at a sub-pixel position; pixel centres sit on integer
/// coordinates. Returns nullopt outside [0, w-1] x [0, h-1].
inline std::optional<double> sample_bilinear(const Grid<std::uint8_t>& img, double x, double y) {
    constexpr double slack = 1e-9;
    if (img.empty()) return std::nullopt;
    const double maxx = static_cast<double>(img.width() - 1);
    const double maxy = static_cast<double>(img.height() - 1);
    if (!(x >= -slack && y >= -slack && x <= maxx + slack && y <= maxy + slack)) return std::nullopt;
    x = std::clamp(x, 0.0, maxx);
    y = std::clamp(y, 0.0, maxy);
    const auto x0 = static_cast<std::size_t>(std::floor(x));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double top = img(x0, y0) * (1.0 - fx) + img(x1, y0) * fx;
    const double bot = img(x0, y1) * (1.0 - fx) + img(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

/// Inverse-mapped bilinear resampling: out(p) = in(H^-1 p). Samples falling
/// outside the source are 0.
inline Frame warp(const Frame& frame, const Homography& h, std::size_t out_width, std::size_t out_height) {
    const Homography inv = h.inverse();
    Frame out(out_width, out_height, 0);
    out.meta = frame.meta;
    for (std::size_t y = 0; y < out_height; ++y) {
        for (std::size_t x = 0; x < out_width; ++x) {
            const Point2 src = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            if (auto v = sample_bilinear(frame.pixels, src.x, src.y)) {
                out.pixels(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(*v), 0L, 255L));
            }
        }
    }
    return out;
}

inline nlohmann::json homography_to_json(const Homography& h) {
    return nlohmann::json{{"homography", h.matrix()}};
}

inline Homography homography_from_json(const nlohmann::json& j) {
    const auto& arr = j.contains("homography") ? j.at("homography") : j;
    if (!arr.is_array() || arr.size() != 9) throw FormatError("homography must be 9 numbers, row-major");
    std::array<double, 9> m{};
    for (std::size_t i = 0; i < 9; ++i) m[i] = arr.at(i).get<double>();
    return Homography(m);
}

struct Correspondence {
    Point2 src;
    Point2 dst;
};

/// Reads calibration correspondences: CSV rows x_src,y_src,x_dst,y_dst with
/// an optional header line.
inline std::vector<Correspondence> read_correspondences_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<Correspondence> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.find_first_of("abcdefghijklmnopqrstuvwxyz") != std::string::npos) continue;
        std::stringstream ss(line);
        std::array<double, 4> v{};
        for (std::size_t i = 0; i < 4; ++i) {
            std::string cell;
            if (!std::getline(ss, cell, ',')) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
            }
            try {
                v[i] = std::stod(cell);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        out.push_back({{v[0], v[1]}, {v[2], v[3]}});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

struct Component {
    int label = 0;  // 1-based, raster order of first pixel
    std::size_t area = 0;
    Point2 centroid;
    std::size_t first_pixel = 0;  // raster index
    std::size_t min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

struct ComponentLabeling {
    Grid<int> labels;  // 0 = not in any component
    std::vector<Component> components;
};

/// Labels non-zero pixels of a mask. Components are numbered in raster order
/// of their first pixel; centroid is the mean of member pixel coordinates.
template <typename T>
ComponentLabeling connected_components(const Grid<T>& mask, int connectivity = 8) {
    if (connectivity != 4 && connectivity != 8) throw InvalidParameter("connectivity must be 4 or 8");
    ComponentLabeling out{Grid<int>(mask.width(), mask.height(), 0), {}};
    const std::size_t w = mask.width();
    const std::size_t h = mask.height();
    std::vector<std::size_t> stack;
    static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
    const int nbrs = connectivity == 8 ? 8 : 4;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || out.labels[start] != 0) continue;
        Component c;
        c.label = static_cast<int>(out.components.size()) + 1;
        c.first_pixel = start;
        c.min_x = c.max_x = start % w;
        c.min_y = c.max_y = start / w;
        double sx = 0.0, sy = 0.0;
        out.labels[start] = c.label;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            const std::size_t x = idx % w;
            const std::size_t y = idx / w;
            ++c.area;
            sx += static_cast<double>(x);
            sy += static_cast<double>(y);
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            for (int k = 0; k < nbrs; ++k) {
                const long long nx = static_cast<long long>(x) + dx8[k];
                const long long ny = static_cast<long long>(y) + dy8[k];
                if (nx < 0 || ny < 0 || nx >= static_cast<long long>(w) || ny >= static_cast<long long>(h)) continue;
                const std::size_t nidx = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                if (mask[nidx] && out.labels[nidx] == 0) {
                    out.labels[nidx] = c.label;
                    stack.push_back(nidx);
                }
            }
        }
        c.centroid = {sx / static_cast<double>(c.area), sy / static_cast<double>(c.area)};
        out.components.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

/// Raw intensity labeling: >= t_mp is melt pool, [t_spatter, t_mp) spatter,
/// anything darker background. No flare suppression.
inline LabelMap threshold_segment(const Frame& frame, int t_mp, int t_spatter) {
    if (!(t_mp > t_spatter)) throw InvalidParameter("threshold ordering requires t_mp > t_spatter");
    LabelMap out(frame.width(), frame.height());
    const auto& px = frame.pixels;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const int v = px[i];
        if (v >= t_mp) {
            out.set(i, Label::melt_pool);
        } else if (v >= t_spatter) {
            out.set(i, Label::spatter);
        }
    }
    return out;
}

}  // namespace spatter
