#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spatter/errors.hpp"
#include "spatter/grid.hpp"
#include "spatter/homography.hpp"

namespace spatter {

struct FrameMeta {
    long long frame_index = 0;
    double timestamp_s = 0.0;
    /// Maps pixel coordinates onto build-plate millimetres.
    std::optional<Homography> pixel_to_plate;
};

/// 8-bit grayscale camera frame.
struct Frame {
    Grid<std::uint8_t> pixels;
    FrameMeta meta;

    Frame() = default;
    Frame(std::size_t width, std::size_t height, std::uint8_t fill = 0) : pixels(width, height, fill) {}
    explicit Frame(Grid<std::uint8_t> px, FrameMeta m = {}) : pixels(std::move(px)), meta(std::move(m)) {}

    std::size_t width() const noexcept { return pixels.width(); }
    std::size_t height() const noexcept { return pixels.height(); }
};

enum class Label : std::uint8_t { background = 0, melt_pool = 1, spatter = 2 };

constexpr int kNumClasses = 3;

/// Per-pixel class map: 0 background, 1 melt pool (plume merged), 2 spatter.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(std::size_t width, std::size_t height) : labels_(width, height, 0) {}
    explicit LabelMap(Grid<std::uint8_t> labels) : labels_(std::move(labels)) {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] > 2) {
                throw FormatError("label value " + std::to_string(labels_[i]) + " at index " +
                                  std::to_string(i) + " is not a class id in {0,1,2}");
            }
        }
    }

    std::size_t width() const noexcept { return labels_.width(); }
    std::size_t height() const noexcept { return labels_.height(); }
    std::size_t size() const noexcept { return labels_.size(); }

    Label at(std::size_t x, std::size_t y) const { return static_cast<Label>(labels_(x, y)); }
    Label at(std::size_t i) const { return static_cast<Label>(labels_[i]); }
    void set(std::size_t x, std::size_t y, Label l) { labels_(x, y) = static_cast<std::uint8_t>(l); }
    void set(std::size_t i, Label l) { labels_[i] = static_cast<std::uint8_t>(l); }

    const Grid<std::uint8_t>& grid() const noexcept { return labels_; }

    std::size_t count(Label l) const noexcept {
        std::size_t n = 0;
        for (auto v : labels_.values()) n += (v == static_cast<std::uint8_t>(l));
        return n;
    }

    /// Binary mask (1 where the label matches).
    Grid<std::uint8_t> mask(Label l) const {
        Grid<std::uint8_t> m(width(), height(), 0);
        for (std::size_t i = 0; i < labels_.size(); ++i) m[i] = labels_[i] == static_cast<std::uint8_t>(l);
        return m;
    }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    Grid<std::uint8_t> labels_;
};

}  // namespace spatter
