#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spatter/errors.hpp"

namespace spatter {

/// Row-major 2-D raster. x is the column, y the row.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(std::size_t width, std::size_t height, T fill = T{})
        : width_(width), height_(height), data_(width * height, fill) {}
    Grid(std::size_t width, std::size_t height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != width_ * height_) {
            throw DimensionMismatch("grid data length does not match width*height");
        }
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
    const T& operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool contains(long long x, long long y) const noexcept {
        return x >= 0 && y >= 0 && static_cast<std::size_t>(x) < width_ &&
               static_cast<std::size_t>(y) < height_;
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    const std::vector<T>& raw() const noexcept { return data_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<T> data_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

}  // namespace spatter
