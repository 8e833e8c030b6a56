#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <utility>

#include "spatter/errors.hpp"
#include "spatter/grid.hpp"

namespace spatter {

/// 3x3 projective transform, row-major, normalized so the bottom-right
/// entry is 1.
class Homography {
public:
    Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

    explicit Homography(const std::array<double, 9>& m) : m_(m) {
        if (!std::isfinite(m_[8]) || std::abs(m_[8]) < 1e-300) {
            throw SingularConfiguration("homography bottom-right entry is zero");
        }
        const double s = m_[8];
        for (auto& v : m_) v /= s;
        if (std::abs(determinant()) <= 1e-12) {
            throw SingularConfiguration("homography is not invertible");
        }
    }

    static Homography translation(double tx, double ty) {
        return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
    }
    static Homography scale_translation(double sx, double sy, double tx, double ty) {
        return Homography({sx, 0, tx, 0, sy, ty, 0, 0, 1});
    }

    double operator()(int row, int col) const { return m_[static_cast<std::size_t>(row * 3 + col)]; }
    const std::array<double, 9>& matrix() const noexcept { return m_; }

    double determinant() const noexcept {
        const auto& a = m_;
        return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
               a[2] * (a[3] * a[7] - a[4] * a[6]);
    }

    Point2 apply(Point2 p) const noexcept {
        const auto& a = m_;
        const double w = a[6] * p.x + a[7] * p.y + a[8];
        return {(a[0] * p.x + a[1] * p.y + a[2]) / w, (a[3] * p.x + a[4] * p.y + a[5]) / w};
    }

    Homography inverse() const {
        const auto& a = m_;
        const double det = determinant();
        std::array<double, 9> inv{
            (a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det,
            (a[1] * a[5] - a[2] * a[4]) / det, (a[5] * a[6] - a[3] * a[8]) / det,
            (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
            (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det,
            (a[0] * a[4] - a[1] * a[3]) / det};
        return Homography(inv);
    }

    /// (this * other)(p) == this(other(p)).
    Homography operator*(const Homography& o) const {
        std::array<double, 9> r{};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m_[i * 3 + k] * o.m_[k * 3 + j];
                r[static_cast<std::size_t>(i * 3 + j)] = s;
            }
        }
        return Homography(r);
    }

private:
    std::array<double, 9> m_;
};

namespace detail {

inline bool nearly_collinear(Point2 a, Point2 b, Point2 c) {
    const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const double scale = std::max({std::hypot(b.x - a.x, b.y - a.y),
                                   std::hypot(c.x - a.x, c.y - a.y),
                                   std::hypot(c.x - b.x, c.y - b.y), 1e-300});
    return std::abs(cross) <= 1e-12 * scale * scale;
}

inline bool any_three_collinear(std::span<const Point2, 4> p) {
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            for (std::size_t k = j + 1; k < 4; ++k)
                if (nearly_collinear(p[i], p[j], p[k])) return true;
    return false;
}

/// Dense Gaussian elimination with partial pivoting; solves A x = b in place.
template <std::size_t N>
std::array<double, N> solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N> b) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-14) throw SingularConfiguration("singular linear system");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < N; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, N> x{};
    for (std::size_t i = N; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < N; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

}  // namespace detail

/// Homography mapping each src point onto its dst point, from the standard
/// 8-equation system with h33 fixed to 1.
inline Homography estimate_homography(std::span<const Point2, 4> src, std::span<const Point2, 4> dst) {
    if (detail::any_three_collinear(src) || detail::any_three_collinear(dst)) {
        throw SingularConfiguration("three of the four correspondence points are collinear");
    }
    // Conditioning: shift and scale both point sets so coordinates are O(1).
    auto normalizer = [](std::span<const Point2, 4> pts) {
        double cx = 0, cy = 0;
        for (const auto& p : pts) { cx += p.x; cy += p.y; }
        cx /= 4; cy /= 4;
        double d = 0;
        for (const auto& p : pts) d += std::hypot(p.x - cx, p.y - cy);
        d /= 4;
        const double s = d > 0 ? 1.0 / d : 1.0;
        return Homography::scale_translation(s, s, -s * cx, -s * cy);
    };
    const Homography ts = normalizer(src);
    const Homography td = normalizer(dst);

    std::array<std::array<double, 8>, 8> a{};
    std::array<double, 8> b{};
    for (std::size_t i = 0; i < 4; ++i) {
        const Point2 s = ts.apply(src[i]);
        const Point2 d = td.apply(dst[i]);
        a[2 * i] = {s.x, s.y, 1, 0, 0, 0, -s.x * d.x, -s.y * d.x};
        b[2 * i] = d.x;
        a[2 * i + 1] = {0, 0, 0, s.x, s.y, 1, -s.x * d.y, -s.y * d.y};
        b[2 * i + 1] = d.y;
    }
    const auto h = detail::solve_dense<8>(a, b);
    const Homography normalized({h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0});
    return td.inverse() * normalized * ts;
}

}  // namespace spatter
