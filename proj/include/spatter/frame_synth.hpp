#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatter/angles.hpp"
#include "spatter/core_model.hpp"
#include "spatter/errors.hpp"
#include "spatter/homography.hpp"
#include "spatter/image.hpp"
#include "spatter/rng.hpp"

namespace spatter {

/// Camera flare: a vertical run of equally spaced bright spots.
struct FlareSpec {
    double column_x = 0.0;
    double first_y = 0.0;
    int spot_count = 4;
    double spot_spacing = 14.0;
    int spot_intensity = 90;
    int spot_radius = 2;
};

struct SceneSpec {
    std::size_t width = 256;
    std::size_t height = 256;
    Point2 mp_center{128.0, 128.0};
    /// Support radius of the melt-pool blob (3 sigma of the Gaussian).
    double mp_radius = 9.0;
    int mp_peak_intensity = 255;
    double scan_direction_deg = 0.0;
    int spatter_count = 0;
    /// Ejection direction relative to the scan direction; the default
    /// favours the melt-pool tail.
    double spatter_angle_mean_deg = 180.0;
    double spatter_angle_spread_deg = 55.0;
    double spatter_max_distance = 90.0;
    int spatter_radius_min = 2;
    int spatter_radius_max = 3;
    int spatter_intensity_min = 100;
    int spatter_intensity_max = 170;
    std::optional<FlareSpec> flare;
    double background_noise_sigma = 2.0;
    /// Clustering radius the scene must stay unambiguous for: every rendered
    /// object keeps a gap of at least 2 * separation_eps to every other.
    double separation_eps = 3.0;
    std::uint64_t rng_seed = 0;
};

struct GroundTruth {
    Point2 mp_center;
    std::vector<Point2> spatter_centroids;
    std::vector<double> ejection_angles_deg;
    std::vector<Point2> flare_spots;

    std::size_t spatter_count() const noexcept { return spatter_centroids.size(); }
};

struct SyntheticFrame {
    Frame frame;
    LabelMap labels;
    GroundTruth truth;
};

namespace detail {

struct Disk {
    long long cx = 0;
    long long cy = 0;
    int radius = 0;
};

inline bool disk_inside(const Disk& d, std::size_t w, std::size_t h) {
    return d.cx - d.radius >= 1 && d.cy - d.radius >= 1 &&
           d.cx + d.radius <= static_cast<long long>(w) - 2 &&
           d.cy + d.radius <= static_cast<long long>(h) - 2;
}

inline double disk_gap(const Disk& a, double bx, double by, double br) {
    return std::hypot(static_cast<double>(a.cx) - bx, static_cast<double>(a.cy) - by) - a.radius - br;
}

inline void validate_scene(const SceneSpec& s) {
    if (s.width < 8 || s.height < 8) throw InvalidParameter("scene must be at least 8x8 pixels");
    if (!(s.mp_radius >= 1.0)) throw InvalidParameter("melt-pool radius must be >= 1 px");
    if (s.mp_center.x - s.mp_radius < 0 || s.mp_center.y - s.mp_radius < 0 ||
        s.mp_center.x + s.mp_radius > static_cast<double>(s.width - 1) ||
        s.mp_center.y + s.mp_radius > static_cast<double>(s.height - 1)) {
        throw InvalidParameter("melt pool must lie inside the image");
    }
    if (s.spatter_count < 0) throw InvalidParameter("spatter count must be >= 0");
    if (s.spatter_radius_min < 1 || s.spatter_radius_max < s.spatter_radius_min) {
        throw InvalidParameter("spatter radius range must satisfy 1 <= min <= max");
    }
    if (s.spatter_intensity_min < 0 || s.spatter_intensity_max > 255 ||
        s.spatter_intensity_max < s.spatter_intensity_min) {
        throw InvalidParameter("spatter intensity range must lie in [0,255]");
    }
    if (s.mp_peak_intensity < 0 || s.mp_peak_intensity > 255) throw InvalidParameter("peak intensity out of range");
    if (!(s.background_noise_sigma >= 0.0)) throw InvalidParameter("noise sigma must be >= 0");
    if (!(s.separation_eps > 0.0)) throw InvalidParameter("separation eps must be > 0");
}

}  // namespace detail

/// Renders one off-axis-camera-like frame with its exact label map.
///
/// Intensity = clipped(noise + Gaussian melt pool + spatter disks + flare
/// spots). Labels mark the rendered support of the melt pool (1) and the
/// spatters (2); flare pixels stay background. Spatter placement uses
/// stream 0 of the seed and pixel noise stream 1, so the noise field does
/// not depend on where spatters land.
inline SyntheticFrame synth_frame(const SceneSpec& spec) {
    detail::validate_scene(spec);
    Rng place = Rng::derive(spec.rng_seed, 0);
    Rng noise = Rng::derive(spec.rng_seed, 1);

    const double gap_min = 2.0 * spec.separation_eps;
    std::vector<detail::Disk> flare_spots;
    if (spec.flare) {
        const auto& f = *spec.flare;
        for (int i = 0; i < f.spot_count; ++i) {
            flare_spots.push_back({std::llround(f.column_x), std::llround(f.first_y + i * f.spot_spacing),
                                   f.spot_radius});
        }
    }

    std::vector<detail::Disk> spatters;
    std::vector<int> intensities;
    const int budget = 10 * spec.spatter_count;
    int attempts = 0;
    while (static_cast<int>(spatters.size()) < spec.spatter_count) {
        if (attempts++ >= budget) {
            throw SceneInfeasible("could not place " + std::to_string(spec.spatter_count) + " spatters within " +
                                  std::to_string(budget) + " attempts");
        }
        const int radius = static_cast<int>(place.uniform_int(spec.spatter_radius_min, spec.spatter_radius_max));
        const double dir = deg_to_rad(spec.scan_direction_deg + spec.spatter_angle_mean_deg +
                                      spec.spatter_angle_spread_deg * place.normal());
        const double dmin = spec.mp_radius + gap_min + radius + 1.0;
        const double dist = place.uniform(dmin, std::max(dmin, spec.spatter_max_distance));
        const int intensity =
            static_cast<int>(place.uniform_int(spec.spatter_intensity_min, spec.spatter_intensity_max));
        const detail::Disk d{std::llround(spec.mp_center.x + dist * std::cos(dir)),
                             std::llround(spec.mp_center.y + dist * std::sin(dir)), radius};
        if (!detail::disk_inside(d, spec.width, spec.height)) continue;
        if (detail::disk_gap(d, spec.mp_center.x, spec.mp_center.y, spec.mp_radius) < gap_min) continue;
        bool ok = true;
        for (const auto& o : spatters)
            ok = ok && detail::disk_gap(d, static_cast<double>(o.cx), static_cast<double>(o.cy), o.radius) >= gap_min;
        for (const auto& o : flare_spots)
            ok = ok && detail::disk_gap(d, static_cast<double>(o.cx), static_cast<double>(o.cy), o.radius) >= gap_min;
        if (!ok) continue;
        spatters.push_back(d);
        intensities.push_back(intensity);
    }

    const std::size_t w = spec.width;
    const std::size_t h = spec.height;
    Grid<double> acc(w, h, 0.0);
    LabelMap labels(w, h);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] = spec.background_noise_sigma > 0.0 ? noise.normal(0.0, spec.background_noise_sigma) : 0.0;
    }

    // Melt pool: isotropic Gaussian clipped at 3 sigma.
    const double sigma = spec.mp_radius / 3.0;
    const auto x_lo = static_cast<std::size_t>(std::max(0.0, std::floor(spec.mp_center.x - spec.mp_radius)));
    const auto x_hi = static_cast<std::size_t>(std::min<double>(w - 1, std::ceil(spec.mp_center.x + spec.mp_radius)));
    const auto y_lo = static_cast<std::size_t>(std::max(0.0, std::floor(spec.mp_center.y - spec.mp_radius)));
    const auto y_hi = static_cast<std::size_t>(std::min<double>(h - 1, std::ceil(spec.mp_center.y + spec.mp_radius)));
    double msx = 0, msy = 0;
    std::size_t mcount = 0;
    for (std::size_t y = y_lo; y <= y_hi; ++y) {
        for (std::size_t x = x_lo; x <= x_hi; ++x) {
            const double dx = static_cast<double>(x) - spec.mp_center.x;
            const double dy = static_cast<double>(y) - spec.mp_center.y;
            const double r2 = dx * dx + dy * dy;
            if (r2 > spec.mp_radius * spec.mp_radius) continue;
            acc(x, y) += spec.mp_peak_intensity * std::exp(-r2 / (2.0 * sigma * sigma));
            labels.set(x, y, Label::melt_pool);
            msx += static_cast<double>(x);
            msy += static_cast<double>(y);
            ++mcount;
        }
    }

    auto paint_disk = [&](const detail::Disk& d, int intensity, std::optional<Label> label) {
        double sx = 0, sy = 0;
        std::size_t n = 0;
        for (long long y = d.cy - d.radius; y <= d.cy + d.radius; ++y) {
            for (long long x = d.cx - d.radius; x <= d.cx + d.radius; ++x) {
                if (!acc.contains(x, y)) continue;
                const long long dx = x - d.cx;
                const long long dy = y - d.cy;
                if (dx * dx + dy * dy > static_cast<long long>(d.radius) * d.radius) continue;
                const auto ux = static_cast<std::size_t>(x);
                const auto uy = static_cast<std::size_t>(y);
                acc(ux, uy) += intensity;
                if (label) labels.set(ux, uy, *label);
                sx += static_cast<double>(x);
                sy += static_cast<double>(y);
                ++n;
            }
        }
        return Point2{sx / static_cast<double>(n), sy / static_cast<double>(n)};
    };

    SyntheticFrame out;
    out.truth.mp_center = {msx / static_cast<double>(mcount), msy / static_cast<double>(mcount)};
    for (std::size_t i = 0; i < spatters.size(); ++i) {
        const Point2 c = paint_disk(spatters[i], intensities[i], Label::spatter);
        out.truth.spatter_centroids.push_back(c);
        out.truth.ejection_angles_deg.push_back(ejection_angle(out.truth.mp_center, c, spec.scan_direction_deg));
    }
    if (spec.flare) {
        for (const auto& f : flare_spots) {
            out.truth.flare_spots.push_back(paint_disk(f, spec.flare->spot_intensity, std::nullopt));
        }
    }

    out.frame = Frame(w, h, 0);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        out.frame.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[i]), 0L, 255L));
    }
    out.labels = std::move(labels);
    return out;
}

// ---------------------------------------------------------------------------
// Layer sequences
// ---------------------------------------------------------------------------

/// Seeded per-melt-pool spatter count generator:
///   count = round(max(0, a P + c V + b + bump(hatch) + noise)),
/// with noise ~ N(0, s0 + s1 * mean). a, b, c come from linear fits of the
/// layer-66 power and speed sweeps (a = 0.0188 /W, c = -0.004 per mm/s,
/// b = 1.68). The bump raises spatter for scan angles near bump_center_deg
/// (gas-flow sensitive hatch directions); it is ~0 for a 74 deg hatch.
struct SpatterCountModel {
    double power_coeff = 0.0188;
    double speed_coeff = -0.004;
    double intercept = 1.68;
    double noise_base = 0.6;
    double noise_slope = 0.25;
    double hatch_bump_amplitude = 1.5;
    double hatch_bump_center_deg = 139.0;
    double hatch_bump_width_deg = 12.0;
    int max_count = 12;

    double mean(double power_w, double speed_mm_s, double hatch_angle_deg) const {
        const double a = normalize_hatch_angle(hatch_angle_deg);
        double d = std::abs(a - normalize_hatch_angle(hatch_bump_center_deg));
        d = std::min(d, 180.0 - d);
        const double bump = hatch_bump_amplitude * std::exp(-(d / hatch_bump_width_deg) * (d / hatch_bump_width_deg));
        return power_coeff * power_w + speed_coeff * speed_mm_s + intercept + bump;
    }

    int sample(Rng& rng, double power_w, double speed_mm_s, double hatch_angle_deg) const {
        const double mu = mean(power_w, speed_mm_s, hatch_angle_deg);
        const double sigma = noise_base + noise_slope * std::max(0.0, mu);
        const double v = std::max(0.0, mu + sigma * rng.normal());
        return std::min(max_count, static_cast<int>(std::lround(v)));
    }
};

struct PlateRect {
    double x0 = 0.0;
    double y0 = 0.0;
    double width = 0.0;
    double height = 0.0;
};

struct LayerSceneSpec {
    /// Geometry/appearance template for every frame; spatter_count,
    /// scan_direction_deg and rng_seed are overwritten per frame.
    SceneSpec scene;
    ProcessParameters process;
    double hatch_angle_deg = 0.0;
    PlateRect region_mm;
    double frame_rate_hz = 1000.0;
    double mm_per_pixel = 0.02;
    std::size_t max_frames = 0;  // 0 = whole path
    SpatterCountModel count_model;
    long long layer_index = 0;
    std::uint64_t seed = 0;
};

struct SequenceFrame {
    SyntheticFrame scene;
    long long frame_index = 0;
    Point2 mp_plate_mm;
    double scan_direction_deg = 0.0;
};

struct ScanSample {
    Point2 position_mm;
    double direction_deg = 0.0;
};

/// Melt-pool positions along a serpentine hatch path clipped to the region,
/// one sample per camera frame.
inline std::vector<ScanSample> serpentine_path(const PlateRect& r, double hatch_angle_deg, double hatch_space_mm,
                                               double step_mm, std::size_t max_samples = 0) {
    if (!(r.width >= 0.0) || !(r.height >= 0.0)) throw InvalidParameter("region dimensions must be >= 0");
    if (!(hatch_space_mm > 0.0) || !(step_mm > 0.0)) throw InvalidParameter("hatch space and step must be > 0");
    std::vector<ScanSample> out;
    if (r.width == 0.0 || r.height == 0.0) return out;
    const double th = deg_to_rad(hatch_angle_deg);
    const Point2 u{std::cos(th), std::sin(th)};
    const Point2 n{-u.y, u.x};
    const Point2 corners[4] = {{r.x0, r.y0}, {r.x0 + r.width, r.y0}, {r.x0, r.y0 + r.height},
                               {r.x0 + r.width, r.y0 + r.height}};
    double smin = 1e300, smax = -1e300;
    for (const auto& c : corners) {
        const double s = c.x * n.x + c.y * n.y;
        smin = std::min(smin, s);
        smax = std::max(smax, s);
    }
    std::size_t line = 0;
    for (double s = smin + 0.5 * hatch_space_mm; s < smax; s += hatch_space_mm, ++line) {
        // Liang-Barsky clip of the infinite line p(t) = s*n + t*u.
        const Point2 base{s * n.x, s * n.y};
        double t0 = -1e300, t1 = 1e300;
        auto clip = [&](double p, double q) {
            if (std::abs(p) < 1e-15) return q >= 0.0;
            const double t = q / p;
            if (p < 0) t0 = std::max(t0, t);
            else t1 = std::min(t1, t);
            return true;
        };
        if (!clip(-u.x, base.x - r.x0) || !clip(u.x, r.x0 + r.width - base.x) || !clip(-u.y, base.y - r.y0) ||
            !clip(u.y, r.y0 + r.height - base.y) || t0 > t1) {
            continue;
        }
        const bool forward = line % 2 == 0;
        const double dir = forward ? hatch_angle_deg : hatch_angle_deg + 180.0;
        const auto steps = static_cast<std::size_t>(std::floor((t1 - t0) / step_mm));
        for (std::size_t k = 0; k <= steps; ++k) {
            const double t = forward ? t0 + k * step_mm : t1 - k * step_mm;
            out.push_back({{base.x + t * u.x, base.y + t * u.y}, wrap_degrees_360(dir)});
            if (max_samples && out.size() >= max_samples) return out;
        }
    }
    return out;
}

/// One synthetic frame per melt-pool sample along the hatch path. Each frame
/// is a region of interest centred on the melt pool; its pixel-to-plate
/// homography places the ROI at the sample position.
inline std::vector<SequenceFrame> synth_layer_sequence(const LayerSceneSpec& layer) {
    const double step = layer.process.scan_speed_mm_s / layer.frame_rate_hz;
    const auto path = serpentine_path(layer.region_mm, layer.hatch_angle_deg, layer.process.hatch_space_mm, step,
                                      layer.max_frames);
    std::vector<SequenceFrame> out;
    out.reserve(path.size());
    const double s = layer.mm_per_pixel;
    for (std::size_t i = 0; i < path.size(); ++i) {
        Rng count_rng = Rng::derive(layer.seed, 2 * i);
        SceneSpec scene = layer.scene;
        scene.scan_direction_deg = path[i].direction_deg;
        scene.spatter_count = layer.count_model.sample(count_rng, layer.process.power_w,
                                                       layer.process.scan_speed_mm_s, layer.hatch_angle_deg);
        scene.rng_seed = Rng::derive(layer.seed, 2 * i + 1).next_u64();
        SequenceFrame f;
        f.scene = synth_frame(scene);
        f.frame_index = static_cast<long long>(i);
        f.mp_plate_mm = path[i].position_mm;
        f.scan_direction_deg = path[i].direction_deg;
        const Point2 c = f.scene.truth.mp_center;
        f.scene.frame.meta.frame_index = f.frame_index;
        f.scene.frame.meta.timestamp_s = static_cast<double>(i) / layer.frame_rate_hz;
        f.scene.frame.meta.pixel_to_plate =
            Homography::scale_translation(s, s, f.mp_plate_mm.x - s * c.x, f.mp_plate_mm.y - s * c.y);
        out.push_back(std::move(f));
    }
    return out;
}

inline nlohmann::json to_json(const GroundTruth& gt) {
    nlohmann::json j;
    j["mp_center"] = {gt.mp_center.x, gt.mp_center.y};
    j["spatter_count"] = gt.spatter_count();
    auto& cs = j["spatter_centroids"] = nlohmann::json::array();
    for (const auto& c : gt.spatter_centroids) cs.push_back({c.x, c.y});
    j["ejection_angles_deg"] = gt.ejection_angles_deg;
    auto& fs = j["flare_spots"] = nlohmann::json::array();
    for (const auto& c : gt.flare_spots) fs.push_back({c.x, c.y});
    return j;
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    GroundTruth gt;
    gt.mp_center = {j.at("mp_center").at(0).get<double>(), j.at("mp_center").at(1).get<double>()};
    for (const auto& c : j.at("spatter_centroids")) gt.spatter_centroids.push_back({c.at(0), c.at(1)});
    gt.ejection_angles_deg = j.at("ejection_angles_deg").get<std::vector<double>>();
    if (j.contains("flare_spots"))
        for (const auto& c : j.at("flare_spots")) gt.flare_spots.push_back({c.at(0), c.at(1)});
    if (gt.ejection_angles_deg.size() != gt.spatter_centroids.size() ||
        j.at("spatter_count").get<std::size_t>() != gt.spatter_centroids.size()) {
        throw FormatError("ground truth count, centroids and angles disagree");
    }
    return gt;
}

}  // namespace spatter
