#pragma once

#include <cmath>
#include <numbers>

#include "spatter/errors.hpp"

namespace spatter {

// Internal units: W, mm/s, mm, J/mm^2, J/mm^3. Angles are degrees at the
// interface; trigonometry converts to radians locally.

constexpr double kMmPerMeter = 1000.0;
constexpr double kMmPerMicron = 1.0e-3;

constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

struct ProcessParameters {
    double power_w = 0.0;
    double scan_speed_mm_s = 0.0;
    double hatch_space_mm = 0.0;
    double layer_thickness_mm = 0.0;

    /// Table-style units: m/s and micrometres.
    static ProcessParameters from_table_units(double power_w, double speed_m_s,
                                              double hatch_um, double thickness_um) {
        return {power_w, speed_m_s * kMmPerMeter, hatch_um * kMmPerMicron,
                thickness_um * kMmPerMicron};
    }
};

struct EnergyDensities {
    double sed_j_mm2 = 0.0;
    double ved_j_mm3 = 0.0;
};

/// Surface energy density P / (V * HS), J/mm^2.
inline double compute_sed(const ProcessParameters& p) {
    if (!(p.scan_speed_mm_s > 0.0) || !std::isfinite(p.scan_speed_mm_s)) {
        throw InvalidParameter("scan speed must be > 0");
    }
    if (!(p.hatch_space_mm > 0.0) || !std::isfinite(p.hatch_space_mm)) {
        throw InvalidParameter("hatch space must be > 0");
    }
    if (!(p.power_w >= 0.0) || !std::isfinite(p.power_w)) {
        throw InvalidParameter("laser power must be >= 0");
    }
    return p.power_w / (p.scan_speed_mm_s * p.hatch_space_mm);
}

/// Volumetric energy density P / (V * HS * t), J/mm^3.
inline double compute_ved(const ProcessParameters& p) {
    if (!(p.layer_thickness_mm > 0.0) || !std::isfinite(p.layer_thickness_mm)) {
        throw InvalidParameter("layer thickness must be > 0");
    }
    return compute_sed(p) / p.layer_thickness_mm;
}

inline EnergyDensities compute_energy_densities(const ProcessParameters& p) {
    return {compute_sed(p), compute_ved(p)};
}

/// Scan angles 180 deg apart produce the same hatch pattern, so angles are
/// reported in [0, 180). Negative inputs use the mathematical modulus.
inline double normalize_hatch_angle(double angle_deg) {
    double r = std::fmod(angle_deg, 180.0);
    if (r < 0.0) r += 180.0;
    if (r >= 180.0) r -= 180.0;  // fmod of tiny negatives can round up to 180
    return r;
}

struct HatchSchedule {
    double base_angle_deg = 0.0;
    double rotation_per_layer_deg = 67.0;
    /// Layer at which base_angle_deg applies.
    long long base_layer = 0;
};

inline double hatch_angle_for_layer(const HatchSchedule& s, long long layer_index) {
    if (layer_index < 0) throw InvalidParameter("layer index must be >= 0");
    const double steps = static_cast<double>(layer_index - s.base_layer);
    // Reduce the rotation first so large layer counts keep full precision.
    const double rot = std::fmod(s.rotation_per_layer_deg, 360.0);
    const double raw = s.base_angle_deg + std::fmod(rot * steps, 360.0);
    return normalize_hatch_angle(raw);
}

}  // namespace spatter
