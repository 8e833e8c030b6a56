#pragma once

#include <cmath>

#include "spatter/core_model.hpp"
#include "spatter/errors.hpp"
#include "spatter/grid.hpp"

namespace spatter {

/// Wraps any angle into [0, 360).
inline double wrap_degrees_360(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) r += 360.0;
    if (r >= 360.0) r -= 360.0;
    return r;
}

/// Counter-clockwise angle (in the frame's own x/y axes) from the scan
/// direction to the displacement spatter - melt pool, in [0, 360).
/// 0 is straight ahead of the laser, 180 directly behind it.
inline double ejection_angle(Point2 mp_center, Point2 spatter_centroid, double scan_direction_deg) {
    const double dx = spatter_centroid.x - mp_center.x;
    const double dy = spatter_centroid.y - mp_center.y;
    if (dx == 0.0 && dy == 0.0) throw UndefinedAngle("spatter centroid coincides with melt-pool centre");
    return wrap_degrees_360(rad_to_deg(std::atan2(dy, dx)) - scan_direction_deg);
}

}  // namespace spatter
