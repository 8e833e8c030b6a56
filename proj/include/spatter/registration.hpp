#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatter/angles.hpp"
#include "spatter/csv.hpp"
#include "spatter/errors.hpp"
#include "spatter/grid.hpp"
#include "spatter/homography.hpp"
#include "spatter/image.hpp"
#include "spatter/imaging.hpp"
#include "spatter/parallel.hpp"
#include "spatter/segmentation.hpp"

namespace spatter {

// ---------------------------------------------------------------------------
// DBSCAN
// ---------------------------------------------------------------------------

struct DbscanParams {
    double eps = 3.0;
    int min_pts = 2;
};

struct DbscanResult {
    /// Clusters in creation order; indices ascending within each cluster.
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<std::size_t> noise;
};

namespace detail {

/// Uniform bucket grid with cell size eps for radius queries.
class NeighborIndex {
public:
    NeighborIndex(std::span<const Point2> pts, double eps) : pts_(pts), eps_(eps) {
        for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell(pts[i].x), cell(pts[i].y))].push_back(i);
    }

    /// All points within eps (inclusive), self included, ascending order.
    void query(std::size_t i, std::vector<std::size_t>& out) const {
        out.clear();
        const long long cx = cell(pts_[i].x);
        const long long cy = cell(pts_[i].y);
        const double eps2 = eps_ * eps_;
        for (long long dy = -1; dy <= 1; ++dy) {
            for (long long dx = -1; dx <= 1; ++dx) {
                auto it = cells_.find(key(cx + dx, cy + dy));
                if (it == cells_.end()) continue;
                for (std::size_t j : it->second) {
                    const double ddx = pts_[j].x - pts_[i].x;
                    const double ddy = pts_[j].y - pts_[i].y;
                    if (ddx * ddx + ddy * ddy <= eps2) out.push_back(j);
                }
            }
        }
        // Distinct cells can share a hash bucket; drop repeated hits.
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }

private:
    long long cell(double v) const { return static_cast<long long>(std::floor(v / eps_)); }
    static std::uint64_t key(long long x, long long y) {
        return (static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL) ^ static_cast<std::uint64_t>(y);
    }

    std::span<const Point2> pts_;
    double eps_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace detail

/// Density-based clustering, Euclidean metric.
///
/// A point is core when at least min_pts points (itself included) lie within
/// eps. Points are scanned in input order; each unassigned core point opens a
/// new cluster that is grown breadth-first. A border point joins the first
/// cluster that reaches it.
inline DbscanResult dbscan(std::span<const Point2> points, const DbscanParams& params) {
    if (!(params.eps > 0.0)) throw InvalidParameter("eps must be > 0");
    if (params.min_pts < 1) throw InvalidParameter("min_pts must be >= 1");
    DbscanResult out;
    const std::size_t n = points.size();
    if (n == 0) return out;

    constexpr int unassigned = -1;
    std::vector<int> cluster_of(n, unassigned);
    std::vector<char> is_core(n, 0);
    std::vector<std::vector<std::size_t>> nbrs(n);
    detail::NeighborIndex index(points, params.eps);
    for (std::size_t i = 0; i < n; ++i) {
        index.query(i, nbrs[i]);
        is_core[i] = nbrs[i].size() >= static_cast<std::size_t>(params.min_pts);
    }

    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (cluster_of[i] != unassigned || !is_core[i]) continue;
        const int id = static_cast<int>(out.clusters.size());
        out.clusters.emplace_back();
        cluster_of[i] = id;
        frontier.assign(1, i);
        while (!frontier.empty()) {
            const std::size_t p = frontier.front();
            frontier.pop_front();
            out.clusters.back().push_back(p);
            if (!is_core[p]) continue;
            for (std::size_t q : nbrs[p]) {
                if (cluster_of[q] != unassigned) continue;
                cluster_of[q] = id;
                frontier.push_back(q);
            }
        }
        std::sort(out.clusters.back().begin(), out.clusters.back().end());
    }
    for (std::size_t i = 0; i < n; ++i)
        if (cluster_of[i] == unassigned) out.noise.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------
// Per-frame signatures
// ---------------------------------------------------------------------------

/// Centroid of the largest 8-connected melt-pool component; ties go to the
/// component whose first pixel comes first in raster order.
inline Point2 extract_mp_center(const LabelMap& lm) {
    const auto cc = connected_components(lm.mask(Label::melt_pool), 8);
    if (cc.components.empty()) throw NoMeltPool("label map has no melt-pool pixels");
    const Component* best = &cc.components.front();
    for (const auto& c : cc.components)
        if (c.area > best->area) best = &c;
    return best->centroid;
}

struct SpatterCount {
    std::size_t count = 0;
    std::vector<Point2> centroids;
    /// Clusters dropped because they touch melt-pool pixels.
    std::size_t overlapping_mp = 0;
};

/// DBSCAN over spatter pixels. Clusters touching a melt-pool pixel
/// (8-neighbourhood) are not counted; noise points never are.
inline SpatterCount count_spatters(const LabelMap& lm, const DbscanParams& params = {}) {
    std::vector<Point2> pts;
    for (std::size_t y = 0; y < lm.height(); ++y)
        for (std::size_t x = 0; x < lm.width(); ++x)
            if (lm.at(x, y) == Label::spatter) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
    SpatterCount out;
    if (pts.empty()) return out;
    const auto res = dbscan(pts, params);
    auto touches_mp = [&](const Point2& p) {
        const auto x = static_cast<long long>(p.x);
        const auto y = static_cast<long long>(p.y);
        for (long long dy = -1; dy <= 1; ++dy)
            for (long long dx = -1; dx <= 1; ++dx)
                if (lm.grid().contains(x + dx, y + dy) &&
                    lm.at(static_cast<std::size_t>(x + dx), static_cast<std::size_t>(y + dy)) == Label::melt_pool)
                    return true;
        return false;
    };
    for (const auto& cluster : res.clusters) {
        double sx = 0, sy = 0;
        bool overlap = false;
        for (auto i : cluster) {
            sx += pts[i].x;
            sy += pts[i].y;
            overlap = overlap || touches_mp(pts[i]);
        }
        if (overlap) {
            ++out.overlapping_mp;
            continue;
        }
        const auto n = static_cast<double>(cluster.size());
        out.centroids.push_back({sx / n, sy / n});
    }
    out.count = out.centroids.size();
    return out;
}

// ---------------------------------------------------------------------------
// Layer registration
// ---------------------------------------------------------------------------

struct MPObservation {
    long long frame_index = 0;
    Point2 mp_center_px;
    Point2 mp_center_mm;
    std::size_t spatter_count = 0;
    std::vector<Point2> spatter_centroids_px;
    std::vector<double> ejection_angles_deg;
    double scan_direction_deg = 0.0;
};

struct SkippedFrame {
    long long frame_index = 0;
    std::string reason;
};

struct LayerAggregates {
    double mean_count = 0.0;
    double std_count = 0.0;  // population
};

struct LayerSignatureMap {
    static constexpr int schema_version = 1;

    long long layer_index = 0;
    std::vector<MPObservation> observations;  // ascending frame_index
    std::vector<SkippedFrame> skipped;
    std::optional<LayerAggregates> aggregates;
};

/// Mean and population standard deviation of the per-melt-pool counts.
inline LayerAggregates layer_aggregate(const LayerSignatureMap& map) {
    if (map.observations.empty()) throw DegenerateInput("layer signature map has no observations");
    double sum = 0.0;
    for (const auto& o : map.observations) sum += static_cast<double>(o.spatter_count);
    const double n = static_cast<double>(map.observations.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& o : map.observations) {
        const double d = static_cast<double>(o.spatter_count) - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / n)};
}

/// One monitored melt-pool frame. Either the raw frame (segmented by the
/// registration segmenter) or an already segmented label map.
struct RegistrationInput {
    long long frame_index = 0;
    std::variant<Frame, LabelMap> image;
    Homography pixel_to_plate;
    double scan_direction_deg = 0.0;
};

struct RegistrationOptions {
    DbscanParams dbscan;
    /// Used for inputs that carry a raw Frame; required if any do.
    const Segmenter* segmenter = nullptr;
    std::size_t jobs = 1;
};

namespace detail {

inline std::variant<MPObservation, SkippedFrame> register_one(const RegistrationInput& in,
                                                               const RegistrationOptions& opt) {
    try {
        LabelMap lm;
        if (const auto* f = std::get_if<Frame>(&in.image)) {
            if (!opt.segmenter) throw InvalidParameter("raw frame given but no segmenter configured");
            lm = opt.segmenter->segment(*f);
        } else {
            lm = std::get<LabelMap>(in.image);
        }
        MPObservation obs;
        obs.frame_index = in.frame_index;
        obs.scan_direction_deg = in.scan_direction_deg;
        obs.mp_center_px = extract_mp_center(lm);
        obs.mp_center_mm = in.pixel_to_plate.apply(obs.mp_center_px);
        const auto sc = count_spatters(lm, opt.dbscan);
        obs.spatter_count = sc.count;
        obs.spatter_centroids_px = sc.centroids;
        for (const auto& c : sc.centroids) {
            obs.ejection_angles_deg.push_back(ejection_angle(obs.mp_center_px, c, in.scan_direction_deg));
        }
        return obs;
    } catch (const NoMeltPool& e) {
        return SkippedFrame{in.frame_index, e.what()};
    } catch (const UndefinedAngle& e) {
        return SkippedFrame{in.frame_index, e.what()};
    } catch (const DegenerateInput& e) {
        return SkippedFrame{in.frame_index, e.what()};
    }
}

}  // namespace detail

/// Segments (if needed), extracts the melt-pool centre, counts spatters and
/// their ejection angles for every frame, then assembles the layer map in
/// frame order. Frames without a melt pool are recorded as skipped.
inline LayerSignatureMap register_layer(std::span<const RegistrationInput> frames, long long layer_index,
                                        const RegistrationOptions& opt = {}) {
    std::vector<std::variant<MPObservation, SkippedFrame>> results(frames.size());
    parallel_for(frames.size(), opt.jobs, [&](std::size_t i) { results[i] = detail::register_one(frames[i], opt); });

    LayerSignatureMap map;
    map.layer_index = layer_index;
    for (auto& r : results) {
        if (auto* o = std::get_if<MPObservation>(&r)) map.observations.push_back(std::move(*o));
        else map.skipped.push_back(std::get<SkippedFrame>(r));
    }
    std::stable_sort(map.observations.begin(), map.observations.end(),
                     [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
    std::stable_sort(map.skipped.begin(), map.skipped.end(),
                     [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
    if (!map.observations.empty()) map.aggregates = layer_aggregate(map);
    return map;
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;  // bin i covers [edges[i], edges[i+1])
    std::size_t underflow = 0;
    std::size_t overflow = 0;
};

inline Histogram histogram(std::span<const double> values, std::span<const double> bin_edges) {
    if (bin_edges.size() < 2) throw InvalidParameter("histogram needs at least two bin edges");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (!(bin_edges[i] > bin_edges[i - 1])) throw InvalidParameter("bin edges must be strictly increasing");
    Histogram h{{bin_edges.begin(), bin_edges.end()}, std::vector<std::size_t>(bin_edges.size() - 1, 0), 0, 0};
    for (double v : values) {
        if (v < bin_edges.front()) {
            ++h.underflow;
        } else if (!(v < bin_edges.back())) {
            ++h.overflow;
        } else {
            const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
            ++h.counts[static_cast<std::size_t>(it - bin_edges.begin()) - 1];
        }
    }
    return h;
}

/// Edges lo, lo + width, ..., up to and including hi.
inline std::vector<double> uniform_edges(double lo, double hi, double width) {
    if (!(width > 0.0) || !(hi > lo)) throw InvalidParameter("uniform_edges needs hi > lo and width > 0");
    std::vector<double> e;
    const auto n = static_cast<std::size_t>(std::llround(std::ceil((hi - lo) / width - 1e-9)));
    for (std::size_t i = 0; i <= n; ++i) e.push_back(lo + static_cast<double>(i) * width);
    return e;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LayerSignatureMap& m) {
    nlohmann::json j;
    j["schema"] = "spatter.layer_signature_map";
    j["schema_version"] = LayerSignatureMap::schema_version;
    j["layer_index"] = m.layer_index;
    auto& obs = j["observations"] = nlohmann::json::array();
    for (const auto& o : m.observations) {
        nlohmann::json jo;
        jo["frame_index"] = o.frame_index;
        jo["mp_center_px"] = {o.mp_center_px.x, o.mp_center_px.y};
        jo["mp_center_mm"] = {o.mp_center_mm.x, o.mp_center_mm.y};
        jo["spatter_count"] = o.spatter_count;
        auto& cs = jo["spatter_centroids_px"] = nlohmann::json::array();
        for (const auto& c : o.spatter_centroids_px) cs.push_back({c.x, c.y});
        jo["ejection_angles_deg"] = o.ejection_angles_deg;
        jo["scan_direction_deg"] = o.scan_direction_deg;
        obs.push_back(std::move(jo));
    }
    auto& sk = j["skipped"] = nlohmann::json::array();
    for (const auto& s : m.skipped) sk.push_back({{"frame_index", s.frame_index}, {"reason", s.reason}});
    if (m.aggregates) {
        j["aggregates"] = {{"mean_count", m.aggregates->mean_count}, {"std_count", m.aggregates->std_count}};
    } else {
        j["aggregates"] = nullptr;
    }
    return j;
}

inline LayerSignatureMap layer_signature_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != LayerSignatureMap::schema_version) {
        throw FormatError("unsupported layer signature schema version");
    }
    LayerSignatureMap m;
    m.layer_index = j.at("layer_index").get<long long>();
    for (const auto& jo : j.at("observations")) {
        MPObservation o;
        o.frame_index = jo.at("frame_index").get<long long>();
        o.mp_center_px = {jo.at("mp_center_px").at(0), jo.at("mp_center_px").at(1)};
        o.mp_center_mm = {jo.at("mp_center_mm").at(0), jo.at("mp_center_mm").at(1)};
        o.spatter_count = jo.at("spatter_count").get<std::size_t>();
        if (jo.contains("spatter_centroids_px"))
            for (const auto& c : jo.at("spatter_centroids_px")) o.spatter_centroids_px.push_back({c.at(0), c.at(1)});
        o.ejection_angles_deg = jo.at("ejection_angles_deg").get<std::vector<double>>();
        o.scan_direction_deg = jo.value("scan_direction_deg", 0.0);
        if (o.ejection_angles_deg.size() != o.spatter_count) {
            throw FormatError("observation " + std::to_string(o.frame_index) + ": angle count != spatter count");
        }
        m.observations.push_back(std::move(o));
    }
    if (j.contains("skipped"))
        for (const auto& s : j.at("skipped")) m.skipped.push_back({s.at("frame_index"), s.at("reason")});
    std::stable_sort(m.observations.begin(), m.observations.end(),
                     [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
    if (!m.observations.empty()) m.aggregates = layer_aggregate(m);
    return m;
}

/// Flattened rows: layer, frame, mp_x_mm, mp_y_mm, count, angles joined
/// with ';'.
inline std::string signature_to_csv(const LayerSignatureMap& m) {
    std::string s = "layer,frame,mp_x_mm,mp_y_mm,count,angles_deg\n";
    for (const auto& o : m.observations) {
        s += std::to_string(m.layer_index) + ',' + std::to_string(o.frame_index) + ',' + csv::fmt(o.mp_center_mm.x) +
             ',' + csv::fmt(o.mp_center_mm.y) + ',' + std::to_string(o.spatter_count) + ',';
        for (std::size_t i = 0; i < o.ejection_angles_deg.size(); ++i)
            s += (i ? ";" : "") + csv::fmt(o.ejection_angles_deg[i]);
        s += '\n';
    }
    return s;
}

}  // namespace spatter
