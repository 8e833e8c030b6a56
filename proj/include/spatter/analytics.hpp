#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spatter/core_model.hpp"
#include "spatter/csv.hpp"
#include "spatter/errors.hpp"
#include "spatter/frame_synth.hpp"
#include "spatter/registration.hpp"
#include "spatter/rng.hpp"

namespace spatter {

/// One (bar, layer) observation: process inputs, registered spatter count and
/// measured roughness.
struct LayerFeatureRecord {
    std::string bar_id;
    long long layer_index = 0;
    double power_w = 0.0;
    double speed_mm_s = 0.0;
    double hatch_space_mm = 0.0;
    double ved_j_mm3 = 0.0;
    double hatch_angle_deg = 0.0;
    double mean_spatter_count = 0.0;
    double sa_um = 0.0;
    double sa_std_um = 0.0;  // population std of height deviation (error bar)
};

/// Throws InvalidParameter when ved disagrees with (P, V, HS, t) by more
/// than rel_tol.
inline void check_ved_consistency(const LayerFeatureRecord& r, double layer_thickness_mm = 0.04,
                                  double rel_tol = 0.005) {
    const double ved = compute_ved({r.power_w, r.speed_mm_s, r.hatch_space_mm, layer_thickness_mm});
    if (std::abs(ved - r.ved_j_mm3) > rel_tol * std::abs(ved)) {
        throw InvalidParameter("record " + r.bar_id + "/L" + std::to_string(r.layer_index) + ": ved " +
                               csv::fmt(r.ved_j_mm3) + " inconsistent with process parameters (" + csv::fmt(ved) +
                               ")");
    }
}

// ---------------------------------------------------------------------------
// Fits and metrics
// ---------------------------------------------------------------------------

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = slope x + intercept. R^2 = 1 - SSres/SStot;
/// a constant y (SStot = 0) is fitted exactly and reports R^2 = 1.
inline LinearFit linfit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("linfit: x and y lengths differ");
    const std::size_t n = x.size();
    if (n < 2) throw DegenerateInput("linfit needs at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double scale = std::max(1.0, std::abs(mx));
    if (!(sxx > 1e-24 * scale * scale * static_cast<double>(n))) throw DegenerateInput("linfit: x values are all equal");
    LinearFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return f;
}

struct PredictionMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    /// Undefined (nullopt) when any truth value is zero.
    std::optional<double> mre_percent;
    std::size_t zero_truth = 0;
};

inline PredictionMetrics prediction_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw DimensionMismatch("prediction and truth lengths differ");
    if (pred.empty()) throw DegenerateInput("prediction_metrics needs at least one value");
    const double n = static_cast<double>(pred.size());
    double se = 0.0, ae = 0.0, re = 0.0;
    PredictionMetrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        se += e * e;
        ae += std::abs(e);
        if (truth[i] == 0.0) {
            ++m.zero_truth;
        } else {
            re += std::abs(e) / std::abs(truth[i]);
        }
    }
    m.rmse = std::sqrt(se / n);
    m.mae = ae / n;
    if (m.zero_truth == 0) m.mre_percent = 100.0 * re / n;
    return m;
}

struct RegimePoint {
    std::string bar_id;
    long long layer_index = 0;
    double ved_j_mm3 = 0.0;
    double sa_um = 0.0;
    double sa_std_um = 0.0;
};

/// Records sorted by VED (ties by bar id) for the roughness-vs-energy curve.
inline std::vector<RegimePoint> regime_curve(std::span<const LayerFeatureRecord> records) {
    std::vector<RegimePoint> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.bar_id, r.layer_index, r.ved_j_mm3, r.sa_um, r.sa_std_um});
    std::stable_sort(out.begin(), out.end(), [](const RegimePoint& a, const RegimePoint& b) {
        if (a.ved_j_mm3 != b.ved_j_mm3) return a.ved_j_mm3 < b.ved_j_mm3;
        return a.bar_id < b.bar_id;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Fixture tables
// ---------------------------------------------------------------------------

struct ProcessTableRow {
    int sample = 0;
    ProcessParameters process;
    double sed_j_mm2 = 0.0;
    double ved_j_mm3 = 0.0;
    std::string regime;
};

inline std::vector<ProcessTableRow> load_process_table(const std::filesystem::path& path,
                                                       double layer_thickness_mm = 0.04) {
    const auto t = csv::read(path);
    std::vector<ProcessTableRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        ProcessTableRow r;
        r.sample = static_cast<int>(t.number(i, "sample"));
        r.process = ProcessParameters::from_table_units(t.number(i, "power_w"), t.number(i, "velocity_m_s"),
                                                        t.number(i, "hatch_um"), layer_thickness_mm * 1000.0);
        r.sed_j_mm2 = t.number(i, "sed_j_mm2");
        r.ved_j_mm3 = t.number(i, "ved_j_mm3");
        r.regime = t.text(i, "regime");
        rows.push_back(r);
    }
    return rows;
}

struct HatchTableRow {
    long long layer_index = 0;
    double hatch_angle_deg = 0.0;       // as scheduled
    double calibrated_angle_deg = 0.0;  // folded into [0, 180)
    double mean_spatter_count = 0.0;
    double mean_sa_um = 0.0;
};

inline std::vector<HatchTableRow> load_hatch_table(const std::filesystem::path& path) {
    const auto t = csv::read(path);
    std::vector<HatchTableRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        rows.push_back({static_cast<long long>(t.number(i, "layer")), t.number(i, "hatch_angle_deg"),
                        t.number(i, "calibrated_angle_deg"), t.number(i, "avg_spatter_per_mp"),
                        t.number(i, "avg_sa_um")});
    }
    return rows;
}

/// Per-layer means of count and Sa, ordered by layer.
inline std::vector<HatchTableRow> hatch_table(std::span<const LayerFeatureRecord> records) {
    struct Acc {
        double angle = 0.0, count = 0.0, sa = 0.0;
        std::size_t n = 0;
    };
    std::map<long long, Acc> by_layer;
    for (const auto& r : records) {
        auto& a = by_layer[r.layer_index];
        a.angle = r.hatch_angle_deg;
        a.count += r.mean_spatter_count;
        a.sa += r.sa_um;
        ++a.n;
    }
    std::vector<HatchTableRow> out;
    for (const auto& [layer, a] : by_layer) {
        const double n = static_cast<double>(a.n);
        out.push_back({layer, a.angle, normalize_hatch_angle(a.angle), a.count / n, a.sa / n});
    }
    return out;
}

/// Two-column (x, y) table, e.g. power vs mean spatter count.
inline std::pair<std::vector<double>, std::vector<double>> load_xy(const std::filesystem::path& path,
                                                                   const std::string& x_col, const std::string& y_col) {
    const auto t = csv::read(path);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        x.push_back(t.number(i, x_col));
        y.push_back(t.number(i, y_col));
    }
    return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------
// Feature records CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kFeatureColumns[] = {"bar_id",          "layer",          "power_w",
                                                  "speed_mm_s",      "hatch_space_mm", "ved_j_mm3",
                                                  "hatch_angle_deg", "mean_spatter_count", "sa_um"};

inline std::string features_to_csv(std::span<const LayerFeatureRecord> records) {
    std::string s = "bar_id,layer,power_w,speed_mm_s,hatch_space_mm,ved_j_mm3,hatch_angle_deg,mean_spatter_count,sa_um,"
                    "sa_std_um\n";
    for (const auto& r : records) {
        s += r.bar_id + ',' + std::to_string(r.layer_index) + ',' + csv::fmt(r.power_w) + ',' + csv::fmt(r.speed_mm_s) +
             ',' + csv::fmt(r.hatch_space_mm) + ',' + csv::fmt(r.ved_j_mm3) + ',' + csv::fmt(r.hatch_angle_deg) + ',' +
             csv::fmt(r.mean_spatter_count) + ',' + csv::fmt(r.sa_um) + ',' + csv::fmt(r.sa_std_um) + '\n';
    }
    return s;
}

/// Reads feature records; sa_std_um is optional. A missing required column
/// throws FormatError naming it.
inline std::vector<LayerFeatureRecord> read_features_csv(const std::filesystem::path& path) {
    const auto t = csv::read(path);
    for (const char* c : kFeatureColumns) (void)t.column(c);
    const bool has_std = t.has("sa_std_um");
    std::vector<LayerFeatureRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        LayerFeatureRecord r;
        r.bar_id = t.text(i, "bar_id");
        r.layer_index = static_cast<long long>(t.number(i, "layer"));
        r.power_w = t.number(i, "power_w");
        r.speed_mm_s = t.number(i, "speed_mm_s");
        r.hatch_space_mm = t.number(i, "hatch_space_mm");
        r.ved_j_mm3 = t.number(i, "ved_j_mm3");
        r.hatch_angle_deg = t.number(i, "hatch_angle_deg");
        r.mean_spatter_count = t.number(i, "mean_spatter_count");
        r.sa_um = t.number(i, "sa_um");
        r.sa_std_um = has_std ? t.number(i, "sa_std_um") : 0.0;
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

/// Roughness = U-shaped function of VED + count slope * spatter count + noise.
struct SyntheticDatasetSpec {
    std::vector<int> bars{2, 4, 6, 8, 10, 12};
    std::vector<long long> layers{66, 67, 68, 69, 72, 75};
    HatchSchedule hatch{74.0, 67.0, 66};
    double layer_thickness_mm = 0.04;
    SpatterCountModel count_model;
    double count_noise = 0.5;      // std of the layer-mean count around the model
    double sa_floor_um = 6.0;      // U-curve minimum
    double sa_ved_opt = 70.0;      // J/mm^3 at the minimum
    double sa_curvature = 8.0;     // um per (VED / ved_scale)^2
    double sa_ved_scale = 50.0;
    double sa_count_slope = 4.0;   // um per spatter
    double sa_noise_um = 0.3;
    std::uint64_t seed = 0;
};

inline double synthetic_sa_mean(const SyntheticDatasetSpec& s, double ved, double count) {
    const double u = (ved - s.sa_ved_opt) / s.sa_ved_scale;
    return s.sa_floor_um + s.sa_curvature * u * u + s.sa_count_slope * count;
}

/// Process rows must contain every requested bar.
inline std::vector<LayerFeatureRecord> synth_feature_dataset(const SyntheticDatasetSpec& s,
                                                             std::span<const ProcessTableRow> process_table) {
    std::vector<LayerFeatureRecord> out;
    Rng rng(s.seed);
    for (long long layer : s.layers) {
        const double angle = hatch_angle_for_layer(s.hatch, layer);
        for (int bar : s.bars) {
            auto it = std::find_if(process_table.begin(), process_table.end(),
                                   [&](const ProcessTableRow& r) { return r.sample == bar; });
            if (it == process_table.end()) throw InvalidParameter("bar " + std::to_string(bar) + " not in process table");
            ProcessParameters p = it->process;
            p.layer_thickness_mm = s.layer_thickness_mm;
            LayerFeatureRecord r;
            r.bar_id = std::to_string(bar);
            r.layer_index = layer;
            r.power_w = p.power_w;
            r.speed_mm_s = p.scan_speed_mm_s;
            r.hatch_space_mm = p.hatch_space_mm;
            r.ved_j_mm3 = compute_ved(p);
            r.hatch_angle_deg = angle;
            const double mu = s.count_model.mean(p.power_w, p.scan_speed_mm_s, angle);
            r.mean_spatter_count = std::max(0.0, mu + s.count_noise * rng.normal());
            r.sa_um = synthetic_sa_mean(s, r.ved_j_mm3, r.mean_spatter_count) + s.sa_noise_um * rng.normal();
            r.sa_std_um = 1.25 * r.sa_um;
            out.push_back(std::move(r));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace svg {

struct Series {
    std::string name;
    std::vector<double> x, y;
    bool line = false;
};

struct Plot {
    std::string title, x_label, y_label;
    std::vector<Series> series;
};

inline const char* color(std::size_t i) {
    static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return palette[i % 8];
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Minimal deterministic scatter/line chart.
inline std::string render(const Plot& p) {
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 60;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& s : p.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (first) { x0 = x1 = s.x[i]; y0 = y1 = s.y[i]; first = false; }
            x0 = std::min(x0, s.x[i]); x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]); y1 = std::max(y1, s.y[i]);
        }
    }
    if (x1 - x0 < 1e-12) { x0 -= 1; x1 += 1; }
    if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
    const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
    x0 -= px; x1 += px; y0 -= py; y1 += py;
    auto sx = [&](double v) { return csv::fmt(L + (v - x0) / (x1 - x0) * (W - L - R), 6); };
    auto sy = [&](double v) { return csv::fmt(H - B - (v - y0) / (y1 - y0) * (H - T - B), 6); };
    std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
    o += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    o += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(p.title) + "</text>\n";
    o += "<line x1=\"70\" y1=\"360\" x2=\"620\" y2=\"360\" stroke=\"black\"/>\n";
    o += "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"360\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double vx = x0 + (x1 - x0) * k / 4.0;
        const double vy = y0 + (y1 - y0) * k / 4.0;
        o += "<text x=\"" + sx(vx) + "\" y=\"376\" text-anchor=\"middle\" font-size=\"10\">" + csv::fmt(vx, 4) +
             "</text>\n";
        o += "<text x=\"64\" y=\"" + sy(vy) + "\" text-anchor=\"end\" font-size=\"10\">" + csv::fmt(vy, 4) +
             "</text>\n";
    }
    o += "<text x=\"345\" y=\"400\" text-anchor=\"middle\" font-size=\"12\">" + escape(p.x_label) + "</text>\n";
    o += "<text x=\"16\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 200)\">" +
         escape(p.y_label) + "</text>\n";
    for (std::size_t si = 0; si < p.series.size(); ++si) {
        const auto& s = p.series[si];
        const char* c = color(si);
        if (s.line && s.x.size() > 1) {
            o += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) o += (i ? " " : "") + sx(s.x[i]) + "," + sy(s.y[i]);
            o += "\"/>\n";
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            o += "<circle cx=\"" + sx(s.x[i]) + "\" cy=\"" + sy(s.y[i]) + "\" r=\"3\" fill=\"" + c + "\"/>\n";
        }
        o += "<text x=\"" + csv::fmt(W - R - 4, 6) + "\" y=\"" + csv::fmt(T + 14 + 14 * si, 6) +
             "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + c + "\">" + escape(s.name) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

}  // namespace svg

struct NamedFit {
    std::string name;
    std::string x_label, y_label;
    std::vector<double> x, y;
};

struct ReportInputs {
    std::vector<LayerFeatureRecord> records;
    /// When empty, the hatch table is aggregated from records.
    std::vector<HatchTableRow> hatch_rows;
    std::vector<NamedFit> fits;
    std::vector<LayerSignatureMap> signatures;
    std::vector<double> angle_bin_edges = uniform_edges(0.0, 360.0, 30.0);
};

/// Writes CSV tables and SVG plots into `dir`; returns the file names
/// written, in order. Output bytes depend only on the inputs.
inline std::vector<std::string> emit_report(const std::filesystem::path& dir, const ReportInputs& in) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create report directory " + dir.string());
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& text) {
        csv::write_text(dir / name, text);
        written.push_back(name);
    };

    const auto curve = regime_curve(in.records);
    {
        std::string s = "layer,bar_id,ved_j_mm3,sa_um,sa_std_um\n";
        std::map<long long, svg::Series> per_layer;
        for (const auto& p : curve) {
            s += std::to_string(p.layer_index) + ',' + p.bar_id + ',' + csv::fmt(p.ved_j_mm3) + ',' + csv::fmt(p.sa_um) +
                 ',' + csv::fmt(p.sa_std_um) + '\n';
            auto& ser = per_layer[p.layer_index];
            ser.name = "L" + std::to_string(p.layer_index);
            ser.line = true;
            ser.x.push_back(p.ved_j_mm3);
            ser.y.push_back(p.sa_um);
        }
        put("regime_curve.csv", s);
        svg::Plot plot{"Layer roughness vs volumetric energy density", "VED (J/mm^3)", "Sa (um)", {}};
        for (auto& [layer, ser] : per_layer) plot.series.push_back(std::move(ser));
        put("regime_curve.svg", svg::render(plot));
    }

    {
        const auto rows = in.hatch_rows.empty() ? hatch_table(in.records) : in.hatch_rows;
        std::string s = "layer,hatch_angle_deg,calibrated_angle_deg,avg_spatter_per_mp,avg_sa_um\n";
        svg::Series counts{"spatters per MP", {}, {}, false};
        svg::Series sa{"Sa (um)", {}, {}, false};
        for (const auto& r : rows) {
            s += std::to_string(r.layer_index) + ',' + csv::fmt(r.hatch_angle_deg) + ',' +
                 csv::fmt(r.calibrated_angle_deg) + ',' + csv::fmt(r.mean_spatter_count) + ',' +
                 csv::fmt(r.mean_sa_um) + '\n';
            counts.x.push_back(r.calibrated_angle_deg);
            counts.y.push_back(r.mean_spatter_count);
            sa.x.push_back(r.calibrated_angle_deg);
            sa.y.push_back(r.mean_sa_um);
        }
        put("hatch_table.csv", s);
        put("hatch_counts.svg", svg::render({"Spatter count vs hatch angle", "hatch angle (deg)", "spatters per MP",
                                             {std::move(counts)}}));
        put("hatch_roughness.svg",
            svg::render({"Roughness vs hatch angle", "hatch angle (deg)", "Sa (um)", {std::move(sa)}}));
    }

    {
        std::string s = "name,slope,intercept,r_squared,n\n";
        for (const auto& f : in.fits) {
            const LinearFit lf = linfit(f.x, f.y);
            s += f.name + ',' + csv::fmt(lf.slope) + ',' + csv::fmt(lf.intercept) + ',' + csv::fmt(lf.r_squared) + ',' +
                 std::to_string(lf.n) + '\n';
            const auto [lo, hi] = std::minmax_element(f.x.begin(), f.x.end());
            svg::Series pts{"data", f.x, f.y, false};
            svg::Series line{"fit R^2=" + csv::fmt(lf.r_squared, 4),
                             {*lo, *hi},
                             {lf.slope * *lo + lf.intercept, lf.slope * *hi + lf.intercept},
                             true};
            put("fit_" + f.name + ".svg", svg::render({f.name, f.x_label, f.y_label, {std::move(pts), std::move(line)}}));
        }
        put("fits.csv", s);
    }

    {
        std::string s = "layer,frame,mp_x_mm,mp_y_mm,count\n";
        std::vector<double> angles;
        svg::Plot plot{"Registered spatter count per melt pool", "x (mm)", "y (mm)", {}};
        std::map<int, svg::Series> by_count;
        for (const auto& m : in.signatures) {
            for (const auto& o : m.observations) {
                s += std::to_string(m.layer_index) + ',' + std::to_string(o.frame_index) + ',' +
                     csv::fmt(o.mp_center_mm.x) + ',' + csv::fmt(o.mp_center_mm.y) + ',' +
                     std::to_string(o.spatter_count) + '\n';
                auto& ser = by_count[o.spatter_count];
                ser.name = std::to_string(o.spatter_count) + " spatters";
                ser.x.push_back(o.mp_center_mm.x);
                ser.y.push_back(o.mp_center_mm.y);
                angles.insert(angles.end(), o.ejection_angles_deg.begin(), o.ejection_angles_deg.end());
            }
        }
        put("signature_points.csv", s);
        if (!in.signatures.empty()) {
            for (auto& [c, ser] : by_count) plot.series.push_back(std::move(ser));
            put("signature_map.svg", svg::render(plot));
            const auto hist = histogram(angles, in.angle_bin_edges);
            std::string hs = "bin_lo,bin_hi,count\n";
            svg::Series bars{"ejection angle", {}, {}, true};
            for (std::size_t i = 0; i < hist.counts.size(); ++i) {
                hs += csv::fmt(hist.edges[i]) + ',' + csv::fmt(hist.edges[i + 1]) + ',' +
                      std::to_string(hist.counts[i]) + '\n';
                bars.x.push_back(0.5 * (hist.edges[i] + hist.edges[i + 1]));
                bars.y.push_back(static_cast<double>(hist.counts[i]));
            }
            put("angle_histogram.csv", hs);
            put("angle_histogram.svg",
                svg::render({"Spatter ejection angle", "angle (deg)", "count", {std::move(bars)}}));
        }
    }
    return written;
}

}  // namespace spatter
