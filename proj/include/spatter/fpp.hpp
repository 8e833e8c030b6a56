#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatter/csv.hpp"
#include "spatter/errors.hpp"
#include "spatter/grid.hpp"
#include "spatter/imaging.hpp"
#include "spatter/pgm.hpp"
#include "spatter/rng.hpp"

namespace spatter::fpp {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps into (-pi, pi].
inline double wrap_to_pi(double a) {
    double r = std::remainder(a, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

struct PhaseShiftSchedule {
    std::vector<double> shifts;  // radians

    /// delta_i = 2 pi i / N, i = 0..N-1. N = 3 gives {0, 2pi/3, 4pi/3}.
    static PhaseShiftSchedule uniform(std::size_t n = 3) {
        if (n < 3) throw InvalidParameter("phase shifting needs N >= 3 patterns");
        PhaseShiftSchedule s;
        for (std::size_t i = 0; i < n; ++i) s.shifts.push_back(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
        return s;
    }

    std::size_t size() const noexcept { return shifts.size(); }

    bool balanced(double tol = 1e-12) const {
        double ss = 0, sc = 0;
        for (double d : shifts) { ss += std::sin(d); sc += std::cos(d); }
        return std::abs(ss) < tol && std::abs(sc) < tol;
    }
};

struct FringeStack {
    std::vector<Grid<double>> frames;
    PhaseShiftSchedule schedule;
    /// Display/sensor gamma still present in the intensities (1 = linear).
    double gamma = 1.0;

    std::size_t width() const { return frames.empty() ? 0 : frames.front().width(); }
    std::size_t height() const { return frames.empty() ? 0 : frames.front().height(); }

    void validate() const {
        if (schedule.size() < 3) throw InvalidParameter("phase shifting needs N >= 3 patterns");
        if (frames.size() != schedule.size()) throw DimensionMismatch("frame count differs from schedule length");
        for (const auto& f : frames)
            if (!f.same_shape(frames.front())) throw DimensionMismatch("fringe frames differ in size");
        if (!(gamma > 0.0)) throw InvalidParameter("gamma must be > 0");
    }
};

struct PhaseMap {
    Grid<double> phase;
    Grid<double> modulation;
    Grid<std::uint8_t> valid;

    std::size_t width() const { return phase.width(); }
    std::size_t height() const { return phase.height(); }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid.values()) n += v != 0;
        return n;
    }
};

/// Height in micrometres relative to the powder-bed reference plane;
/// negative below it.
struct HeightMap {
    Grid<double> height_um;
    Grid<std::uint8_t> valid;

    HeightMap() = default;
    HeightMap(std::size_t w, std::size_t h) : height_um(w, h, 0.0), valid(w, h, 1) {}
    explicit HeightMap(Grid<double> h) : height_um(std::move(h)), valid(height_um.width(), height_um.height(), 1) {}

    std::size_t width() const { return height_um.width(); }
    std::size_t height() const { return height_um.height(); }
};

struct Region {
    std::size_t x0 = 0;
    std::size_t y0 = 0;
    std::size_t width = 0;  // 0 = to the image edge
    std::size_t height = 0;
};

struct RoughnessResult {
    double sa_um = 0.0;
    Region region;
    std::size_t n_valid = 0;
    double z_std_um = 0.0;
    double mean_um = 0.0;
};

// ---------------------------------------------------------------------------
// Forward model
// ---------------------------------------------------------------------------

struct FringeModel {
    double period_px = 16.0;
    double k_h_um_per_rad = 10.0;
    double offset = 128.0;     // A
    double amplitude = 100.0;  // B
    double gamma = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    bool quantize = true;
};

/// Synthesizes object and reference (h = 0) fringe stacks:
///   I_i = g(A + B cos(2 pi x / period + h / k_h + delta_i)),
///   g(v) = 255 (v / 255)^gamma,
/// then adds seeded Gaussian noise, clips to [0, 255] and (optionally)
/// rounds to 8-bit levels.
inline std::pair<FringeStack, FringeStack> synth_fringes(const HeightMap& height, const PhaseShiftSchedule& schedule,
                                                         const FringeModel& m) {
    if (!(m.period_px > 2.0)) throw InvalidParameter("fringe period must exceed 2 px");
    if (!(m.k_h_um_per_rad > 0.0)) throw InvalidParameter("height/phase ratio must be > 0");
    if (!(m.gamma > 0.0)) throw InvalidParameter("gamma must be > 0");
    if (schedule.size() < 3) throw InvalidParameter("phase shifting needs N >= 3 patterns");
    const std::size_t w = height.width();
    const std::size_t h = height.height();
    Rng rng(m.seed);
    auto render = [&](bool with_height) {
        FringeStack s;
        s.schedule = schedule;
        s.gamma = m.gamma;
        for (double delta : schedule.shifts) {
            Grid<double> f(w, h, 0.0);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    double phi = kTwoPi * static_cast<double>(x) / m.period_px + delta;
                    if (with_height && height.valid(x, y)) phi += height.height_um(x, y) / m.k_h_um_per_rad;
                    double v = std::clamp(m.offset + m.amplitude * std::cos(phi), 0.0, 255.0);
                    v = 255.0 * std::pow(v / 255.0, m.gamma);
                    if (m.noise_sigma > 0.0) v += rng.normal(0.0, m.noise_sigma);
                    v = std::clamp(v, 0.0, 255.0);
                    f(x, y) = m.quantize ? std::round(v) : v;
                }
            }
            s.frames.push_back(std::move(f));
        }
        return s;
    };
    FringeStack obj = render(true);
    FringeStack ref = render(false);
    return {std::move(obj), std::move(ref)};
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Inverts the sensor gamma: I_cal = 255 (I / 255)^(1 / gamma).
inline FringeStack gamma_correct(const FringeStack& stack) {
    if (!(stack.gamma > 0.0)) throw InvalidParameter("gamma must be > 0");
    FringeStack out = stack;
    out.gamma = 1.0;
    if (stack.gamma == 1.0) return out;
    const double inv = 1.0 / stack.gamma;
    for (auto& f : out.frames)
        for (auto& v : f.values()) v = 255.0 * std::pow(std::clamp(v, 0.0, 255.0) / 255.0, inv);
    return out;
}

/// Per-pixel wrapped phase
///   phi = atan2(-sum I_i sin(delta_i), sum I_i cos(delta_i)) in (-pi, pi],
/// modulation (2/N) * |(sum I sin, sum I cos)|, valid where modulation >=
/// the threshold (intensity levels).
inline PhaseMap wrap_phase(const FringeStack& stack, double modulation_threshold = 5.0) {
    stack.validate();
    const std::size_t w = stack.width();
    const std::size_t h = stack.height();
    const std::size_t n = stack.frames.size();
    std::vector<double> sn(n), cs(n);
    for (std::size_t i = 0; i < n; ++i) {
        sn[i] = std::sin(stack.schedule.shifts[i]);
        cs[i] = std::cos(stack.schedule.shifts[i]);
    }
    PhaseMap pm{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), Grid<std::uint8_t>(w, h, 0)};
    for (std::size_t p = 0; p < w * h; ++p) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num -= stack.frames[i][p] * sn[i];
            den += stack.frames[i][p] * cs[i];
        }
        const double mod = 2.0 / static_cast<double>(n) * std::hypot(num, den);
        pm.phase[p] = wrap_to_pi(std::atan2(num, den));
        pm.modulation[p] = mod;
        pm.valid[p] = mod >= modulation_threshold;
    }
    return pm;
}

struct UnwrapResult {
    /// Continuous object-minus-reference phase.
    PhaseMap phase;
    /// Pixels reached across a neighbour step of |pi| (Nyquist-ambiguous).
    std::vector<std::size_t> ambiguous;
    std::size_t regions = 0;
};

/// Reference-guided unwrapping.
///
/// The object-minus-reference difference is wrapped into (-pi, pi] and
/// flood-filled (4-neighbour BFS) from the first pixel of each valid region,
/// largest region first, adding the 2 pi multiple that keeps each step
/// below pi. Each region's global 2 pi k offset is then fixed so that its
/// median lies in (-pi, pi].
inline UnwrapResult unwrap_reference(const PhaseMap& obj, const PhaseMap& ref) {
    if (!obj.phase.same_shape(ref.phase)) throw DimensionMismatch("object and reference phase maps differ in size");
    const std::size_t w = obj.width();
    const std::size_t h = obj.height();
    UnwrapResult out;
    out.phase = {Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), Grid<std::uint8_t>(w, h, 0)};
    Grid<double> diff(w, h, 0.0);
    std::size_t overlap = 0;
    for (std::size_t p = 0; p < w * h; ++p) {
        const bool ok = obj.valid[p] && ref.valid[p];
        out.phase.valid[p] = ok;
        out.phase.modulation[p] = std::min(obj.modulation[p], ref.modulation[p]);
        diff[p] = wrap_to_pi(obj.phase[p] - ref.phase[p]);
        overlap += ok;
    }
    if (overlap == 0) throw DegenerateInput("object and reference share no valid pixels");

    auto cc = connected_components(out.phase.valid, 4);
    std::vector<std::size_t> order(cc.components.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cc.components[a].area > cc.components[b].area; });
    out.regions = order.size();

    constexpr double ambiguity_tol = 1e-9;
    Grid<std::uint8_t> done(w, h, 0);
    std::deque<std::size_t> queue;
    std::vector<std::size_t> members;
    for (std::size_t ci : order) {
        const std::size_t seed = cc.components[ci].first_pixel;
        members.clear();
        out.phase.phase[seed] = diff[seed];
        done[seed] = 1;
        queue.assign(1, seed);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            members.push_back(p);
            const std::size_t x = p % w;
            const std::size_t y = p / w;
            const std::size_t nb[4] = {x + 1 < w ? p + 1 : p, x > 0 ? p - 1 : p, y + 1 < h ? p + w : p,
                                       y > 0 ? p - w : p};
            for (std::size_t q : nb) {
                if (q == p || done[q] || !out.phase.valid[q]) continue;
                const double step = wrap_to_pi(diff[q] - diff[p]);
                if (std::abs(step) >= kPi - ambiguity_tol) out.ambiguous.push_back(q);
                out.phase.phase[q] = out.phase.phase[p] + step;
                done[q] = 1;
                queue.push_back(q);
            }
        }
        std::vector<double> vals;
        vals.reserve(members.size());
        for (auto p : members) vals.push_back(out.phase.phase[p]);
        const std::size_t mid = vals.size() / 2;
        std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
        double median = vals[mid];
        if (vals.size() % 2 == 0) {
            median = 0.5 * (median + *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid)));
        }
        const double k = std::ceil((median - kPi) / kTwoPi);  // median - 2 pi k in (-pi, pi]
        if (k != 0.0)
            for (auto p : members) out.phase.phase[p] -= kTwoPi * k;
    }
    std::sort(out.ambiguous.begin(), out.ambiguous.end());
    return out;
}

/// h = k_h * delta_phi on valid pixels.
inline HeightMap phase_to_height(const PhaseMap& dphase, double k_h_um_per_rad) {
    if (!(k_h_um_per_rad > 0.0)) throw InvalidParameter("height/phase ratio must be > 0");
    HeightMap hm(dphase.width(), dphase.height());
    for (std::size_t p = 0; p < dphase.phase.size(); ++p) {
        hm.valid[p] = dphase.valid[p];
        hm.height_um[p] = dphase.valid[p] ? k_h_um_per_rad * dphase.phase[p] : 0.0;
    }
    return hm;
}

inline Region clamp_region(const Region& r, std::size_t w, std::size_t h) {
    if (r.x0 >= w || r.y0 >= h) throw InvalidParameter("region origin outside the height map");
    Region c = r;
    c.width = r.width == 0 ? w - r.x0 : std::min(r.width, w - r.x0);
    c.height = r.height == 0 ? h - r.y0 : std::min(r.height, h - r.y0);
    return c;
}

/// Arithmetic mean roughness: mean |h - mean(h)| over the valid pixels of
/// the region. z_std is the population standard deviation of h - mean(h).
inline RoughnessResult compute_sa(const HeightMap& hm, const Region& region = {}) {
    const Region r = clamp_region(region, hm.width(), hm.height());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t y = r.y0; y < r.y0 + r.height; ++y)
        for (std::size_t x = r.x0; x < r.x0 + r.width; ++x)
            if (hm.valid(x, y)) { sum += hm.height_um(x, y); ++n; }
    if (n < 2) throw DegenerateInput("roughness needs at least 2 valid pixels in the region");
    const double mean = sum / static_cast<double>(n);
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t y = r.y0; y < r.y0 + r.height; ++y) {
        for (std::size_t x = r.x0; x < r.x0 + r.width; ++x) {
            if (!hm.valid(x, y)) continue;
            const double z = hm.height_um(x, y) - mean;
            abs_sum += std::abs(z);
            sq_sum += z * z;
        }
    }
    return {abs_sum / static_cast<double>(n), r, n, std::sqrt(sq_sum / static_cast<double>(n)), mean};
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

struct FringeHeader {
    double period_px = 0.0;
    double k_h_um_per_rad = 0.0;
};

/// Writes `<prefix>_<i>.pgm` per pattern and `<prefix>.json` describing
/// the stack.
inline void write_fringe_stack(const std::filesystem::path& dir, const std::string& prefix, const FringeStack& s,
                               const FringeHeader& hdr) {
    s.validate();
    nlohmann::json j;
    j["shifts_rad"] = s.schedule.shifts;
    j["gamma"] = s.gamma;
    j["period_px"] = hdr.period_px;
    j["k_h_um_per_rad"] = hdr.k_h_um_per_rad;
    j["width"] = s.width();
    j["height"] = s.height();
    auto& files = j["frames"] = nlohmann::json::array();
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
        Grid<std::uint8_t> g(s.width(), s.height(), 0);
        for (std::size_t p = 0; p < g.size(); ++p)
            g[p] = static_cast<std::uint8_t>(std::clamp(std::lround(s.frames[i][p]), 0L, 255L));
        const std::string name = prefix + "_" + std::to_string(i) + ".pgm";
        pgm::write(dir / name, g);
        files.push_back(name);
    }
    csv::write_text(dir / (prefix + ".json"), j.dump(2) + "\n");
}

inline std::pair<FringeStack, FringeHeader> read_fringe_stack(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open " + header_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(header_path.string() + ": " + e.what());
    }
    FringeStack s;
    FringeHeader hdr;
    try {
        s.schedule.shifts = j.at("shifts_rad").get<std::vector<double>>();
        s.gamma = j.at("gamma").get<double>();
        hdr.period_px = j.value("period_px", 0.0);
        hdr.k_h_um_per_rad = j.at("k_h_um_per_rad").get<double>();
        for (const auto& name : j.at("frames")) {
            const auto g = pgm::read(header_path.parent_path() / name.get<std::string>());
            Grid<double> f(g.width(), g.height(), 0.0);
            for (std::size_t p = 0; p < g.size(); ++p) f[p] = g[p];
            s.frames.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(header_path.string() + ": " + e.what());
    }
    s.validate();
    return {std::move(s), hdr};
}

/// `<name>.json` header + `<name>.raw` float32 little-endian heights,
/// NaN where invalid.
inline void write_height_map(const std::filesystem::path& header_path, const HeightMap& hm) {
    auto raw_path = header_path;
    raw_path.replace_extension(".raw");
    nlohmann::json j{{"width", hm.width()},      {"height", hm.height()}, {"dtype", "float32"},
                     {"byte_order", "little"},   {"units", "um"},         {"invalid", "nan"},
                     {"data", raw_path.filename().string()}};
    csv::write_text(header_path, j.dump(2) + "\n");
    std::string bytes;
    bytes.reserve(hm.height_um.size() * 4);
    for (std::size_t p = 0; p < hm.height_um.size(); ++p) {
        const float v = hm.valid[p] ? static_cast<float>(hm.height_um[p]) : std::numeric_limits<float>::quiet_NaN();
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
    csv::write_text(raw_path, bytes);
}

inline HeightMap read_height_map(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open " + header_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(header_path.string() + ": " + e.what());
    }
    const auto w = j.at("width").get<std::size_t>();
    const auto h = j.at("height").get<std::size_t>();
    const auto raw_path = header_path.parent_path() / j.at("data").get<std::string>();
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw IoError("cannot open " + raw_path.string());
    std::vector<unsigned char> b((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    if (b.size() != w * h * 4) throw FormatError(raw_path.string() + ": wrong payload size");
    HeightMap hm(w, h);
    for (std::size_t p = 0; p < w * h; ++p) {
        const std::uint32_t bits = static_cast<std::uint32_t>(b[4 * p]) | (static_cast<std::uint32_t>(b[4 * p + 1]) << 8) |
                                   (static_cast<std::uint32_t>(b[4 * p + 2]) << 16) |
                                   (static_cast<std::uint32_t>(b[4 * p + 3]) << 24);
        const float v = std::bit_cast<float>(bits);
        hm.valid[p] = !std::isnan(v);
        hm.height_um[p] = hm.valid[p] ? static_cast<double>(v) : 0.0;
    }
    return hm;
}

inline constexpr const char* kRoughnessCsvHeader = "layer,bar,sa_um,z_std_um,n_valid\n";

/// Appends one row to roughness.csv, writing the header when the file is new.
inline void append_roughness_row(const std::filesystem::path& path, long long layer, const std::string& bar,
                                 const RoughnessResult& r) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    if (fresh) out << kRoughnessCsvHeader;
    out << layer << ',' << bar << ',' << csv::fmt(r.sa_um) << ',' << csv::fmt(r.z_std_um) << ',' << r.n_valid << '\n';
}

}  // namespace spatter::fpp
