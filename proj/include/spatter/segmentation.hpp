#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatter/errors.hpp"
#include "spatter/grid.hpp"
#include "spatter/image.hpp"
#include "spatter/imaging.hpp"
#include "spatter/pgm.hpp"
#include "spatter/rng.hpp"

namespace spatter {

// ---------------------------------------------------------------------------
// Label-map ingestion
// ---------------------------------------------------------------------------

/// Loads an externally produced label map (PGM P5, values in {0,1,2}).
/// When expected dimensions are given (the paired frame), they must match.
inline LabelMap ingest_labelmap(const std::filesystem::path& path,
                                std::optional<std::pair<std::size_t, std::size_t>> expected_size = std::nullopt) {
    Grid<std::uint8_t> g = pgm::read(path);
    if (expected_size && (g.width() != expected_size->first || g.height() != expected_size->second)) {
        throw DimensionMismatch(path.string() + ": label map is " + std::to_string(g.width()) + "x" +
                                std::to_string(g.height()) + ", frame is " + std::to_string(expected_size->first) +
                                "x" + std::to_string(expected_size->second));
    }
    try {
        return LabelMap(std::move(g));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_labelmap(const std::filesystem::path& path, const LabelMap& lm) { pgm::write(path, lm.grid()); }

// ---------------------------------------------------------------------------
// Segmenters
// ---------------------------------------------------------------------------

/// Pluggable frame -> label map stage.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual LabelMap segment(const Frame& frame) const = 0;
    virtual std::string name() const = 0;
};

struct ReferenceSegmentConfig {
    int t_mp = 200;
    int t_spatter = 60;
    /// Spots in a vertical run of at least this many are treated as flare.
    int flare_min_spots = 3;
    double flare_tol_x = 1.5;
};

/// Threshold labeling followed by flare suppression: a spatter component
/// whose centroid x is within tol_x of at least (k - 1) other spatter
/// components is relabeled background.
inline LabelMap reference_segment(const Frame& frame, const ReferenceSegmentConfig& cfg = {}) {
    if (cfg.flare_min_spots < 2) throw InvalidParameter("flare_min_spots must be >= 2");
    if (!(cfg.flare_tol_x >= 0.0)) throw InvalidParameter("flare_tol_x must be >= 0");
    LabelMap lm = threshold_segment(frame, cfg.t_mp, cfg.t_spatter);
    const auto cc = connected_components(lm.mask(Label::spatter), 8);
    const auto& comps = cc.components;
    std::vector<bool> flare(comps.size(), false);
    for (std::size_t i = 0; i < comps.size(); ++i) {
        int aligned = 0;
        for (std::size_t j = 0; j < comps.size(); ++j) {
            if (i != j && std::abs(comps[i].centroid.x - comps[j].centroid.x) <= cfg.flare_tol_x) ++aligned;
        }
        flare[i] = aligned >= cfg.flare_min_spots - 1;
    }
    for (std::size_t i = 0; i < lm.size(); ++i) {
        const int label = cc.labels[i];
        if (label > 0 && flare[static_cast<std::size_t>(label - 1)]) lm.set(i, Label::background);
    }
    return lm;
}

struct KMeansResult {
    LabelMap labels;
    std::vector<double> centers;  // ascending
    int iterations = 0;
};

/// 1-D intensity K-means over the frame histogram (K = 3 or 4).
///
/// Centres start at evenly spaced quantiles of the distinct intensities
/// present. A cluster that empties is re-seeded at a distinct intensity drawn
/// with `seed`. Clusters map to classes by mean intensity: brightest is melt
/// pool, darkest background, everything between spatter.
inline KMeansResult kmeans_segment_detailed(const Frame& frame, int k, std::uint64_t seed = 0) {
    if (k != 3 && k != 4) throw InvalidParameter("K must be 3 or 4");
    std::array<std::size_t, 256> hist{};
    for (auto v : frame.pixels.values()) ++hist[v];
    std::vector<int> distinct;
    for (int v = 0; v < 256; ++v)
        if (hist[static_cast<std::size_t>(v)]) distinct.push_back(v);
    if (static_cast<int>(distinct.size()) < k) {
        throw DegenerateInput("frame has " + std::to_string(distinct.size()) + " distinct intensities, K=" +
                              std::to_string(k));
    }
    const auto kk = static_cast<std::size_t>(k);
    std::vector<double> centers(kk);
    for (std::size_t c = 0; c < kk; ++c) {
        const auto q = static_cast<std::size_t>((2.0 * c + 1.0) / (2.0 * k) * static_cast<double>(distinct.size()));
        centers[c] = distinct[std::min(q, distinct.size() - 1)];
    }
    Rng rng(seed);
    std::array<std::size_t, 256> assign{};
    int iter = 0;
    for (; iter < 100; ++iter) {
        for (int v : distinct) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < kk; ++c)
                if (std::abs(v - centers[c]) < std::abs(v - centers[best])) best = c;
            assign[static_cast<std::size_t>(v)] = best;
        }
        std::vector<double> sum(kk, 0.0);
        std::vector<double> cnt(kk, 0.0);
        for (int v : distinct) {
            const auto uv = static_cast<std::size_t>(v);
            sum[assign[uv]] += static_cast<double>(v) * static_cast<double>(hist[uv]);
            cnt[assign[uv]] += static_cast<double>(hist[uv]);
        }
        bool changed = false;
        for (std::size_t c = 0; c < kk; ++c) {
            double next = centers[c];
            if (cnt[c] > 0) {
                next = sum[c] / cnt[c];
            } else {
                next = distinct[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(distinct.size()) - 1))];
            }
            changed = changed || std::abs(next - centers[c]) > 1e-9;
            centers[c] = next;
        }
        if (!changed) break;
    }
    // Rank clusters by centre; map ranks to classes.
    std::vector<std::size_t> order(kk);
    for (std::size_t c = 0; c < kk; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    std::vector<Label> cls(kk, Label::spatter);
    cls[order.front()] = Label::background;
    cls[order.back()] = Label::melt_pool;

    KMeansResult out{LabelMap(frame.width(), frame.height()), {}, iter};
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) out.labels.set(i, cls[assign[frame.pixels[i]]]);
    for (auto c : order) out.centers.push_back(centers[c]);
    return out;
}

inline LabelMap kmeans_segment(const Frame& frame, int k, std::uint64_t seed = 0) {
    return kmeans_segment_detailed(frame, k, seed).labels;
}

class ReferenceSegmenter final : public Segmenter {
public:
    explicit ReferenceSegmenter(ReferenceSegmentConfig cfg = {}) : cfg_(cfg) {}
    LabelMap segment(const Frame& frame) const override { return reference_segment(frame, cfg_); }
    std::string name() const override { return "reference"; }

private:
    ReferenceSegmentConfig cfg_;
};

class KMeansSegmenter final : public Segmenter {
public:
    KMeansSegmenter(int k, std::uint64_t seed) : k_(k), seed_(seed) {
        if (k != 3 && k != 4) throw InvalidParameter("K must be 3 or 4");
    }
    LabelMap segment(const Frame& frame) const override { return kmeans_segment(frame, k_, seed_); }
    std::string name() const override { return "kmeans" + std::to_string(k_); }

private:
    int k_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Per-pixel probability vectors over the three classes, pixel-interleaved.
class ClassProbabilities {
public:
    ClassProbabilities() = default;
    ClassProbabilities(std::size_t width, std::size_t height)
        : width_(width), height_(height), p_(width * height * kNumClasses, 0.0) {}
    ClassProbabilities(std::size_t width, std::size_t height, std::vector<double> interleaved)
        : width_(width), height_(height), p_(std::move(interleaved)) {
        if (p_.size() != width_ * height_ * kNumClasses) throw DimensionMismatch("probability buffer size mismatch");
    }

    /// One-hot probabilities of a label map.
    static ClassProbabilities one_hot(const LabelMap& lm) {
        ClassProbabilities p(lm.width(), lm.height());
        for (std::size_t i = 0; i < lm.size(); ++i) p.p_[i * kNumClasses + static_cast<std::size_t>(lm.at(i))] = 1.0;
        return p;
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t pixels() const noexcept { return width_ * height_; }

    double& at(std::size_t pixel, int cls) { return p_[pixel * kNumClasses + static_cast<std::size_t>(cls)]; }
    double at(std::size_t pixel, int cls) const { return p_[pixel * kNumClasses + static_cast<std::size_t>(cls)]; }
    const std::vector<double>& interleaved() const noexcept { return p_; }

    /// Every vector non-negative and summing to 1 within tol.
    void validate(double tol = 1e-9) const {
        for (std::size_t i = 0; i < pixels(); ++i) {
            double s = 0.0;
            for (int c = 0; c < kNumClasses; ++c) {
                const double v = at(i, c);
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw InvalidParameter("negative or non-finite probability at pixel " + std::to_string(i));
                }
                s += v;
            }
            if (std::abs(s - 1.0) > tol) {
                throw InvalidParameter("probabilities at pixel " + std::to_string(i) + " sum to " + std::to_string(s));
            }
        }
    }

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> p_;
};

struct CrossEntropyResult {
    /// Mean over pixels of -log p(true class); +inf when any true-class
    /// probability is zero.
    double value = 0.0;
    bool infinite = false;
    std::size_t zero_probability_pixels = 0;
};

/// Mean pixel cross entropy with one-hot targets from `truth`, natural log.
inline CrossEntropyResult cross_entropy(const ClassProbabilities& pred, const LabelMap& truth) {
    if (pred.width() != truth.width() || pred.height() != truth.height()) {
        throw DimensionMismatch("prediction and truth sizes differ");
    }
    pred.validate();
    CrossEntropyResult r;
    if (truth.size() == 0) return r;
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double p = pred.at(i, static_cast<int>(truth.at(i)));
        if (p <= 0.0) {
            ++r.zero_probability_pixels;
            continue;
        }
        sum -= std::log(p);
    }
    if (r.zero_probability_pixels) {
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
    } else {
        r.value = sum / static_cast<double>(truth.size());
    }
    return r;
}

/// Fraction of pixels whose class matches.
inline double pixel_accuracy(const LabelMap& pred, const LabelMap& truth) {
    if (pred.width() != truth.width() || pred.height() != truth.height()) {
        throw DimensionMismatch("prediction and truth sizes differ");
    }
    if (truth.size() == 0) throw DegenerateInput("empty label maps");
    std::size_t same = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) same += pred.at(i) == truth.at(i);
    return static_cast<double>(same) / static_cast<double>(truth.size());
}

// Probability maps on disk: `<name>.json` header + `<name>.raw` holding
// three float32 planes (background, melt pool, spatter), little endian.

inline void write_probabilities(const std::filesystem::path& header_path, const ClassProbabilities& p) {
    auto raw_path = header_path;
    raw_path.replace_extension(".raw");
    nlohmann::json h{{"width", p.width()},   {"height", p.height()},           {"planes", kNumClasses},
                     {"dtype", "float32"},   {"byte_order", "little"},         {"layout", "planar"},
                     {"data", raw_path.filename().string()}};
    std::ofstream hj(header_path);
    if (!hj) throw IoError("cannot write " + header_path.string());
    hj << h.dump(2) << '\n';
    std::ofstream out(raw_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + raw_path.string());
    for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < p.pixels(); ++i) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(p.at(i, c)));
            unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    }
}

inline ClassProbabilities read_probabilities(const std::filesystem::path& header_path) {
    std::ifstream hj(header_path);
    if (!hj) throw IoError("cannot open " + header_path.string());
    nlohmann::json h;
    try {
        hj >> h;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(header_path.string() + ": " + e.what());
    }
    const auto w = h.at("width").get<std::size_t>();
    const auto ht = h.at("height").get<std::size_t>();
    if (h.at("planes").get<int>() != kNumClasses || h.at("dtype") != "float32") {
        throw FormatError(header_path.string() + ": expected 3 float32 planes");
    }
    const auto raw_path = header_path.parent_path() / h.at("data").get<std::string>();
    std::ifstream in(raw_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + raw_path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != w * ht * kNumClasses * 4) throw FormatError(raw_path.string() + ": wrong payload size");
    ClassProbabilities p(w, ht);
    std::size_t off = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < w * ht; ++i, off += 4) {
            const std::uint32_t bits = static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
                                       (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
                                       (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
            p.at(i, c) = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Dilated convolution
// ---------------------------------------------------------------------------

/// y_i = sum_k x[i + r k] w_k, valid mode (no padding).
inline std::vector<double> dilated_conv(std::span<const double> x, std::span<const double> w, int rate) {
    if (rate < 1) throw InvalidParameter("dilation rate must be >= 1");
    if (w.empty()) throw InvalidParameter("kernel must not be empty");
    const std::size_t reach = static_cast<std::size_t>(rate) * (w.size() - 1);
    if (x.size() < reach + 1) {
        throw InvalidParameter("input length " + std::to_string(x.size()) + " shorter than dilated kernel span " +
                               std::to_string(reach + 1));
    }
    std::vector<double> y(x.size() - reach, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) s += x[i + static_cast<std::size_t>(rate) * k] * w[k];
        y[i] = s;
    }
    return y;
}

/// 2-D form: y(i, j) = sum_{k, l} x(i + r k, j + r l) w(k, l), valid mode.
/// Grid coordinates are (column, row).
inline Grid<double> dilated_conv2d(const Grid<double>& x, const Grid<double>& w, int rate) {
    if (rate < 1) throw InvalidParameter("dilation rate must be >= 1");
    if (w.empty()) throw InvalidParameter("kernel must not be empty");
    const std::size_t rx = static_cast<std::size_t>(rate) * (w.width() - 1);
    const std::size_t ry = static_cast<std::size_t>(rate) * (w.height() - 1);
    if (x.width() < rx + 1 || x.height() < ry + 1) throw InvalidParameter("input smaller than dilated kernel span");
    Grid<double> y(x.width() - rx, x.height() - ry, 0.0);
    const auto r = static_cast<std::size_t>(rate);
    for (std::size_t j = 0; j < y.height(); ++j) {
        for (std::size_t i = 0; i < y.width(); ++i) {
            double s = 0.0;
            for (std::size_t l = 0; l < w.height(); ++l)
                for (std::size_t k = 0; k < w.width(); ++k) s += x(i + r * k, j + r * l) * w(k, l);
            y(i, j) = s;
        }
    }
    return y;
}

}  // namespace spatter
