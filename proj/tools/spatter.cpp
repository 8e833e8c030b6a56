// spatter: command-line front end for the monitoring pipeline.
//
//   spatter <simulate|register|fpp|analyze|fit|compare|report>
//           [--config PATH] [--seed U64] [--jobs N] [--out DIR]
//
// Exit codes: 0 ok, 2 configuration/validation error, 3 runtime failure,
// 4 partial success (some frames skipped).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "spatter/spatter.hpp"

namespace fs = std::filesystem;
using namespace spatter;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitPartial = 4;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string out = "out";
    std::string segmenter;  // register only
};

struct Run {
    Config cfg;
    fs::path base;  // relative config paths resolve against this
    fs::path out;
    std::uint64_t seed = 0;
    std::size_t jobs = 0;

    fs::path path(const std::string& key) const {
        const fs::path p = cfg.str(key);
        return p.is_absolute() ? p : base / p;
    }

    std::vector<fs::path> paths(const std::string& key) const {
        std::vector<fs::path> out_paths;
        std::string s = cfg.str(key);
        std::size_t pos = 0;
        while (pos <= s.size()) {
            const auto comma = s.find(',', pos);
            std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            pos = comma == std::string::npos ? s.size() + 1 : comma + 1;
            while (!item.empty() && item.front() == ' ') item.erase(item.begin());
            while (!item.empty() && item.back() == ' ') item.pop_back();
            if (item.empty()) continue;
            const fs::path p = item;
            out_paths.push_back(p.is_absolute() ? p : base / p);
        }
        return out_paths;
    }
};

/// Missing input files are runtime failures, reported before any work.
void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw IoError(what + " not found: " + p.string());
}

void write_json(const fs::path& p, const nlohmann::json& j) { csv::write_text(p, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

std::string frame_name(long long i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "f_%06lld", i);
    return buf;
}

fpp::Region region_from(const Config& c, const std::string& key) {
    const auto v = c.numbers(key);
    if (v.empty()) return {};
    if (v.size() != 4 || v[0] < 0 || v[1] < 0 || v[2] < 0 || v[3] < 0)
        throw ConfigError("config key '" + key + "': expected [x0, y0, width, height] with non-negative values");
    return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2]),
            static_cast<std::size_t>(v[3])};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

const std::set<std::string> kSimulateKeys{
    "seed",          "jobs",           "layer.index",       "layer.power_w",     "layer.speed_mm_s",
    "layer.hatch_space_mm", "layer.thickness_mm", "layer.hatch_angle_deg", "layer.region_mm", "layer.frames",
    "layer.frame_rate_hz", "layer.mm_per_pixel", "scene.width", "scene.height", "scene.mp_radius",
    "scene.noise_sigma", "scene.spatter_count", "scene.spatter_max_distance", "scene.flare", "scene.flare_x",
    "scene.flare_y", "scene.flare_intensity", "fpp.enabled", "fpp.width", "fpp.height", "fpp.pv_um",
    "fpp.period_px", "fpp.k_h", "fpp.gamma", "fpp.noise_sigma"};

/// Smooth zero-median test surface with the requested peak-to-valley.
fpp::HeightMap synthetic_surface(std::size_t w, std::size_t h, double pv_um, std::uint64_t seed) {
    Rng rng(seed);
    const double fx = rng.uniform(0.6, 1.6), fy = rng.uniform(0.4, 1.2), ph = rng.uniform(0.0, 6.28);
    fpp::HeightMap hm(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double u = static_cast<double>(x) / static_cast<double>(std::max<std::size_t>(1, w - 1));
            const double v = static_cast<double>(y) / static_cast<double>(std::max<std::size_t>(1, h - 1));
            hm.height_um(x, y) = std::sin(6.283185307179586 * fx * u + ph) * std::cos(6.283185307179586 * fy * v) +
                                 0.4 * (u - 0.5);
        }
    }
    auto vals = hm.height_um.values();
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    const double mn = *lo, span = *hi - *lo;
    for (auto& z : vals) z = span > 0 ? (z - mn) / span * pv_um : 0.0;
    std::vector<double> sorted(vals.begin(), vals.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double med = sorted[sorted.size() / 2];
    for (auto& z : vals) z -= med;
    return hm;
}

int cmd_simulate(const Run& run) {
    run.cfg.require_known(kSimulateKeys);
    const Config& c = run.cfg;
    LayerSceneSpec layer;
    layer.seed = run.seed;
    layer.layer_index = c.integer("layer.index", 66);
    layer.process = {c.num("layer.power_w", 250.0), c.num("layer.speed_mm_s", 1000.0),
                     c.num("layer.hatch_space_mm", 0.11), c.num("layer.thickness_mm", 0.04)};
    layer.hatch_angle_deg = c.num("layer.hatch_angle_deg", 74.0);
    const auto region = c.numbers("layer.region_mm", {0.0, 0.0, 5.0, 5.0});
    if (region.size() != 4) throw ConfigError("config key 'layer.region_mm': expected [x0, y0, width, height]");
    layer.region_mm = {region[0], region[1], region[2], region[3]};
    const long long frames = c.integer("layer.frames", 1);
    if (frames < 1) throw ConfigError("config key 'layer.frames': must be >= 1");
    layer.max_frames = static_cast<std::size_t>(frames);
    layer.frame_rate_hz = c.num("layer.frame_rate_hz", 1000.0);
    layer.mm_per_pixel = c.num("layer.mm_per_pixel", 0.02);
    if (!(layer.frame_rate_hz > 0) || !(layer.mm_per_pixel > 0))
        throw ConfigError("frame rate and pixel size must be > 0");

    SceneSpec& s = layer.scene;
    s.width = static_cast<std::size_t>(c.integer("scene.width", 256));
    s.height = static_cast<std::size_t>(c.integer("scene.height", 256));
    s.mp_center = {static_cast<double>(s.width / 2), static_cast<double>(s.height / 2)};
    s.mp_radius = c.num("scene.mp_radius", s.mp_radius);
    s.background_noise_sigma = c.num("scene.noise_sigma", s.background_noise_sigma);
    s.spatter_max_distance = c.num("scene.spatter_max_distance", s.spatter_max_distance);
    if (c.boolean("scene.flare", false)) {
        FlareSpec f;
        f.column_x = c.num("scene.flare_x", static_cast<double>(s.width) * 0.875);
        f.first_y = c.num("scene.flare_y", static_cast<double>(s.height) * 0.12);
        f.spot_intensity = static_cast<int>(c.integer("scene.flare_intensity", f.spot_intensity));
        s.flare = f;
    }
    const long long fixed_count = c.integer("scene.spatter_count", -1);
    if (fixed_count >= 0) {
        // A fixed count replaces the process-driven model.
        layer.count_model = SpatterCountModel{0, 0, static_cast<double>(fixed_count), 0, 0, 0, 0, 1, 1 << 20};
    }

    spdlog::info("simulating {} frame(s) for layer {}", frames, layer.layer_index);
    const auto seq = synth_layer_sequence(layer);
    if (seq.empty()) throw DegenerateInput("scan path inside the region is empty");
    for (const char* d : {"frames", "labels", "truth"}) fs::create_directories(run.out / d);
    nlohmann::json manifest;
    manifest["schema"] = "spatter.frame_manifest";
    manifest["layer_index"] = layer.layer_index;
    manifest["hatch_angle_deg"] = layer.hatch_angle_deg;
    auto& list = manifest["frames"] = nlohmann::json::array();
    for (const auto& f : seq) {
        const std::string name = frame_name(f.frame_index);
        pgm::write(run.out / "frames" / (name + ".pgm"), f.scene.frame.pixels);
        write_labelmap(run.out / "labels" / (name + ".pgm"), f.scene.labels);
        write_json(run.out / "truth" / (name + ".json"), to_json(f.scene.truth));
        list.push_back({{"index", f.frame_index},
                        {"frame", "frames/" + name + ".pgm"},
                        {"labels", "labels/" + name + ".pgm"},
                        {"truth", "truth/" + name + ".json"},
                        {"scan_direction_deg", f.scan_direction_deg},
                        {"pixel_to_plate", f.scene.frame.meta.pixel_to_plate->matrix()}});
    }
    write_json(run.out / "manifest.json", manifest);

    if (c.boolean("fpp.enabled", false)) {
        const auto w = static_cast<std::size_t>(c.integer("fpp.width", 256));
        const auto h = static_cast<std::size_t>(c.integer("fpp.height", 256));
        const auto truth = synthetic_surface(w, h, c.num("fpp.pv_um", 100.0), Rng::derive(run.seed, 7).next_u64());
        fpp::FringeModel m;
        m.period_px = c.num("fpp.period_px", 16.0);
        m.k_h_um_per_rad = c.num("fpp.k_h", 10.0);
        m.gamma = c.num("fpp.gamma", 2.2);
        m.noise_sigma = c.num("fpp.noise_sigma", 0.0);
        m.seed = Rng::derive(run.seed, 8).next_u64();
        const auto [obj, ref] = fpp::synth_fringes(truth, fpp::PhaseShiftSchedule::uniform(3), m);
        fs::create_directories(run.out / "fringes");
        fpp::write_fringe_stack(run.out / "fringes", "object", obj, {m.period_px, m.k_h_um_per_rad});
        fpp::write_fringe_stack(run.out / "fringes", "reference", ref, {m.period_px, m.k_h_um_per_rad});
        fpp::write_height_map(run.out / "fringes" / "truth_height.json", truth);
        spdlog::info("wrote fringe stacks ({}x{}, Sa {} um)", w, h, csv::fmt(fpp::compute_sa(truth).sa_um, 6));
    }
    spdlog::info("wrote {} frame triplet(s) to {}", seq.size(), run.out.string());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// register
// ---------------------------------------------------------------------------

const std::set<std::string> kRegisterKeys{"seed",       "jobs",        "input",       "segmenter",
                                          "dbscan.eps", "dbscan.min_pts", "kmeans.seed", "match_radius_px"};

int cmd_register(const Run& run, const std::string& segmenter_flag) {
    run.cfg.require_known(kRegisterKeys);
    const Config& c = run.cfg;
    if (!c.has("input")) throw ConfigError("config key 'input' (frame manifest) is required");
    const fs::path manifest_path = run.path("input");
    const std::string seg_name = segmenter_flag.empty() ? c.str("segmenter", "labelmap") : segmenter_flag;
    if (seg_name != "labelmap" && seg_name != "reference" && seg_name != "kmeans3" && seg_name != "kmeans4")
        throw ConfigError("segmenter must be one of labelmap|reference|kmeans3|kmeans4, got '" + seg_name + "'");
    DbscanParams db;
    db.eps = c.num("dbscan.eps", db.eps);
    db.min_pts = static_cast<std::size_t>(c.integer("dbscan.min_pts", static_cast<long long>(db.min_pts)));
    const double match_radius = c.num("match_radius_px", 3.0);

    require_file(manifest_path, "frame manifest");
    const auto manifest = read_json(manifest_path);
    const fs::path root = manifest_path.parent_path();
    const auto& frames = manifest.at("frames");
    if (frames.empty()) throw DegenerateInput("manifest lists no frames");
    for (const auto& f : frames) {
        require_file(root / f.at(seg_name == "labelmap" ? "labels" : "frame").get<std::string>(), "frame image");
    }

    std::unique_ptr<Segmenter> seg;
    if (seg_name == "reference") seg = std::make_unique<ReferenceSegmenter>();
    if (seg_name == "kmeans3") seg = std::make_unique<KMeansSegmenter>(3, c.u64("kmeans.seed", run.seed));
    if (seg_name == "kmeans4") seg = std::make_unique<KMeansSegmenter>(4, c.u64("kmeans.seed", run.seed));

    std::vector<RegistrationInput> inputs;
    for (const auto& f : frames) {
        RegistrationInput in;
        in.frame_index = f.at("index").get<long long>();
        in.scan_direction_deg = f.value("scan_direction_deg", 0.0);
        in.pixel_to_plate = f.contains("pixel_to_plate") ? homography_from_json(f.at("pixel_to_plate"))
                                                         : Homography::translation(0.0, 0.0);
        if (seg_name == "labelmap") {
            in.image = ingest_labelmap(root / f.at("labels").get<std::string>());
        } else {
            Frame fr(pgm::read(root / f.at("frame").get<std::string>()), {});
            fr.meta.frame_index = in.frame_index;
            in.image = std::move(fr);
        }
        inputs.push_back(std::move(in));
    }
    RegistrationOptions opt;
    opt.dbscan = db;
    opt.segmenter = seg.get();
    opt.jobs = run.jobs;
    const auto map = register_layer(inputs, manifest.value("layer_index", 0LL), opt);

    fs::create_directories(run.out);
    write_json(run.out / "signature.json", to_json(map));
    csv::write_text(run.out / "signature.csv", signature_to_csv(map));

    // Per-frame comparison against simulator ground truth when available.
    nlohmann::json report;
    report["segmenter"] = seg_name;
    report["frames"] = nlohmann::json::array();
    std::size_t with_false = 0, exact = 0, compared = 0;
    std::string eval = "frame_index,accuracy,cross_entropy\n";
    bool have_eval = false;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (!f.contains("truth") || !fs::exists(root / f.at("truth").get<std::string>())) continue;
        const auto gt = ground_truth_from_json(read_json(root / f.at("truth").get<std::string>()));
        const long long idx = f.at("index").get<long long>();
        auto it = std::find_if(map.observations.begin(), map.observations.end(),
                               [&](const MPObservation& o) { return o.frame_index == idx; });
        if (it == map.observations.end()) continue;
        std::size_t false_clusters = 0;
        for (const auto& cc : it->spatter_centroids_px) {
            bool matched = false;
            for (const auto& t : gt.spatter_centroids)
                matched = matched || std::hypot(cc.x - t.x, cc.y - t.y) <= match_radius;
            false_clusters += !matched;
        }
        ++compared;
        with_false += false_clusters > 0;
        exact += it->spatter_count == gt.spatter_count();
        report["frames"].push_back({{"frame_index", idx},
                                    {"truth_count", gt.spatter_count()},
                                    {"registered_count", it->spatter_count},
                                    {"false_clusters", false_clusters}});
        if (seg && f.contains("labels") && fs::exists(root / f.at("labels").get<std::string>())) {
            const auto truth_lm = ingest_labelmap(root / f.at("labels").get<std::string>());
            const auto pred = seg->segment(std::get<Frame>(inputs[i].image));
            const auto ce = cross_entropy(ClassProbabilities::one_hot(pred), truth_lm);
            eval += std::to_string(idx) + ',' + csv::fmt(pixel_accuracy(pred, truth_lm)) + ',' + csv::fmt(ce.value) +
                    '\n';
            have_eval = true;
        }
    }
    report["compared_frames"] = compared;
    report["exact_count_frames"] = exact;
    report["frames_with_false_clusters"] = with_false;
    report["skipped_frames"] = map.skipped.size();
    write_json(run.out / "register_report.json", report);
    if (have_eval) csv::write_text(run.out / "segmentation_eval.csv", eval);
    if (with_false > 0)
        spdlog::warn("{}: {} of {} frame(s) contain spatter clusters with no ground-truth match", seg_name, with_false,
                     compared);

    spdlog::info("registered {} frame(s), skipped {}", map.observations.size(), map.skipped.size());
    if (!map.skipped.empty()) {
        spdlog::warn("{} frame(s) skipped", map.skipped.size());
        return kExitPartial;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fpp
// ---------------------------------------------------------------------------

const std::set<std::string> kFppKeys{"seed",     "jobs", "object", "reference", "k_h", "modulation_threshold",
                                     "region",   "layer", "bar"};

int cmd_fpp(const Run& run) {
    run.cfg.require_known(kFppKeys);
    const Config& c = run.cfg;
    if (!c.has("object")) throw ConfigError("config key 'object' (fringe header) is required");
    if (!c.has("reference")) throw ConfigError("config key 'reference' (fringe header) is required");
    const auto region = region_from(c, "region");
    const double threshold = c.num("modulation_threshold", 5.0);
    require_file(run.path("object"), "object fringe header");
    require_file(run.path("reference"), "reference fringe header");

    auto [obj, hdr] = fpp::read_fringe_stack(run.path("object"));
    auto [ref, ref_hdr] = fpp::read_fringe_stack(run.path("reference"));
    const double k_h = c.num("k_h", hdr.k_h_um_per_rad);
    const auto po = fpp::wrap_phase(fpp::gamma_correct(obj), threshold);
    const auto pr = fpp::wrap_phase(fpp::gamma_correct(ref), threshold);
    const auto un = fpp::unwrap_reference(po, pr);
    if (!un.ambiguous.empty()) spdlog::warn("{} pixel(s) at an ambiguous pi step", un.ambiguous.size());
    const auto hm = fpp::phase_to_height(un.phase, k_h);
    const auto r = fpp::compute_sa(hm, region);

    fs::create_directories(run.out);
    fpp::write_height_map(run.out / "height.json", hm);
    const fs::path rough = run.out / "roughness.csv";
    fs::remove(rough);
    fpp::append_roughness_row(rough, c.integer("layer", 0), c.str("bar", "0"), r);
    spdlog::info("Sa {} um over {} valid pixel(s)", csv::fmt(r.sa_um, 6), r.n_valid);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

const std::set<std::string> kAnalyzeKeys{"seed", "jobs", "signatures", "bin_width_deg"};

int cmd_analyze(const Run& run) {
    run.cfg.require_known(kAnalyzeKeys);
    const auto files = run.paths("signatures");
    if (files.empty()) throw ConfigError("config key 'signatures' (comma-separated JSON paths) is required");
    const double bin = run.cfg.num("bin_width_deg", 30.0);
    for (const auto& f : files) require_file(f, "signature map");
    std::vector<LayerSignatureMap> maps;
    for (const auto& f : files) maps.push_back(layer_signature_from_json(read_json(f)));
    std::stable_sort(maps.begin(), maps.end(),
                     [](const auto& a, const auto& b) { return a.layer_index < b.layer_index; });

    std::string summary = "layer,observations,skipped,mean_count,std_count\n";
    std::vector<double> angles;
    for (const auto& m : maps) {
        summary += std::to_string(m.layer_index) + ',' + std::to_string(m.observations.size()) + ',' +
                   std::to_string(m.skipped.size()) + ',' +
                   (m.aggregates ? csv::fmt(m.aggregates->mean_count) + ',' + csv::fmt(m.aggregates->std_count)
                                 : std::string("nan,nan")) +
                   '\n';
        for (const auto& o : m.observations)
            angles.insert(angles.end(), o.ejection_angles_deg.begin(), o.ejection_angles_deg.end());
    }
    const auto edges = uniform_edges(0.0, 360.0, bin);
    const auto h = histogram(angles, edges);
    std::string hist = "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        hist += csv::fmt(h.edges[i]) + ',' + csv::fmt(h.edges[i + 1]) + ',' + std::to_string(h.counts[i]) + '\n';
    fs::create_directories(run.out);
    csv::write_text(run.out / "layer_summary.csv", summary);
    csv::write_text(run.out / "angle_histogram.csv", hist);
    spdlog::info("analyzed {} layer(s), {} spatter angle(s)", maps.size(), angles.size());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

const std::set<std::string> kFitKeys{"seed", "jobs", "input", "x", "y", "name"};

int cmd_fit(const Run& run) {
    run.cfg.require_known(kFitKeys);
    const Config& c = run.cfg;
    for (const char* k : {"input", "x", "y"})
        if (!c.has(k)) throw ConfigError(std::string("config key '") + k + "' is required");
    require_file(run.path("input"), "fit input");
    std::pair<std::vector<double>, std::vector<double>> xy;
    try {
        xy = load_xy(run.path("input"), c.str("x"), c.str("y"));
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    const auto f = linfit(xy.first, xy.second);
    const std::string name = c.str("name", "fit");
    fs::create_directories(run.out);
    csv::write_text(run.out / (name + ".csv"), "name,slope,intercept,r_squared,n\n" + name + ',' + csv::fmt(f.slope) +
                                                   ',' + csv::fmt(f.intercept) + ',' + csv::fmt(f.r_squared) + ',' +
                                                   std::to_string(f.n) + '\n');
    const auto [lo, hi] = std::minmax_element(xy.first.begin(), xy.first.end());
    csv::write_text(run.out / (name + ".svg"),
                    svg::render({name,
                                 c.str("x"),
                                 c.str("y"),
                                 {{"data", xy.first, xy.second, false},
                                  {"fit", {*lo, *hi}, {f.slope * *lo + f.intercept, f.slope * *hi + f.intercept}, true}}}));
    spdlog::info("{}: slope {} intercept {} R^2 {}", name, csv::fmt(f.slope, 6), csv::fmt(f.intercept, 6),
                 csv::fmt(f.r_squared, 6));
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

const std::set<std::string> kCompareKeys{"seed",         "jobs",  "features",    "process_table", "svr.c",
                                         "svr.epsilon",  "svr.gamma", "folds",   "synthetic.count_noise",
                                         "synthetic.sa_noise_um"};

int cmd_compare(const Run& run) {
    run.cfg.require_known(kCompareKeys);
    const Config& c = run.cfg;
    SvrHyperparams hp;
    hp.c = c.num("svr.c", hp.c);
    hp.epsilon = c.num("svr.epsilon", hp.epsilon);
    hp.gamma_kernel = c.num("svr.gamma", hp.gamma_kernel);
    try {
        hp.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    ComparisonOptions opt;
    opt.folds = static_cast<std::size_t>(c.integer("folds", 0));
    opt.jobs = run.jobs;

    std::vector<LayerFeatureRecord> records;
    fs::create_directories(run.out);
    if (c.has("features")) {
        require_file(run.path("features"), "feature records");
        try {
            records = read_features_csv(run.path("features"));
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
    } else {
        if (!c.has("process_table")) throw ConfigError("either 'features' or 'process_table' is required");
        require_file(run.path("process_table"), "process table");
        SyntheticDatasetSpec spec;
        spec.seed = run.seed;
        spec.count_noise = c.num("synthetic.count_noise", spec.count_noise);
        spec.sa_noise_um = c.num("synthetic.sa_noise_um", spec.sa_noise_um);
        const auto table = load_process_table(run.path("process_table"));
        records = synth_feature_dataset(spec, table);
        csv::write_text(run.out / "features.csv", features_to_csv(records));
    }
    const auto rows = compare_models(records, hp, opt);
    csv::write_text(run.out / "comparison.csv", comparison_to_csv(rows));

    const auto canon = canonical_order(records);
    std::string preds = "layer,bar_id,sa_um";
    for (const auto& r : rows) preds += ',' + std::string(feature_set_id(r.feature_set));
    preds += '\n';
    for (std::size_t i = 0; i < canon.size(); ++i) {
        preds += std::to_string(canon[i].layer_index) + ',' + canon[i].bar_id + ',' + csv::fmt(canon[i].sa_um);
        for (const auto& r : rows) preds += ',' + csv::fmt(r.predictions[i]);
        preds += '\n';
    }
    csv::write_text(run.out / "predictions.csv", preds);

    svg::Plot plot{"Held-out RMSE by model input", "model (table order)", "RMSE (um)", {}};
    svg::Series s{"RMSE", {}, {}, true};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        s.x.push_back(static_cast<double>(i + 1));
        s.y.push_back(rows[i].metrics.rmse);
    }
    plot.series.push_back(std::move(s));
    csv::write_text(run.out / "comparison.svg", svg::render(plot));
    for (const auto& r : rows)
        spdlog::info("{:<12} RMSE {} MAE {}", std::string(feature_set_id(r.feature_set)), csv::fmt(r.metrics.rmse, 4),
                     csv::fmt(r.metrics.mae, 4));
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const Run& run) {
    const Config& c = run.cfg;
    std::set<std::string> fit_names;
    for (const auto& [k, v] : c.values()) {
        if (k == "seed" || k == "jobs" || k == "features" || k == "hatch_table" || k == "signatures" ||
            k == "bin_width_deg")
            continue;
        const auto dot = k.rfind('.');
        if (k.rfind("fit.", 0) == 0 && dot > 4) {
            const std::string field = k.substr(dot + 1);
            if (field == "input" || field == "x" || field == "y" || field == "x_label" || field == "y_label") {
                fit_names.insert(k.substr(4, dot - 4));
                continue;
            }
        }
        throw ConfigError("unknown config key '" + k + "'");
    }
    ReportInputs in;
    if (c.has("features")) {
        require_file(run.path("features"), "feature records");
        try {
            in.records = read_features_csv(run.path("features"));
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
    }
    if (c.has("hatch_table")) {
        require_file(run.path("hatch_table"), "hatch table");
        in.hatch_rows = load_hatch_table(run.path("hatch_table"));
    }
    for (const auto& f : run.paths("signatures")) {
        require_file(f, "signature map");
        in.signatures.push_back(layer_signature_from_json(read_json(f)));
    }
    in.angle_bin_edges = uniform_edges(0.0, 360.0, c.num("bin_width_deg", 30.0));
    for (const auto& name : fit_names) {
        const std::string p = "fit." + name + ".";
        for (const char* k : {"input", "x", "y"})
            if (!c.has(p + k)) throw ConfigError("config key '" + p + k + "' is required");
        require_file(run.path(p + "input"), "fit input");
        NamedFit nf;
        nf.name = name;
        nf.x_label = c.str(p + "x_label", c.str(p + "x"));
        nf.y_label = c.str(p + "y_label", c.str(p + "y"));
        try {
            std::tie(nf.x, nf.y) = load_xy(run.path(p + "input"), c.str(p + "x"), c.str(p + "y"));
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
        in.fits.push_back(std::move(nf));
    }
    const auto files = emit_report(run.out, in);
    spdlog::info("report: {} file(s) in {}", files.size(), run.out.string());
    return kExitOk;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("spatter");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("SPATTER_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"In-situ LPBF spatter and layer-roughness monitoring toolkit"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    std::size_t jobs_value = 0;
    const std::vector<std::string> names{"simulate", "register", "fpp", "analyze", "fit", "compare", "report"};
    const std::vector<std::string> help{"render synthetic frames, label maps, ground truth and fringe stacks",
                                        "extract and register per-melt-pool spatter signatures",
                                        "reconstruct layer height maps and roughness from fringe stacks",
                                        "summarize registered layer signatures",
                                        "least-squares line fit of two CSV columns",
                                        "compare SVR roughness models over the seven feature sets",
                                        "write CSV tables and SVG plots"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto* sub = app.add_subcommand(names[i], help[i]);
        sub->add_option("--config", g.config_path, "TOML-style key = value config file");
        sub->add_option("--seed", seed_value, "global seed (overrides config 'seed')")
            ->each([&](const std::string&) { g.seed = seed_value; });
        sub->add_option("--jobs", jobs_value, "worker threads (0 = all cores)")
            ->each([&](const std::string&) { g.jobs = jobs_value; });
        sub->add_option("--out", g.out, "output directory")->capture_default_str();
        if (names[i] == "register")
            sub->add_option("--segmenter", g.segmenter, "labelmap|reference|kmeans3|kmeans4");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        Run run;
        if (!g.config_path.empty()) {
            run.cfg = Config::load(g.config_path);
            run.base = fs::path(g.config_path).parent_path();
        }
        if (run.base.empty()) run.base = ".";
        run.out = g.out;
        run.seed = g.seed ? *g.seed : run.cfg.u64("seed", 0);
        const long long jobs = run.cfg.integer("jobs", 0);
        if (jobs < 0) throw ConfigError("config key 'jobs' must be >= 0");
        run.jobs = g.jobs ? *g.jobs : static_cast<std::size_t>(jobs);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "simulate") return cmd_simulate(run);
        if (cmd == "register") return cmd_register(run, g.segmenter);
        if (cmd == "fpp") return cmd_fpp(run);
        if (cmd == "analyze") return cmd_analyze(run);
        if (cmd == "fit") return cmd_fit(run);
        if (cmd == "compare") return cmd_compare(run);
        if (cmd == "report") return cmd_report(run);
        return kExitConfig;
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
}
