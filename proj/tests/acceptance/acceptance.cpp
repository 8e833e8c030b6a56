// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "spatter/spatter.hpp"
#include "support/cli.hpp"
#include "support/paths.hpp"

using namespace spatter;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) { return csv::fmt(v, digits); }

// --- AC1 ----------------------------------------------------------------------

Outcome energy_densities() {
    const auto t0 = Clock::now();
    const auto rows = load_process_table(ts::fixture("table1.csv"));
    double worst = 0.0;
    for (const auto& r : rows) {
        const auto e = compute_energy_densities(r.process);
        worst = std::max(worst, std::abs(e.sed_j_mm2 - r.sed_j_mm2) / r.sed_j_mm2);
        worst = std::max(worst, std::abs(e.ved_j_mm3 - r.ved_j_mm3) / r.ved_j_mm3);
    }
    const double dt = seconds_since(t0);
    return {rows.size() == 16 && worst <= 0.005 && dt < 1.0,
            std::to_string(rows.size()) + " rows, worst rel. error " + fmt(100 * worst) + "%, " + fmt(dt * 1e3) + " ms"};
}

// --- AC2 ----------------------------------------------------------------------

Outcome hatch_normalization() {
    const std::pair<double, double> cases[] = {{208, 28}, {275, 95}, {317, 137}};
    bool ok = true;
    std::string d;
    for (auto [in, want] : cases) {
        const double got = normalize_hatch_angle(in);
        ok = ok && got == want;
        d += fmt(in) + "->" + fmt(got) + " ";
    }
    return {ok, d};
}

// --- AC3 ----------------------------------------------------------------------

Outcome linear_fits() {
    bool ok = true;
    std::string d;
    const struct {
        const char* file;
        const char* x;
        double sign;
    } sweeps[] = {{"tableA1.csv", "power_w", 1.0}, {"tableA2.csv", "speed_m_s", -1.0}};
    for (const auto& s : sweeps) {
        const auto [x, y] = load_xy(ts::fixture(s.file), s.x, "avg_spatter_count");
        const auto f = linfit(x, y);
        const auto o = oracle::ols(x, y);
        ok = ok && f.r_squared >= 0.97 && f.slope * s.sign > 0 && std::abs(f.slope - o.slope) <= 1e-9 &&
             std::abs(f.intercept - o.intercept) <= 1e-9;
        d += std::string(s.x) + ": slope " + fmt(f.slope, 6) + " intercept " + fmt(f.intercept, 6) + " R2 " +
             fmt(f.r_squared) + "; ";
    }
    return {ok, d};
}

// --- AC4 ----------------------------------------------------------------------

Outcome fpp_round_trip() {
    using namespace spatter::fpp;
    const auto t0 = Clock::now();
    const std::size_t n = 256;
    HeightMap truth(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double u = double(x) / double(n - 1), v = double(y) / double(n - 1);
            truth.height_um(x, y) = 30 * std::sin(2 * kPi * 1.3 * u) * std::cos(2 * kPi * 0.8 * v) + 20 * (u - 0.5) +
                                    10 * std::sin(9 * u + 5 * v);
        }
    auto vals = truth.height_um.values();
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    const double mn = *lo, span = *hi - *lo;
    for (auto& h : vals) h = (h - mn) / span * 100.0;
    std::vector<double> sorted(vals.begin(), vals.end());
    std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(sorted.size() / 2), sorted.end());
    const double med = sorted[sorted.size() / 2];
    for (auto& h : vals) h -= med;

    FringeModel m;
    m.gamma = 2.2;
    const auto [obj, ref] = synth_fringes(truth, PhaseShiftSchedule::uniform(3), m);
    const auto un = unwrap_reference(wrap_phase(gamma_correct(obj)), wrap_phase(gamma_correct(ref)));
    const auto hm = phase_to_height(un.phase, m.k_h_um_per_rad);
    double se = 0.0;
    std::size_t valid = 0;
    for (std::size_t p = 0; p < hm.height_um.size(); ++p) {
        if (!hm.valid[p]) continue;
        const double e = hm.height_um[p] - truth.height_um[p];
        se += e * e;
        ++valid;
    }
    const double rms = std::sqrt(se / double(std::max<std::size_t>(valid, 1)));
    const double sa_true = compute_sa(truth).sa_um, sa = compute_sa(hm).sa_um;
    const double dt = seconds_since(t0);
    const double sa_err = std::abs(sa - sa_true) / sa_true;
    return {valid == n * n && rms < 0.001 * 100.0 && sa_err <= 0.005 && dt < 5.0,
            "RMS " + fmt(rms) + " um (" + fmt(rms) + "% of P-V), Sa " + fmt(sa, 6) + " vs " + fmt(sa_true, 6) + ", " +
                fmt(dt, 3) + " s"};
}

// --- AC5 ----------------------------------------------------------------------

Outcome phase_recovery() {
    using namespace spatter::fpp;
    const auto sched = PhaseShiftSchedule::uniform();
    Rng r(5);
    double worst = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const double phi = r.uniform(-kPi, kPi);
        FringeStack s;
        s.schedule = sched;
        for (double d : sched.shifts) s.frames.emplace_back(1, 1, 128.0 + 100.0 * std::cos(phi + d));
        worst = std::max(worst, std::abs(wrap_to_pi(wrap_phase(s).phase[0] - phi)));
    }
    return {worst < 1e-9, "max error " + fmt(worst, 3) + " rad over 10000 phases"};
}

// --- AC6 ----------------------------------------------------------------------

Outcome dbscan_equivalence() {
    Rng r(606);
    int equal = 0;
    const int cases = 200;
    for (int t = 0; t < cases; ++t) {
        const auto n = std::size_t(r.uniform_int(0, 60));
        const double eps = t % 2 ? r.uniform(0.5, 8.0) : double(r.uniform_int(1, 5));
        const int min_pts = int(r.uniform_int(1, 6));
        const bool lattice = t % 3 != 0;  // integer coordinates create exact-eps ties
        std::vector<Point2> pts(n);
        for (auto& p : pts) {
            p = {r.uniform(0, 40), r.uniform(0, 40)};
            if (lattice) p = {std::round(p.x), std::round(p.y)};
        }
        const auto got = dbscan(pts, {eps, min_pts});
        oracle::Clustering g;
        for (const auto& c : got.clusters) g.clusters.insert(std::set<std::size_t>(c.begin(), c.end()));
        g.noise.insert(got.noise.begin(), got.noise.end());
        const auto want = oracle::dbscan(pts, eps, min_pts);
        equal += g.clusters == want.clusters && g.noise == want.noise;
    }
    return {equal == cases, std::to_string(equal) + "/" + std::to_string(cases) + " instances identical"};
}

// --- AC7 ----------------------------------------------------------------------

std::size_t false_clusters(const SpatterCount& sc, const GroundTruth& gt) {
    std::size_t n = 0;
    for (const auto& c : sc.centroids) {
        bool matched = false;
        for (const auto& t : gt.spatter_centroids) matched = matched || std::hypot(c.x - t.x, c.y - t.y) <= 3.0;
        n += !matched;
    }
    return n;
}

Outcome registration_end_to_end() {
    const int frames = 100;
    int gt_ok = 0, ref_ok = 0, k3_false = 0, k4_false = 0;
    for (int i = 0; i < frames; ++i) {
        SceneSpec s;
        s.spatter_count = i % 9;
        s.rng_seed = 1000 + std::uint64_t(i);
        s.scan_direction_deg = double((i * 37) % 360);
        s.flare = FlareSpec{224, 30, 4, 14, 90, 2};
        const auto f = synth_frame(s);
        const auto want = std::size_t(s.spatter_count);
        gt_ok += count_spatters(f.labels).count == want;
        ref_ok += count_spatters(reference_segment(f.frame)).count == want;
        k3_false += false_clusters(count_spatters(kmeans_segment(f.frame, 3, std::uint64_t(i))), f.truth) > 0;
        k4_false += false_clusters(count_spatters(kmeans_segment(f.frame, 4, std::uint64_t(i))), f.truth) > 0;
    }
    return {gt_ok == frames && ref_ok >= 95 && k3_false >= 90 && k4_false >= 90,
            "label maps " + std::to_string(gt_ok) + "%, reference " + std::to_string(ref_ok) +
                "%, false clusters K=3 " + std::to_string(k3_false) + "%, K=4 " + std::to_string(k4_false) + "%"};
}

// --- AC8 ----------------------------------------------------------------------

Outcome svr_correctness() {
    Rng r(808);
    double worst_kkt = 0.0, worst_qp = 0.0, worst_shift = 0.0;
    for (int t = 0; t < 50; ++t) {
        const auto n = std::size_t(r.uniform_int(2, 10));
        const auto d = std::size_t(r.uniform_int(1, 4));
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(d);
            for (auto& v : row) v = r.uniform(-5, 5);
            x.push_back(row);
            y.push_back(r.uniform(-3, 3) + 0.5 * row[0]);
        }
        SvrHyperparams hp;
        hp.c = r.uniform(0.2, 20);
        hp.epsilon = r.uniform(0.0, 1.0);
        hp.gamma_kernel = t % 2 ? r.uniform(0.1, 2.0) : 0.0;
        const auto m = train_svr(x, y, hp);

        // KKT conditions of the trained model.
        const double c = hp.c, eps = hp.epsilon, tol = 1e-9 * c;
        double kkt = std::abs(std::accumulate(m.coef.begin(), m.coef.end(), 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            const double res = y[i] - predict(m, x[i]);
            const double b = m.coef[i];
            kkt = std::max(kkt, std::abs(b) - c);
            if (std::abs(b) <= tol) kkt = std::max(kkt, std::abs(res) - eps);
            else if (std::abs(b) >= c - tol) kkt = std::max(kkt, eps - (b > 0 ? res : -res));
            else kkt = std::max(kkt, std::abs((b > 0 ? res : -res) - eps));
        }
        worst_kkt = std::max(worst_kkt, kkt);

        // Independent QP solver on the same kernel matrix and centred targets.
        std::vector<double> k(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) k[i * n + j] = gaussian_kernel(m.support[i], m.support[j], m.gamma);
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
        std::vector<double> yc(y);
        for (auto& v : yc) v -= mean;
        const auto q = oracle::svr_dual(k, yc, hp.c, hp.epsilon);
        for (std::size_t i = 0; i < n; ++i) worst_qp = std::max(worst_qp, std::abs(q.beta[i] - m.coef[i]));

        const double shift = r.uniform(-50, 50);
        auto ys = y;
        for (auto& v : ys) v += shift;
        const auto ms = train_svr(x, ys, hp);
        for (const auto& row : x) worst_shift = std::max(worst_shift, std::abs(predict(ms, row) - predict(m, row) - shift));
    }
    return {worst_kkt < 1e-6 && worst_qp < 1e-4 && worst_shift <= 1e-8,
            "KKT " + fmt(worst_kkt, 3) + ", QP " + fmt(worst_qp, 3) + ", shift " + fmt(worst_shift, 3)};
}

// --- AC9 ----------------------------------------------------------------------

Outcome model_ordering() {
    const auto table = load_process_table(ts::fixture("table1.csv"));
    const auto idx = [](FeatureSet f) {
        return std::size_t(std::find(kAllFeatureSets.begin(), kAllFeatureSets.end(), f) - kAllFeatureSets.begin());
    };
    const int reps = 100;
    int wins = 0;
    ComparisonOptions opt;
    opt.jobs = 0;
    for (int rep = 0; rep < reps; ++rep) {
        SyntheticDatasetSpec spec;
        spec.seed = std::uint64_t(rep + 1);
        const auto data = synth_feature_dataset(spec, table);
        if (data.size() != 36) return {false, "dataset has " + std::to_string(data.size()) + " records"};
        const auto rows = compare_models(data, {}, opt);
        const double vc = rows[idx(FeatureSet::ved_count)].metrics.rmse;
        wins += vc < rows[idx(FeatureSet::ved)].metrics.rmse && vc < rows[idx(FeatureSet::pvhs)].metrics.rmse;
    }
    return {wins >= 95, "VED+count strictly best in " + std::to_string(wins) + "/" + std::to_string(reps)};
}

// --- AC10 ---------------------------------------------------------------------

Outcome metric_formulas() {
    const auto m = prediction_metrics(std::vector<double>{3, 5}, std::vector<double>{2, 4});
    const bool ok = m.rmse == 1.0 && m.mae == 1.0 && m.mre_percent && *m.mre_percent == 37.5;
    return {ok, "RMSE " + fmt(m.rmse) + " MAE " + fmt(m.mae) + " MRE " +
                    (m.mre_percent ? fmt(*m.mre_percent) : std::string("undefined")) + "%"};
}

// --- AC11 ---------------------------------------------------------------------

Outcome cli_determinism() {
    ts::TempDir dir("acceptance");
    auto config = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return ts::quoted(dir / name);
    };
    auto str = [](const fs::path& p) { return "\"" + p.string() + "\""; };
    const fs::path sim = dir / "sim_a";
    struct Step {
        std::string name, args;
    };
    const std::vector<Step> steps{
        {"simulate", "simulate --config " +
                         config("sim.toml", "seed = 31\n[layer]\nframes = 6\npower_w = 320\n[scene]\nflare = true\n"
                                            "[fpp]\nenabled = true\nwidth = 128\nheight = 96\n")},
        {"register", "register --segmenter kmeans4 --config " +
                         config("reg.toml", "input = " + str(sim / "manifest.json") + "\nkmeans.seed = 3\n")},
        {"fpp", "fpp --config " + config("fpp.toml", "object = " + str(sim / "fringes/object.json") +
                                                         "\nreference = " + str(sim / "fringes/reference.json") +
                                                         "\nlayer = 66\nbar = \"B1\"\n")},
        {"analyze", "analyze --config " + config("an.toml", "signatures = " + str(ts::fixture("layer66_signature.json")) +
                                                                "\nbin_width_deg = 45\n")},
        {"fit", "fit --config " + ts::quoted(ts::config_file("fit_power.toml"))},
        {"compare", "compare --config " + config("cmp.toml", "seed = 13\nprocess_table = " +
                                                                  str(ts::fixture("table1.csv")) + "\nfolds = 6\n")},
        {"report", "report --config " + ts::quoted(ts::config_file("report.toml"))},
    };
    // The first simulate output feeds the downstream commands.
    const auto boot = ts::run_cli(steps[0].args + " --out " + ts::quoted(sim));
    if (boot.code != 0) return {false, "simulate failed: " + boot.output};

    std::string bad;
    for (const auto& s : steps) {
        const auto a = dir / (s.name + "_1"), b = dir / (s.name + "_2"), c = dir / (s.name + "_3");
        const auto ra = ts::run_cli(s.args + " --out " + ts::quoted(a));
        const auto rb = ts::run_cli(s.args + " --out " + ts::quoted(b));
        const auto rc = ts::run_cli(s.args + " --out " + ts::quoted(c) + " --jobs 3");
        const bool same = ra.code == 0 && rb.code == 0 && rc.code == 0 && fs::exists(a) &&
                          ts::file_tree(a) == ts::file_tree(b) && ts::file_tree(a) == ts::file_tree(c) &&
                          !ts::file_tree(a).empty();
        if (!same) bad += s.name + " ";
    }
    return {bad.empty(), bad.empty() ? "7 subcommands byte-identical across reruns and job counts"
                                     : "differs or failed: " + bad};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"AC1 energy densities", energy_densities},
        {"AC2 hatch normalization", hatch_normalization},
        {"AC3 linear fits", linear_fits},
        {"AC4 FPP round trip", fpp_round_trip},
        {"AC5 phase recovery", phase_recovery},
        {"AC6 DBSCAN oracle equivalence", dbscan_equivalence},
        {"AC7 end-to-end registration", registration_end_to_end},
        {"AC8 SVR correctness", svr_correctness},
        {"AC9 model ordering", model_ordering},
        {"AC10 metric formulas", metric_formulas},
        {"AC11 CLI determinism", cli_determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
