#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "spatter/fpp.hpp"
#include "support/paths.hpp"

using namespace spatter;
using namespace spatter::fpp;
using testing_support::TempDir;

namespace {

constexpr double pi = std::numbers::pi;

FringeStack single_pixel_stack(std::vector<double> intensities) {
    FringeStack s;
    s.schedule = PhaseShiftSchedule::uniform(intensities.size());
    for (double v : intensities) s.frames.emplace_back(1, 1, v);
    return s;
}

PhaseMap flat_phase(std::size_t w, std::size_t h, std::vector<double> phase) {
    return {Grid<double>(w, h, std::move(phase)), Grid<double>(w, h, 50.0), Grid<std::uint8_t>(w, h, 1)};
}

}  // namespace

TEST(Schedule, UniformShiftsAreBalanced) {
    for (std::size_t n = 3; n < 12; ++n) {
        const auto s = PhaseShiftSchedule::uniform(n);
        ASSERT_EQ(s.size(), n);
        EXPECT_DOUBLE_EQ(s.shifts[0], 0.0);
        EXPECT_NEAR(s.shifts[1], 2 * pi / double(n), 1e-15);
        EXPECT_TRUE(s.balanced());
    }
    EXPECT_THROW(PhaseShiftSchedule::uniform(2), InvalidParameter);
    EXPECT_FALSE((PhaseShiftSchedule{{0.0, 0.5, 1.0}}).balanced());
}

TEST(Gamma, Examples) {
    auto s = single_pixel_stack({128, 255, 0});
    s.gamma = 1.0;
    EXPECT_EQ(gamma_correct(s).frames[0][0], 128.0);
    s.gamma = 2.2;
    const auto c = gamma_correct(s);
    EXPECT_NEAR(c.frames[0][0], 186.415, 1e-3);
    EXPECT_DOUBLE_EQ(c.frames[1][0], 255.0);
    EXPECT_DOUBLE_EQ(c.frames[2][0], 0.0);
    EXPECT_DOUBLE_EQ(c.gamma, 1.0);
}

TEST(Gamma, CorrectionInvertsTheForwardCurve) {
    for (double g : {0.5, 1.8, 2.2, 3.0}) {
        for (int v = 0; v <= 255; v += 5) {
            auto s = single_pixel_stack({255.0 * std::pow(v / 255.0, g), 0, 0});
            s.gamma = g;
            EXPECT_NEAR(gamma_correct(s).frames[0][0], v, 1e-9);
        }
    }
}

TEST(Gamma, QuantizedRoundTripStaysClose) {
    // One 8-bit quantisation step in the gamma domain expands by at most
    // the local slope of the inverse curve.
    const double g = 2.2;
    for (int v = 40; v <= 255; ++v) {
        const double q = std::round(255.0 * std::pow(v / 255.0, g));
        auto s = single_pixel_stack({q, 0, 0});
        s.gamma = g;
        const double slope = std::pow(std::max(q - 0.5, 0.5) / 255.0, 1.0 / g - 1.0) / g;
        EXPECT_NEAR(gamma_correct(s).frames[0][0], v, 0.5 * slope + 1e-9) << v;
    }
}

TEST(WrapPhase, ThreeStepExamples) {
    EXPECT_NEAR(wrap_phase(single_pixel_stack({3, 1.5, 1.5}), 0.1).phase[0], 0.0, 1e-12);
    const auto pm = wrap_phase(single_pixel_stack({2, 2 - std::sqrt(3.0) / 2, 2 + std::sqrt(3.0) / 2}), 0.1);
    EXPECT_NEAR(pm.phase[0], pi / 2, 1e-12);
    EXPECT_NEAR(pm.modulation[0], 1.0, 1e-12);
    EXPECT_NEAR(wrap_phase(single_pixel_stack({2, 1.134, 2.866}), 0.1).phase[0], pi / 2, 1e-3);
}

TEST(WrapPhase, UniformIntensityIsInvalid) {
    const auto pm = wrap_phase(single_pixel_stack({80, 80, 80, 80}));
    EXPECT_EQ(pm.valid[0], 0);
    EXPECT_LT(pm.modulation[0], 1e-9);
}

TEST(WrapPhase, RecoversRandomPhases) {
    Rng r(5);
    for (std::size_t n : {3u, 4u, 7u}) {
        const auto sched = PhaseShiftSchedule::uniform(n);
        double worst = 0;
        for (int t = 0; t < 10000; ++t) {
            const double phi = r.uniform(-pi, pi);
            const double a = r.uniform(50, 150), b = r.uniform(10, 100);
            FringeStack s;
            s.schedule = sched;
            for (double d : sched.shifts) s.frames.emplace_back(1, 1, a + b * std::cos(phi + d));
            const auto pm = wrap_phase(s);
            worst = std::max(worst, std::abs(wrap_to_pi(pm.phase[0] - phi)));
            ASSERT_GT(pm.phase[0], -pi);
            ASSERT_LE(pm.phase[0], pi);
        }
        EXPECT_LT(worst, 1e-9) << "N=" << n;
    }
}

TEST(WrapPhase, ShapeErrors) {
    auto s = single_pixel_stack({1, 2, 3});
    s.frames.pop_back();
    EXPECT_THROW(wrap_phase(s), DimensionMismatch);
    s = single_pixel_stack({1, 2, 3});
    s.frames[1] = Grid<double>(2, 1, 0.0);
    EXPECT_THROW(wrap_phase(s), DimensionMismatch);
}

TEST(Unwrap, IdenticalMapsGiveZero) {
    const auto pm = flat_phase(3, 2, {0.1, -3.0, 3.1, 1.0, 2.0, -1.0});
    const auto u = unwrap_reference(pm, pm);
    for (std::size_t p = 0; p < 6; ++p) EXPECT_EQ(u.phase.phase[p], 0.0);
    EXPECT_TRUE(u.ambiguous.empty());
    EXPECT_EQ(u.regions, 1u);
}

TEST(Unwrap, RampSpanningThreeWraps) {
    const std::size_t w = 64, h = 8;
    HeightMap hm(w, h);
    FringeModel m;
    m.quantize = false;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) hm.height_um(x, y) = m.k_h_um_per_rad * (-3 * pi + 6 * pi * double(x) / double(w - 1));
    const auto [obj, ref] = synth_fringes(hm, PhaseShiftSchedule::uniform(4), m);
    const auto u = unwrap_reference(wrap_phase(obj), wrap_phase(ref));
    const auto got = phase_to_height(u.phase, m.k_h_um_per_rad);
    double worst = 0;
    for (std::size_t p = 0; p < hm.height_um.size(); ++p)
        worst = std::max(worst, std::abs(got.height_um[p] - hm.height_um[p]) / m.k_h_um_per_rad);
    EXPECT_LT(worst, 1e-6);
}

TEST(Unwrap, HalfCycleStepIsFlagged) {
    const auto obj = flat_phase(2, 1, {0.0, pi});
    const auto ref = flat_phase(2, 1, {0.0, 0.0});
    const auto u = unwrap_reference(obj, ref);
    EXPECT_EQ(u.ambiguous, std::vector<std::size_t>{1});
}

TEST(Unwrap, SeparateRegionsAreCentred) {
    auto obj = flat_phase(5, 1, {0.5, 0.5, 0.0, 2.0, 2.5});
    obj.valid[2] = 0;
    const auto ref = flat_phase(5, 1, {0, 0, 0, 0, 0});
    const auto u = unwrap_reference(obj, ref);
    EXPECT_EQ(u.regions, 2u);
    EXPECT_NEAR(u.phase.phase[0], 0.5, 1e-12);
    EXPECT_NEAR(u.phase.phase[4], 2.5, 1e-12);
    EXPECT_EQ(u.phase.valid[2], 0);
    auto none = ref;
    none.valid = Grid<std::uint8_t>(5, 1, 0);
    EXPECT_THROW(unwrap_reference(obj, none), DegenerateInput);
}

TEST(Height, ScalesPhase) {
    const auto hm = phase_to_height(flat_phase(1, 1, {pi}), 10.0);
    EXPECT_NEAR(hm.height_um[0], 31.4159, 1e-4);
    EXPECT_THROW(phase_to_height(flat_phase(1, 1, {0}), 0.0), InvalidParameter);
}

TEST(Roughness, Examples) {
    EXPECT_DOUBLE_EQ(compute_sa(HeightMap(Grid<double>(4, 1, std::vector<double>{0, 1, 2, 3}))).sa_um, 1.0);
    const auto r = compute_sa(HeightMap(Grid<double>(2, 2, std::vector<double>{5, -5, -5, 5})));
    EXPECT_DOUBLE_EQ(r.sa_um, 5.0);
    EXPECT_DOUBLE_EQ(r.z_std_um, 5.0);
    EXPECT_EQ(r.n_valid, 4u);
    EXPECT_THROW(compute_sa(HeightMap(1, 1)), DegenerateInput);
}

TEST(Roughness, OffsetAndScaleProperties) {
    Rng r(8);
    for (int t = 0; t < 200; ++t) {
        Grid<double> g(7, 5, 0.0);
        for (auto& v : g.values()) v = r.uniform(-20, 20);
        HeightMap hm(g);
        hm.valid[3] = 0;
        const double c = r.uniform(-100, 100), a = r.uniform(-4, 4);
        HeightMap shifted = hm, scaled = hm;
        for (auto& v : shifted.height_um.values()) v += c;
        for (auto& v : scaled.height_um.values()) v *= a;
        const auto base = compute_sa(hm);
        EXPECT_NEAR(compute_sa(shifted).sa_um, base.sa_um, 1e-9);
        EXPECT_NEAR(compute_sa(scaled).sa_um, std::abs(a) * base.sa_um, 1e-9);
        EXPECT_GE(base.z_std_um + 1e-12, base.sa_um);
        EXPECT_EQ(base.n_valid, 34u);
    }
}

TEST(Roughness, RegionIsClamped) {
    HeightMap hm(Grid<double>(4, 4, std::vector<double>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 3, 0, 0, 3, 1}));
    const auto r = compute_sa(hm, {2, 2, 10, 10});
    EXPECT_EQ(r.region.width, 2u);
    EXPECT_EQ(r.region.height, 2u);
    EXPECT_DOUBLE_EQ(r.sa_um, 1.0);
    EXPECT_THROW(compute_sa(hm, {4, 0, 1, 1}), InvalidParameter);
}

TEST(FppFiles, FringeStackRoundTrip) {
    TempDir dir("fpp");
    HeightMap hm(16, 8);
    FringeModel m;
    m.gamma = 2.2;
    const auto [obj, ref] = synth_fringes(hm, PhaseShiftSchedule::uniform(3), m);
    write_fringe_stack(dir.path(), "obj", obj, {m.period_px, m.k_h_um_per_rad});
    const auto [back, hdr] = read_fringe_stack(dir / "obj.json");
    EXPECT_DOUBLE_EQ(back.gamma, 2.2);
    EXPECT_DOUBLE_EQ(hdr.k_h_um_per_rad, 10.0);
    ASSERT_EQ(back.frames.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.frames[i], obj.frames[i]);
    std::ofstream(dir / "obj_1.pgm", std::ios::binary) << "P5\n16 8\n255\nxx";
    try {
        read_fringe_stack(dir / "obj.json");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("obj_1.pgm"), std::string::npos);
    }
}

TEST(FppFiles, HeightMapRoundTripKeepsInvalidPixels) {
    TempDir dir("fpp");
    HeightMap hm(Grid<double>(3, 1, std::vector<double>{1.5, -2.25, 7}));
    hm.valid[1] = 0;
    write_height_map(dir / "h.json", hm);
    const auto back = read_height_map(dir / "h.json");
    EXPECT_EQ(back.valid, hm.valid);
    EXPECT_EQ(back.height_um[0], 1.5);
    EXPECT_EQ(back.height_um[2], 7.0);
}

TEST(FppFiles, RoughnessCsvAppends) {
    TempDir dir("fpp");
    RoughnessResult r;
    r.sa_um = 1.25;
    r.z_std_um = 2;
    r.n_valid = 10;
    append_roughness_row(dir / "r.csv", 66, "B1", r);
    append_roughness_row(dir / "r.csv", 67, "B2", r);
    std::ifstream in(dir / "r.csv");
    const std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(all, "layer,bar,sa_um,z_std_um,n_valid\n66,B1,1.25,2,10\n67,B2,1.25,2,10\n");
}
