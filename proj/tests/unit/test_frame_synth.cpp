#include <gtest/gtest.h>

#include <algorithm>

#include "oracles/oracles.hpp"
#include "spatter/frame_synth.hpp"
#include "spatter/registration.hpp"

using namespace spatter;

namespace {

std::vector<Point2> spatter_pixels(const LabelMap& lm) {
    std::vector<Point2> pts;
    for (std::size_t y = 0; y < lm.height(); ++y)
        for (std::size_t x = 0; x < lm.width(); ++x)
            if (lm.at(x, y) == Label::spatter) pts.push_back({double(x), double(y)});
    return pts;
}

}  // namespace

TEST(SynthFrame, NoSpattersMeansNoSpatterPixels) {
    SceneSpec s;
    s.rng_seed = 3;
    const auto f = synth_frame(s);
    EXPECT_EQ(f.labels.count(Label::spatter), 0u);
    EXPECT_GT(f.labels.count(Label::melt_pool), 0u);
    EXPECT_EQ(f.truth.spatter_count(), 0u);
}

TEST(SynthFrame, SeedDeterminesEverything) {
    SceneSpec s;
    s.spatter_count = 5;
    s.rng_seed = 42;
    const auto a = synth_frame(s);
    const auto b = synth_frame(s);
    EXPECT_EQ(a.frame.pixels, b.frame.pixels);
    EXPECT_EQ(a.labels, b.labels);
    s.rng_seed = 43;
    EXPECT_NE(synth_frame(s).frame.pixels, a.frame.pixels);
}

TEST(SynthFrame, FiveSpattersGiveFiveClusters) {
    SceneSpec s;
    s.spatter_count = 5;
    s.rng_seed = 42;
    const auto f = synth_frame(s);
    const auto pts = spatter_pixels(f.labels);
    const auto want = oracle::dbscan(pts, 3.0, 2);
    EXPECT_EQ(want.clusters.size(), 5u);
    EXPECT_TRUE(want.noise.empty());
    EXPECT_EQ(count_spatters(f.labels).count, 5u);
}

TEST(SynthFrame, LabelsAgreeWithTruthAcrossSeeds) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        SceneSpec s;
        s.spatter_count = static_cast<int>(seed % 10);
        s.rng_seed = seed;
        s.scan_direction_deg = double(seed * 29 % 360);
        const auto f = synth_frame(s);
        ASSERT_EQ(f.truth.spatter_count(), std::size_t(s.spatter_count));
        const auto cc = connected_components(f.labels.mask(Label::spatter), 8);
        ASSERT_EQ(cc.components.size(), f.truth.spatter_count()) << "seed " << seed;
        for (const auto& t : f.truth.spatter_centroids) {
            double best = 1e9;
            for (const auto& c : cc.components)
                best = std::min(best, std::hypot(c.centroid.x - t.x, c.centroid.y - t.y));
            EXPECT_LT(best, 0.5) << "seed " << seed;
        }
        for (std::size_t i = 0; i < f.truth.spatter_count(); ++i) {
            EXPECT_NEAR(f.truth.ejection_angles_deg[i],
                        ejection_angle(f.truth.mp_center, f.truth.spatter_centroids[i], s.scan_direction_deg), 1e-9);
        }
    }
}

TEST(SynthFrame, ObjectsKeepClusterSeparation) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SceneSpec s;
        s.spatter_count = 8;
        s.rng_seed = 100 + seed;
        s.flare = FlareSpec{224, 30, 4, 14, 90, 2};
        const auto f = synth_frame(s);
        const auto pts = spatter_pixels(f.labels);
        EXPECT_EQ(oracle::dbscan(pts, s.separation_eps, 2).clusters.size(), 8u) << "seed " << seed;
        // Flare pixels are bright but stay background in the truth labels.
        for (const auto& spot : f.truth.flare_spots) {
            const auto x = std::size_t(spot.x), y = std::size_t(spot.y);
            EXPECT_EQ(f.labels.at(x, y), Label::background);
            EXPECT_GE(int(f.frame.pixels(x, y)), 60);
        }
    }
}

TEST(SynthFrame, OvercrowdedSceneIsInfeasible) {
    SceneSpec s;
    s.width = s.height = 32;
    s.mp_center = {16, 16};
    s.mp_radius = 4;
    s.spatter_max_distance = 14;
    s.spatter_count = 40;
    EXPECT_THROW(synth_frame(s), SceneInfeasible);
}

TEST(SynthFrame, RejectsInvalidSpecs) {
    SceneSpec s;
    s.spatter_count = -1;
    EXPECT_THROW(synth_frame(s), InvalidParameter);
    s = {};
    s.mp_center = {2, 2};
    EXPECT_THROW(synth_frame(s), InvalidParameter);
}

TEST(SynthFrame, GroundTruthJsonRoundTrip) {
    SceneSpec s;
    s.spatter_count = 4;
    s.rng_seed = 8;
    s.flare = FlareSpec{224, 30, 4, 14, 90, 2};
    const auto gt = synth_frame(s).truth;
    const auto back = ground_truth_from_json(to_json(gt));
    EXPECT_EQ(back.spatter_count(), gt.spatter_count());
    EXPECT_EQ(back.ejection_angles_deg, gt.ejection_angles_deg);
    EXPECT_EQ(back.flare_spots.size(), gt.flare_spots.size());
    auto j = to_json(gt);
    j["spatter_count"] = 9;
    EXPECT_THROW(ground_truth_from_json(j), FormatError);
}

TEST(LayerSequence, EmptyRegionGivesNoFrames) {
    LayerSceneSpec l;
    l.process = {250, 1000, 0.1, 0.04};
    l.region_mm = {0, 0, 0, 0};
    EXPECT_TRUE(synth_layer_sequence(l).empty());
}

TEST(LayerSequence, FramesCarryPlateMapping) {
    LayerSceneSpec l;
    l.process = {250, 1000, 0.1, 0.04};
    l.hatch_angle_deg = 74;
    l.region_mm = {1, 2, 3, 3};
    l.max_frames = 20;
    l.seed = 5;
    const auto seq = synth_layer_sequence(l);
    ASSERT_EQ(seq.size(), 20u);
    for (const auto& f : seq) {
        ASSERT_TRUE(f.scene.frame.meta.pixel_to_plate.has_value());
        const auto p = f.scene.frame.meta.pixel_to_plate->apply(f.scene.truth.mp_center);
        EXPECT_NEAR(p.x, f.mp_plate_mm.x, 1e-9);
        EXPECT_NEAR(p.y, f.mp_plate_mm.y, 1e-9);
        EXPECT_EQ(f.scene.frame.meta.frame_index, f.frame_index);
    }
    const auto again = synth_layer_sequence(l);
    for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(seq[i].scene.frame.pixels, again[i].scene.frame.pixels);
}

TEST(LayerSequence, MeanCountsFollowCalibration) {
    for (auto [power, want] : {std::pair{200.0, 1.4}, std::pair{350.0, 4.1}}) {
        LayerSceneSpec l;
        l.process = {power, 1000, 0.11, 0.04};
        l.hatch_angle_deg = 74;
        l.region_mm = {0, 0, 5, 5};
        l.max_frames = 240;
        l.seed = 2;
        const auto seq = synth_layer_sequence(l);
        ASSERT_GE(seq.size(), 200u);
        double sum = 0;
        for (const auto& f : seq) sum += double(f.scene.truth.spatter_count());
        EXPECT_NEAR(sum / double(seq.size()), want, 0.3) << power << " W";
    }
}

TEST(CountModel, MeanIsLinearAwayFromBump) {
    const SpatterCountModel m;
    EXPECT_NEAR(m.mean(200, 1000, 74), 1.44, 1e-3);
    EXPECT_NEAR(m.mean(300, 1000, 74) - m.mean(250, 1000, 74), 50 * 0.0188, 1e-3);
    EXPECT_GT(m.mean(250, 1000, 139), m.mean(250, 1000, 74) + 1.0);
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const int c = m.sample(r, 400, 100, 139);
        EXPECT_GE(c, 0);
        EXPECT_LE(c, m.max_count);
    }
}
