#include <gtest/gtest.h>

#include <numeric>

#include "oracles/oracles.hpp"
#include "spatter/analytics.hpp"
#include "spatter/svr.hpp"
#include "support/paths.hpp"

using namespace spatter;

namespace {

struct Problem {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    SvrHyperparams hp;
};

Problem random_problem(Rng& r) {
    Problem p;
    const auto n = std::size_t(r.uniform_int(2, 10));
    const auto d = std::size_t(r.uniform_int(1, 3));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(d);
        for (auto& v : row) v = r.uniform(-5, 5);
        p.x.push_back(row);
        p.y.push_back(r.uniform(-3, 3) + row[0]);
    }
    p.hp.c = r.uniform(0.2, 20);
    p.hp.epsilon = r.uniform(0.0, 1.0);
    p.hp.gamma_kernel = r.uniform(0.1, 2.0);
    return p;
}

std::vector<double> kernel_matrix(const SvrModel& m) {
    const std::size_t n = m.support.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k[i * n + j] = gaussian_kernel(m.support[i], m.support[j], m.gamma);
    return k;
}

/// Largest violation of the optimality conditions of the trained model.
double kkt_residual(const SvrModel& m, const Problem& p) {
    double worst = std::abs(std::accumulate(m.coef.begin(), m.coef.end(), 0.0));
    const double c = p.hp.c, eps = p.hp.epsilon, tol = 1e-9 * c;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        const double r = p.y[i] - predict(m, p.x[i]);
        const double b = m.coef[i];
        if (b < -c - tol || b > c + tol) worst = std::max(worst, std::abs(b) - c);
        if (std::abs(b) <= tol) {
            worst = std::max(worst, std::abs(r) - eps);
        } else if (std::abs(b) >= c - tol) {
            worst = std::max(worst, eps - (b > 0 ? r : -r));
        } else {
            worst = std::max(worst, std::abs((b > 0 ? r : -r) - eps));
        }
    }
    return worst;
}

LayerFeatureRecord record(std::string bar, long long layer, double ved, double count, double sa) {
    LayerFeatureRecord r;
    r.bar_id = std::move(bar);
    r.layer_index = layer;
    r.power_w = 200 + ved;
    r.speed_mm_s = 1000;
    r.hatch_space_mm = 0.1;
    r.ved_j_mm3 = ved;
    r.hatch_angle_deg = 74;
    r.mean_spatter_count = count;
    r.sa_um = sa;
    return r;
}

}  // namespace

TEST(EpsilonLoss, Examples) {
    EXPECT_DOUBLE_EQ(epsilon_loss(1.0, 1.3, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(epsilon_loss(1.0, 2.0, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(epsilon_loss(1.0, -1.0, 0.5), 1.5);
    EXPECT_DOUBLE_EQ(epsilon_loss(1.0, 1.5, 0.5), 0.0);
    EXPECT_THROW(epsilon_loss(0, 0, -1), InvalidParameter);
}

TEST(Svr, ConstantTargetsPredictTheConstant) {
    const std::vector<std::vector<double>> x{{0}, {1}, {2}, {3}};
    const std::vector<double> y(4, 7.5);
    const auto m = train_svr(x, y);
    for (double q : {-2.0, 0.5, 10.0}) EXPECT_NEAR(predict(m, std::vector<double>{q}), 7.5, 1e-12);
    for (double b : m.coef) EXPECT_EQ(b, 0.0);
}

TEST(Svr, SinglePointIsItsOwnPrediction) {
    const auto m = train_svr({{3.0, 4.0}}, std::vector<double>{2.0});
    EXPECT_NEAR(predict(m, std::vector<double>{3.0, 4.0}), 2.0, 1e-12);
}

TEST(Svr, PointsInsideTubeCarryNoWeight) {
    // Targets within epsilon of their mean: the flat function is optimal.
    const std::vector<std::vector<double>> x{{0}, {1}, {2}, {3}, {4}};
    const std::vector<double> y{1.0, 1.2, 0.9, 1.1, 1.05};
    SvrHyperparams hp;
    hp.epsilon = 0.5;
    const auto m = train_svr(x, y, hp);
    for (double b : m.coef) EXPECT_EQ(b, 0.0);
}

TEST(Svr, MatchesReferenceQp) {
    Rng r(404);
    for (int t = 0; t < 30; ++t) {
        const auto p = random_problem(r);
        const auto m = train_svr(p.x, p.y, p.hp);
        const double mean = std::accumulate(p.y.begin(), p.y.end(), 0.0) / double(p.y.size());
        std::vector<double> yc(p.y);
        for (auto& v : yc) v -= mean;
        const auto q = oracle::svr_dual(kernel_matrix(m), yc, p.hp.c, p.hp.epsilon);
        for (std::size_t i = 0; i < yc.size(); ++i) EXPECT_NEAR(m.coef[i], q.beta[i], 1e-4) << "case " << t;
        EXPECT_NEAR(m.diagnostics.dual_objective, q.objective, 1e-6 * std::max(1.0, std::abs(q.objective)));
        EXPECT_GE(m.diagnostics.dual_objective, q.objective - 1e-9 * std::max(1.0, std::abs(q.objective)));
    }
}

TEST(Svr, SatisfiesOptimalityConditions) {
    Rng r(405);
    for (int t = 0; t < 50; ++t) {
        const auto p = random_problem(r);
        const auto m = train_svr(p.x, p.y, p.hp);
        EXPECT_LT(kkt_residual(m, p), 1e-6) << "case " << t;
    }
}

TEST(Svr, TargetShiftEquivariance) {
    Rng r(406);
    for (int t = 0; t < 30; ++t) {
        auto p = random_problem(r);
        const auto m = train_svr(p.x, p.y, p.hp);
        const double shift = r.uniform(-100, 100);
        auto ys = p.y;
        for (auto& v : ys) v += shift;
        const auto ms = train_svr(p.x, ys, p.hp);
        for (const auto& row : p.x) EXPECT_NEAR(predict(ms, row), predict(m, row) + shift, 1e-8);
    }
}

TEST(Svr, InputErrors) {
    EXPECT_THROW(train_svr(std::vector<std::vector<double>>{}, std::vector<double>{}), DegenerateInput);
    EXPECT_THROW(train_svr({{1.0}, {2.0, 3.0}}, std::vector<double>{1, 2}), DimensionMismatch);
    const auto m = train_svr({{1.0}, {2.0}}, std::vector<double>{1, 2});
    EXPECT_THROW(predict(m, std::vector<double>{1, 2}), DimensionMismatch);
    SvrHyperparams bad;
    bad.c = 0;
    EXPECT_THROW(train_svr({{1.0}}, std::vector<double>{1}, bad), InvalidParameter);
}

TEST(Svr, FeatureSetMismatchIsRejected) {
    std::vector<LayerFeatureRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(record("b" + std::to_string(i), 66, 40.0 + 10 * i, 1 + i, 5 + i));
    const auto m = train_svr(recs, FeatureSet::ved_count);
    EXPECT_EQ(m.feature_set, "VED+count");
    EXPECT_NO_THROW(predict(m, recs[0], FeatureSet::ved_count));
    EXPECT_THROW(predict(m, recs[0], FeatureSet::ved), InvalidParameter);
}

TEST(FeatureSets, IdsRoundTripAndAngleIsFolded) {
    for (auto f : kAllFeatureSets) EXPECT_EQ(parse_feature_set(feature_set_id(f)), f);
    EXPECT_THROW(parse_feature_set("VED+power"), InvalidParameter);
    auto r = record("1", 68, 50, 2, 9);
    r.hatch_angle_deg = 208;
    EXPECT_EQ(extract_features(r, FeatureSet::ved_angle), (std::vector<double>{50, 28}));
    EXPECT_EQ(extract_features(r, FeatureSet::pvhs).size(), 3u);
}

TEST(CompareModels, NeedsEightRecords) {
    std::vector<LayerFeatureRecord> recs(7, record("a", 1, 50, 2, 8));
    EXPECT_THROW(compare_models(recs), DegenerateInput);
}

TEST(CompareModels, IdenticalRecordsGiveZeroError) {
    std::vector<LayerFeatureRecord> recs(8, record("a", 1, 50, 2, 8));
    for (const auto& row : compare_models(recs)) {
        EXPECT_NEAR(row.metrics.rmse, 0.0, 1e-12);
        EXPECT_NEAR(row.metrics.mae, 0.0, 1e-12);
    }
}

TEST(CompareModels, InputOrderAndJobsDoNotMatter) {
    const auto table = load_process_table(testing_support::fixture("table1.csv"));
    SyntheticDatasetSpec spec;
    spec.seed = 11;
    auto data = synth_feature_dataset(spec, table);
    const auto a = comparison_to_csv(compare_models(data));
    std::reverse(data.begin(), data.end());
    ComparisonOptions opt;
    opt.jobs = 4;
    EXPECT_EQ(comparison_to_csv(compare_models(data, {}, opt)), a);
    opt.folds = 6;
    const auto k = compare_models(data, {}, opt);
    EXPECT_EQ(k.size(), kAllFeatureSets.size());
}

TEST(CompareModels, EnergyPlusCountWinsOnSyntheticData) {
    const auto table = load_process_table(testing_support::fixture("table1.csv"));
    SyntheticDatasetSpec spec;
    spec.seed = 3;
    const auto rows = compare_models(synth_feature_dataset(spec, table));
    const auto rmse = [&](FeatureSet f) {
        for (const auto& r : rows)
            if (r.feature_set == f) return r.metrics.rmse;
        return -1.0;
    };
    EXPECT_LT(rmse(FeatureSet::ved_count), rmse(FeatureSet::ved));
    EXPECT_LT(rmse(FeatureSet::ved_count), rmse(FeatureSet::pvhs));
    const auto csv = comparison_to_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model_input,feature_set,rmse_um,mae_um,mre_percent");
    EXPECT_NE(csv.find("\"VED Average spatter count\",VED+count,"), std::string::npos);
}

TEST(SvrJson, RoundTripPredictsIdentically) {
    Rng r(9);
    const auto p = random_problem(r);
    const auto m = train_svr(p.x, p.y, p.hp);
    const auto back = svr_model_from_json(nlohmann::json::parse(to_json(m).dump()));
    for (const auto& row : p.x) EXPECT_EQ(predict(back, row), predict(m, row));
    auto j = to_json(m);
    j["coef"].push_back(1.0);
    EXPECT_THROW(svr_model_from_json(j), FormatError);
}
