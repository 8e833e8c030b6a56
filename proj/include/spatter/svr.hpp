#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatter/analytics.hpp"
#include "spatter/core_model.hpp"
#include "spatter/csv.hpp"
#include "spatter/errors.hpp"
#include "spatter/parallel.hpp"

namespace spatter {

/// Epsilon-insensitive loss: 0 inside the tube, |e| - eps outside.
inline double epsilon_loss(double y, double y_hat, double eps) {
    if (!(eps >= 0.0)) throw InvalidParameter("epsilon must be >= 0");
    const double e = std::abs(y - y_hat);
    return e <= eps ? 0.0 : e - eps;
}

struct SvrHyperparams {
    double c = 10.0;
    double epsilon = 0.5;
    /// Gaussian kernel width; <= 0 means 1 / feature count.
    double gamma_kernel = 0.0;
    double tolerance = 1e-10;  // stop when the maximal KKT violation drops below this
    std::size_t max_iterations = 10'000'000;

    void validate() const {
        if (!(c > 0.0)) throw InvalidParameter("SVR C must be > 0");
        if (!(epsilon >= 0.0)) throw InvalidParameter("SVR epsilon must be >= 0");
        if (!(tolerance > 0.0)) throw InvalidParameter("SVR tolerance must be > 0");
    }
};

enum class FeatureSet { pvhs, pvhs_angle, pvhs_count, ved, ved_angle, count, ved_count };

inline constexpr std::array<FeatureSet, 7> kAllFeatureSets{FeatureSet::pvhs,      FeatureSet::pvhs_angle,
                                                           FeatureSet::pvhs_count, FeatureSet::ved,
                                                           FeatureSet::ved_angle,  FeatureSet::count,
                                                           FeatureSet::ved_count};

inline std::string_view feature_set_id(FeatureSet f) {
    switch (f) {
        case FeatureSet::pvhs: return "PVHS";
        case FeatureSet::pvhs_angle: return "PVHS+angle";
        case FeatureSet::pvhs_count: return "PVHS+count";
        case FeatureSet::ved: return "VED";
        case FeatureSet::ved_angle: return "VED+angle";
        case FeatureSet::count: return "COUNT";
        case FeatureSet::ved_count: return "VED+count";
    }
    return "?";
}

inline std::string_view feature_set_label(FeatureSet f) {
    switch (f) {
        case FeatureSet::pvhs: return "Process parameters (P, V, HS)";
        case FeatureSet::pvhs_angle: return "Process parameters (P, V, HS) Hatching angle";
        case FeatureSet::pvhs_count: return "Process parameters (P, V, HS) Average spatter count";
        case FeatureSet::ved: return "VED";
        case FeatureSet::ved_angle: return "VED Hatching angle";
        case FeatureSet::count: return "Average spatter count";
        case FeatureSet::ved_count: return "VED Average spatter count";
    }
    return "?";
}

inline FeatureSet parse_feature_set(std::string_view id) {
    for (auto f : kAllFeatureSets)
        if (feature_set_id(f) == id) return f;
    throw InvalidParameter("unknown feature set '" + std::string(id) + "'");
}

/// Raw (unstandardized) inputs for a record. The hatch angle enters folded
/// into [0, 180).
inline std::vector<double> extract_features(const LayerFeatureRecord& r, FeatureSet f) {
    const double angle = normalize_hatch_angle(r.hatch_angle_deg);
    switch (f) {
        case FeatureSet::pvhs: return {r.power_w, r.speed_mm_s, r.hatch_space_mm};
        case FeatureSet::pvhs_angle: return {r.power_w, r.speed_mm_s, r.hatch_space_mm, angle};
        case FeatureSet::pvhs_count: return {r.power_w, r.speed_mm_s, r.hatch_space_mm, r.mean_spatter_count};
        case FeatureSet::ved: return {r.ved_j_mm3};
        case FeatureSet::ved_angle: return {r.ved_j_mm3, angle};
        case FeatureSet::count: return {r.mean_spatter_count};
        case FeatureSet::ved_count: return {r.ved_j_mm3, r.mean_spatter_count};
    }
    return {};
}

struct SvrDiagnostics {
    std::size_t iterations = 0;
    double kkt_gap = 0.0;          // max violating-pair gap at exit
    double dual_objective = 0.0;   // maximized dual value
    std::size_t free_support = 0;  // 0 < |coef| < C
};

struct SvrModel {
    std::string feature_set;  // free-form id; "" for raw matrices
    std::size_t dims = 0;
    std::vector<double> means, scales;
    std::vector<std::vector<double>> support;  // standardized training inputs
    std::vector<double> coef;                   // alpha - alpha*
    double bias = 0.0;
    SvrHyperparams hp;
    double gamma = 0.0;  // resolved kernel width
    SvrDiagnostics diagnostics;
};

inline double gaussian_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double d = u[k] - v[k];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

namespace detail {

/// Pairwise (SMO) solver for the 2n-variable dual
///   min 1/2 a'Qa + p'a  s.t.  s'a = 0, 0 <= a <= C,
/// with s = (+1..., -1...), Q_tu = s_t s_u K, p = (eps - y, eps + y).
/// Working pairs use second-order selection.
struct SmoResult {
    std::vector<double> beta;
    double bias = 0.0;
    SvrDiagnostics diag;
};

inline SmoResult smo_solve(const std::vector<double>& k, std::span<const double> y, const SvrHyperparams& hp) {
    const std::size_t n = y.size();
    const std::size_t m = 2 * n;
    const double c = hp.c;
    constexpr double tau = 1e-12;
    std::vector<double> a(m, 0.0), g(m), sgn(m);
    for (std::size_t t = 0; t < n; ++t) {
        sgn[t] = 1.0;
        sgn[t + n] = -1.0;
        g[t] = hp.epsilon - y[t];
        g[t + n] = hp.epsilon + y[t];
    }
    auto kk = [&](std::size_t t, std::size_t u) { return k[(t % n) * n + (u % n)]; };
    auto upper = [&](std::size_t t) { return a[t] >= c; };
    auto lower = [&](std::size_t t) { return a[t] <= 0.0; };

    SmoResult res;
    std::size_t iter = 0;
    double gap = 0.0;
    for (;; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = m;
        for (std::size_t t = 0; t < m; ++t) {
            if (sgn[t] > 0 ? !upper(t) : !lower(t)) {
                const double v = -sgn[t] * g[t];
                if (v >= gmax) { gmax = v; i = t; }
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        std::size_t j = m;
        if (i < m) {
            const double qii = kk(i, i);
            for (std::size_t t = 0; t < m; ++t) {
                if (sgn[t] > 0 ? lower(t) : upper(t)) continue;
                const double v = sgn[t] * g[t];
                gmax2 = std::max(gmax2, v);
                const double diff = gmax + v;
                if (diff > 0.0) {
                    const double quad = std::max(qii + kk(t, t) - 2.0 * kk(i, t), tau);
                    const double obj = -diff * diff / quad;
                    if (obj <= best) { best = obj; j = t; }
                }
            }
        }
        gap = (i < m && gmax2 > -std::numeric_limits<double>::infinity()) ? gmax + gmax2 : 0.0;
        if (gap < hp.tolerance || j == m) break;
        if (iter >= hp.max_iterations) {
            throw ConvergenceError("SVR solver did not converge: " + std::to_string(iter) +
                                   " iterations, KKT gap " + csv::fmt(gap) + " > tolerance " +
                                   csv::fmt(hp.tolerance));
        }

        const double qij = sgn[i] * sgn[j] * kk(i, j);
        const double ai = a[i], aj = a[j];
        if (sgn[i] != sgn[j]) {
            const double quad = std::max(kk(i, i) + kk(j, j) + 2.0 * qij, tau);
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0.0) {
                if (a[j] < 0.0) { a[j] = 0.0; a[i] = diff; }
            } else {
                if (a[i] < 0.0) { a[i] = 0.0; a[j] = -diff; }
            }
            if (diff > 0.0) {
                if (a[i] > c) { a[i] = c; a[j] = c - diff; }
            } else {
                if (a[j] > c) { a[j] = c; a[i] = c + diff; }
            }
        } else {
            const double quad = std::max(kk(i, i) + kk(j, j) - 2.0 * qij, tau);
            const double delta = (g[i] - g[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > c) {
                if (a[i] > c) { a[i] = c; a[j] = sum - c; }
            } else {
                if (a[j] < 0.0) { a[j] = 0.0; a[i] = sum; }
            }
            if (sum > c) {
                if (a[j] > c) { a[j] = c; a[i] = sum - c; }
            } else {
                if (a[i] < 0.0) { a[i] = 0.0; a[j] = sum; }
            }
        }
        const double di = a[i] - ai, dj = a[j] - aj;
        for (std::size_t t = 0; t < m; ++t)
            g[t] += sgn[t] * (sgn[i] * kk(t, i) * di + sgn[j] * kk(t, j) * dj);
    }

    // f(x) = sum beta K + b with b = -rho; rho from free variables, else
    // the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = sgn[t] * g[t];
        if (upper(t)) {
            if (sgn[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (sgn[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

    res.beta.resize(n);
    for (std::size_t t = 0; t < n; ++t) res.beta[t] = a[t] - a[t + n];
    res.bias = -rho;
    double obj = 0.0;  // 1/2 a'Qa + p'a = 1/2 sum a (g + p)
    for (std::size_t t = 0; t < m; ++t) {
        const double p = t < n ? hp.epsilon - y[t] : hp.epsilon + y[t - n];
        obj += a[t] * (g[t] + p);
    }
    res.diag.iterations = iter;
    res.diag.kkt_gap = gap;
    res.diag.dual_objective = -0.5 * obj;
    for (double b : res.beta)
        if (std::abs(b) > 0.0 && std::abs(b) < c) ++res.diag.free_support;
    return res;
}

}  // namespace detail

inline std::vector<double> standardize(const SvrModel& m, std::span<const double> x) {
    if (x.size() != m.dims) {
        throw DimensionMismatch("SVR input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(m.dims));
    }
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - m.means[k]) / m.scales[k];
    return z;
}

/// Trains on raw feature rows (standardized internally; population
/// mean/std, constant features keep scale 1). Targets are centred before
/// solving and the mean folded back into the bias.
inline SvrModel train_svr(const std::vector<std::vector<double>>& x, std::span<const double> y,
                          const SvrHyperparams& hp = {}) {
    hp.validate();
    const std::size_t n = x.size();
    if (n == 0) throw DegenerateInput("SVR needs at least one training record");
    if (y.size() != n) throw DimensionMismatch("SVR features and targets differ in length");
    SvrModel m;
    m.hp = hp;
    m.dims = x.front().size();
    if (m.dims == 0) throw DegenerateInput("SVR needs at least one feature");
    for (const auto& row : x)
        if (row.size() != m.dims) throw DimensionMismatch("ragged SVR feature rows");
    m.gamma = hp.gamma_kernel > 0.0 ? hp.gamma_kernel : 1.0 / static_cast<double>(m.dims);
    m.means.assign(m.dims, 0.0);
    m.scales.assign(m.dims, 1.0);
    for (std::size_t k = 0; k < m.dims; ++k) {
        double s = 0.0;
        for (const auto& row : x) s += row[k];
        const double mean = s / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& row : x) ss += (row[k] - mean) * (row[k] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        m.means[k] = mean;
        m.scales[k] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    for (const auto& row : x) m.support.push_back(standardize(m, row));

    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - y_mean;
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            k[i * n + j] = k[j * n + i] = i == j ? 1.0 : gaussian_kernel(m.support[i], m.support[j], m.gamma);
    auto sol = detail::smo_solve(k, yc, hp);
    m.coef = std::move(sol.beta);
    m.bias = sol.bias + y_mean;
    m.diagnostics = sol.diag;
    return m;
}

inline double predict(const SvrModel& m, std::span<const double> x) {
    const auto z = standardize(m, x);
    double f = m.bias;
    for (std::size_t j = 0; j < m.support.size(); ++j)
        if (m.coef[j] != 0.0) f += m.coef[j] * gaussian_kernel(z, m.support[j], m.gamma);
    return f;
}

inline SvrModel train_svr(std::span<const LayerFeatureRecord> records, FeatureSet f, const SvrHyperparams& hp = {}) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto& r : records) {
        x.push_back(extract_features(r, f));
        y.push_back(r.sa_um);
    }
    auto m = train_svr(x, y, hp);
    m.feature_set = std::string(feature_set_id(f));
    return m;
}

/// Predicts for a record using the model's own feature set.
inline double predict(const SvrModel& m, const LayerFeatureRecord& r, FeatureSet f) {
    if (m.feature_set != feature_set_id(f)) {
        throw InvalidParameter("feature set mismatch: model trained on '" + m.feature_set + "', got '" +
                               std::string(feature_set_id(f)) + "'");
    }
    const auto x = extract_features(r, f);
    return predict(m, std::span<const double>(x));
}

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

struct ComparisonRow {
    FeatureSet feature_set = FeatureSet::pvhs;
    PredictionMetrics metrics;
    std::vector<double> predictions;  // held-out, in canonical record order
};

struct ComparisonOptions {
    /// 0 = leave-one-out; otherwise contiguous k-fold over the canonical order.
    std::size_t folds = 0;
    std::size_t jobs = 1;
};

/// Records sorted by (layer, bar id, then all numeric fields), which makes
/// every downstream result independent of input order.
inline std::vector<LayerFeatureRecord> canonical_order(std::span<const LayerFeatureRecord> records) {
    std::vector<LayerFeatureRecord> v(records.begin(), records.end());
    std::stable_sort(v.begin(), v.end(), [](const LayerFeatureRecord& a, const LayerFeatureRecord& b) {
        auto key = [](const LayerFeatureRecord& r) {
            return std::tie(r.layer_index, r.bar_id, r.power_w, r.speed_mm_s, r.hatch_space_mm, r.ved_j_mm3,
                            r.hatch_angle_deg, r.mean_spatter_count, r.sa_um);
        };
        return key(a) < key(b);
    });
    return v;
}

/// Held-out predictions for every feature set, pooled into RMSE/MAE/MRE.
/// Each (feature set, fold) training run is independent; results do not
/// depend on jobs.
inline std::vector<ComparisonRow> compare_models(std::span<const LayerFeatureRecord> dataset,
                                                 const SvrHyperparams& hp = {}, const ComparisonOptions& opt = {}) {
    if (dataset.size() < 8) {
        throw DegenerateInput("model comparison needs at least 8 records, got " + std::to_string(dataset.size()));
    }
    const auto recs = canonical_order(dataset);
    const std::size_t n = recs.size();
    const std::size_t folds = opt.folds == 0 ? n : opt.folds;
    if (folds < 2 || folds > n) throw InvalidParameter("fold count must be in [2, record count]");
    auto fold_of = [&](std::size_t i) { return i * folds / n; };

    std::vector<ComparisonRow> rows(kAllFeatureSets.size());
    for (std::size_t s = 0; s < rows.size(); ++s) {
        rows[s].feature_set = kAllFeatureSets[s];
        rows[s].predictions.assign(n, 0.0);
    }
    parallel_for(rows.size() * folds, opt.jobs, [&](std::size_t job) {
        const std::size_t s = job / folds;
        const std::size_t fold = job % folds;
        const FeatureSet f = kAllFeatureSets[s];
        std::vector<LayerFeatureRecord> train;
        for (std::size_t i = 0; i < n; ++i)
            if (fold_of(i) != fold) train.push_back(recs[i]);
        const SvrModel m = train_svr(train, f, hp);
        for (std::size_t i = 0; i < n; ++i)
            if (fold_of(i) == fold) rows[s].predictions[i] = predict(m, recs[i], f);
    });
    std::vector<double> truth;
    for (const auto& r : recs) truth.push_back(r.sa_um);
    for (auto& row : rows) row.metrics = prediction_metrics(row.predictions, truth);
    return rows;
}

/// Table-4 layout: model input, RMSE, MAE, MRE.
inline std::string comparison_to_csv(std::span<const ComparisonRow> rows) {
    std::string s = "model_input,feature_set,rmse_um,mae_um,mre_percent\n";
    for (const auto& r : rows) {
        s += '"' + std::string(feature_set_label(r.feature_set)) + "\"," + std::string(feature_set_id(r.feature_set)) +
             ',' + csv::fmt(r.metrics.rmse, 6) + ',' + csv::fmt(r.metrics.mae, 6) + ',' +
             (r.metrics.mre_percent ? csv::fmt(*r.metrics.mre_percent, 6) : std::string("nan")) + '\n';
    }
    return s;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SvrModel& m) {
    return nlohmann::json{{"schema", "spatter.svr_model"},
                          {"schema_version", 1},
                          {"feature_set", m.feature_set},
                          {"dims", m.dims},
                          {"means", m.means},
                          {"scales", m.scales},
                          {"support", m.support},
                          {"coef", m.coef},
                          {"bias", m.bias},
                          {"gamma", m.gamma},
                          {"hyperparams", {{"c", m.hp.c}, {"epsilon", m.hp.epsilon}, {"gamma", m.hp.gamma_kernel}}}};
}

inline SvrModel svr_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != "spatter.svr_model") throw FormatError("not an SVR model document");
        SvrModel m;
        m.feature_set = j.at("feature_set").get<std::string>();
        m.dims = j.at("dims").get<std::size_t>();
        m.means = j.at("means").get<std::vector<double>>();
        m.scales = j.at("scales").get<std::vector<double>>();
        m.support = j.at("support").get<std::vector<std::vector<double>>>();
        m.coef = j.at("coef").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        m.gamma = j.at("gamma").get<double>();
        const auto& h = j.at("hyperparams");
        m.hp.c = h.at("c").get<double>();
        m.hp.epsilon = h.at("epsilon").get<double>();
        m.hp.gamma_kernel = h.at("gamma").get<double>();
        if (m.means.size() != m.dims || m.scales.size() != m.dims || m.coef.size() != m.support.size())
            throw FormatError("SVR model arrays have inconsistent sizes");
        for (const auto& s : m.support)
            if (s.size() != m.dims) throw FormatError("SVR support vector has wrong dimension");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("SVR model: ") + e.what());
    }
}

}  // namespace spatter
