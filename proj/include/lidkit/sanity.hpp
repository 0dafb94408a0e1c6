#pragma once

// Synthetic sanity check: sphere and Gaussian ("norm") manifolds with known
// intrinsic dimension, with and without noise, scored by every estimator.

#include <lidkit/estimators.hpp>
#include <lidkit/neighbors.hpp>
#include <lidkit/synthetic.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lidkit {

struct SanityConfig {
    std::size_t n = 1000;
    std::size_t ambient_dim = 4096;
    double noise_sigma = 0.05;
    std::uint64_t seed = 42;
    /// Neighbor count for the plain MLE column.
    std::size_t mle_neighbors = 20;
    /// Largest neighbor count T2 of the GeoMLE range.
    std::size_t geomle_neighbors = 500;
    /// Added to both ends of every acceptance band.
    double band_slack = 0.0;
    unsigned threads = 0;

    /// Reduced problem (n=500, D=512) with bands widened by 1.5.
    static SanityConfig fast(std::uint64_t seed = 42) {
        SanityConfig c;
        c.n = 500;
        c.ambient_dim = 512;
        c.geomle_neighbors = 250;
        c.band_slack = 1.5;
        c.seed = seed;
        return c;
    }
};

struct SanityRow {
    std::string name;
    ManifoldKind kind = ManifoldKind::sphere;
    std::size_t intrinsic_dim = 0;
    bool noisy = false;
    double twonn = 0.0;
    std::optional<int> knn;
    std::string knn_error;
    double knn_slope = std::nan("");
    double mle = 0.0;
    double geomle = 0.0;
    std::size_t geomle_fallbacks = 0;
    /// Reference values reported for the same row.
    double ref_twonn = 0.0;
    double ref_knn = 0.0;
    double ref_mle = 0.0;
    double ref_geomle = 0.0;
};

struct SanityCheck {
    std::string name;
    bool passed;
    std::string detail;
};

struct SanityResult {
    std::vector<SanityRow> rows;
    std::vector<SanityCheck> checks;

    bool passed() const {
        for (const auto& c : checks) {
            if (!c.passed) {
                return false;
            }
        }
        return true;
    }
};

inline SanityRow run_sanity_row(const std::string& name, ManifoldKind kind, std::size_t m, bool noisy,
                                const SanityConfig& cfg) {
    ManifoldSpec spec{kind, m, cfg.ambient_dim, cfg.n, noisy ? cfg.noise_sigma : 0.0, cfg.seed, true, std::nullopt};
    const auto set = gen_manifold(spec);
    SanityRow row;
    row.name = name;
    row.kind = kind;
    row.intrinsic_dim = m;
    row.noisy = noisy;

    const auto hoods = neighborhoods(set, set, true, cfg.threads);
    row.mle = mean_lid(mle_lid_batch(hoods, cfg.mle_neighbors));
    const auto geo = geomle_lid(hoods, GeomleConfig::for_neighbors(cfg.geomle_neighbors, cfg.seed), cfg.threads);
    row.geomle = mean_lid(geo);
    for (const auto& e : geo) {
        row.geomle_fallbacks += e.diagnostics.fallback ? 1 : 0;
    }
    row.twonn = twonn_global(set, {}, cfg.threads).dimension;
    try {
        KnnGraphOptions opt;
        opt.rng_seed = cfg.seed;
        const auto k = knn_graph_dim(set, opt, cfg.threads);
        row.knn = k.dimension;
        row.knn_slope = k.slope;
    } catch (const Error& e) {
        row.knn_error = e.what();
    }
    return row;
}

namespace detail {

inline SanityCheck band_check(const std::string& name, double value, double lo, double hi, double slack) {
    lo -= slack;
    hi += slack;
    const bool ok = value >= lo && value <= hi;
    return {name, ok, std::to_string(value) + " in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
}

} // namespace detail

/// Generates the four rows and evaluates the acceptance bands.
inline SanityResult run_sanity(const SanityConfig& cfg) {
    SanityResult res;
    auto reference = [](SanityRow row, double twonn, double knn, double mle, double geomle) {
        row.ref_twonn = twonn;
        row.ref_knn = knn;
        row.ref_mle = mle;
        row.ref_geomle = geomle;
        return row;
    };
    auto sphere = reference(run_sanity_row("sphere", ManifoldKind::sphere, 10, false, cfg), 8.78, 4, 8.63, 8.65);
    auto sphere_noise =
        reference(run_sanity_row("sphere noise", ManifoldKind::sphere, 10, true, cfg), 13.97, 4, 11.45, 9.64);
    auto norm = reference(run_sanity_row("norm", ManifoldKind::norm, 20, false, cfg), 17.54, 9, 15.54, 20.33);
    auto norm_noise =
        reference(run_sanity_row("norm noise", ManifoldKind::norm, 20, true, cfg), 17.81, 2, 15.72, 22.36);

    const double s = cfg.band_slack;
    res.checks.push_back(detail::band_check("sphere MLE", sphere.mle, 7.5, 10.0, s));
    res.checks.push_back(detail::band_check("sphere GeoMLE", sphere.geomle, 7.5, 10.5, s));
    res.checks.push_back(detail::band_check("sphere TwoNN", sphere.twonn, 7.8, 9.8, s));
    res.checks.push_back(detail::band_check("norm GeoMLE", norm.geomle, 17.0, 24.0, s));
    res.checks.push_back(detail::band_check("norm MLE", norm.mle, 13.0, 18.0, s));
    res.checks.push_back({"norm GeoMLE bias below MLE bias",
                          std::abs(norm.geomle - 20.0) < std::abs(norm.mle - 20.0),
                          "|" + std::to_string(norm.geomle) + " - 20| < |" + std::to_string(norm.mle) + " - 20|"});
    res.checks.push_back(detail::band_check("sphere noise GeoMLE", sphere_noise.geomle, 8.0, 12.5, s));
    res.checks.push_back({"sphere noise GeoMLE >= noise-free - 0.5", sphere_noise.geomle >= sphere.geomle - 0.5,
                          std::to_string(sphere_noise.geomle) + " >= " + std::to_string(sphere.geomle) + " - 0.5"});

    res.rows = {std::move(sphere), std::move(sphere_noise), std::move(norm), std::move(norm_noise)};
    return res;
}

inline nlohmann::json sanity_to_json(const SanityResult& r, const SanityConfig& cfg) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json j{{"dataset", row.name},
                         {"m", row.intrinsic_dim},
                         {"twonn", row.twonn},
                         {"knn", nullptr},
                         {"mle", row.mle},
                         {"geomle", row.geomle},
                         {"geomle_fallbacks", row.geomle_fallbacks},
                         {"reference", {{"twonn", row.ref_twonn}, {"knn", row.ref_knn}, {"mle", row.ref_mle},
                                        {"geomle", row.ref_geomle}}}};
        if (row.knn) {
            j["knn"] = *row.knn;
            j["knn_slope"] = row.knn_slope;
        } else {
            j["knn_error"] = row.knn_error;
        }
        rows.push_back(std::move(j));
    }
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    return {{"config",
             {{"n", cfg.n},
              {"D", cfg.ambient_dim},
              {"noise_sigma", cfg.noise_sigma},
              {"seed", cfg.seed},
              {"mle_neighbors", cfg.mle_neighbors},
              {"geomle_neighbors", cfg.geomle_neighbors},
              {"band_slack", cfg.band_slack}}},
            {"rows", std::move(rows)},
            {"checks", std::move(checks)},
            {"passed", r.passed()}};
}

} // namespace lidkit
