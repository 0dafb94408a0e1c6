#include "helpers.hpp"

using namespace lidkit;

namespace {

/// Levina-Bickel written directly from its definition, on a brute-force
/// sorted neighbor list.
std::vector<double> mle_oracle(const EmbeddingSet& s, std::size_t T) {
    std::vector<double> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j != i) {
                d.push_back(euclidean_distance(s.row(i), s.row(j)));
            }
        }
        std::sort(d.begin(), d.end());
        double sum = 0.0;
        for (std::size_t j = 0; j + 1 < T; ++j) {
            sum += std::log(d[T - 1] / d[j]);
        }
        out.push_back(static_cast<double>(T - 1) / sum);
    }
    return out;
}

std::vector<double> values_of(const std::vector<LidEstimate>& est) {
    std::vector<double> v;
    for (const auto& e : est) {
        v.push_back(e.value);
    }
    return v;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    EXPECT_EQ(a.size(), b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(a[i]));
    }
    return worst;
}

EmbeddingSet permuted(const EmbeddingSet& s, std::uint64_t seed) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), std::mt19937_64(seed));
    std::vector<std::string> ids;
    std::vector<float> v;
    for (auto r : order) {
        ids.push_back(s.id(r));
        v.insert(v.end(), s.row(r).begin(), s.row(r).end());
    }
    return EmbeddingSet(std::move(ids), std::move(v), s.dim());
}

EmbeddingSet small_sphere(std::size_t m, std::size_t D, std::size_t n, std::uint64_t seed) {
    return gen_sphere({ManifoldKind::sphere, m, D, n, 0.0, seed, true, std::nullopt});
}

} // namespace

TEST(MleLid, HandExample) {
    const double e = std::exp(1.0);
    const std::vector<double> q{1.0, e, e * e};
    EXPECT_NEAR(mle_lid(q), 2.0 / 3.0, 1e-15);
}

TEST(MleLid, AllEqualIsDegenerate) {
    const std::vector<double> q{5, 5, 5};
    EXPECT_THROW(mle_lid(q), DegenerateNeighborhood);
}

TEST(MleLid, InvalidDistances) {
    EXPECT_THROW(mle_lid(std::vector<double>{0.0, 1.0}), InvalidArgument);
    EXPECT_THROW(mle_lid(std::vector<double>{-1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(mle_lid(std::vector<double>{2.0, 1.0}), InvalidArgument);
    EXPECT_THROW(mle_lid(std::vector<double>{1.0}), InvalidArgument);
}

TEST(MleLid, BatchMatchesDirectOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = test::random_set(120, 7, seed);
        for (std::size_t T : {2u, 5u, 20u, 119u}) {
            const auto got = mle_lid_batch(s, s, T, true);
            const auto want = mle_oracle(s, T);
            for (std::size_t i = 0; i < got.size(); ++i) {
                const double clamped = std::min(want[i], 7.0);
                EXPECT_NEAR(got[i].value, clamped, 1e-12 * clamped);
                EXPECT_EQ(got[i].diagnostics.clamped, want[i] > 7.0);
            }
        }
    }
}

TEST(MleLid, NeighborhoodPathMatchesKnnPath) {
    const auto s = test::random_set(90, 5, 3);
    const auto a = mle_lid_batch(s, s, 15, true);
    const auto b = mle_lid_batch(neighborhoods(s, s, true), 15);
    EXPECT_EQ(values_of(a), values_of(b));
}

TEST(MleLid, SegmentHasDimensionOne) {
    const auto s = test::segment(1000, 64, 5);
    const double m = mean_lid(mle_lid_batch(s, s, 100, true));
    EXPECT_GE(m, 0.8);
    EXPECT_LE(m, 1.2);
}

TEST(MleLid, ScaleInvariance) {
    const auto s = small_sphere(6, 40, 300, 1);
    const auto base = values_of(mle_lid_batch(s, s, 20, true));
    const auto s4 = test::scaled(s, 4.0f);
    EXPECT_LE(max_rel_diff(base, values_of(mle_lid_batch(s4, s4, 20, true))), 1e-12);
    const auto s37 = test::scaled(s, 3.7f);
    EXPECT_LE(max_rel_diff(base, values_of(mle_lid_batch(s37, s37, 20, true))), 1e-6);
}

TEST(MleLid, RotationInvariance) {
    const auto s = small_sphere(6, 40, 300, 2);
    const auto r = test::rotated(s, 77);
    EXPECT_LE(max_rel_diff(values_of(mle_lid_batch(s, s, 20, true)), values_of(mle_lid_batch(r, r, 20, true))), 1e-5);
}

TEST(MleLid, PermutationInvariance) {
    const auto s = test::random_set(200, 6, 4);
    const auto p = permuted(s, 9);
    const auto a = mle_lid_batch(s, s, 12, true);
    const auto b = mle_lid_batch(p, p, 12, true);
    for (const auto& e : b) {
        EXPECT_EQ(e.value, a[*s.index_of(e.sample_id)].value);
    }
}

TEST(MleLid, DuplicateQueryRowsAreSkippedNotDegenerate) {
    EmbeddingSet s({"a", "b", "c", "d"}, {0, 0, 1, 3}, 1);
    const auto est = mle_lid_batch(s, s, 2, true);
    EXPECT_TRUE(est[0].ok());
    EXPECT_NEAR(est[0].value, 1.0 / std::log(3.0), 1e-12);
}

TEST(MleLid, ClampedToAmbientDimension) {
    // every point's neighbor distances nearly equal: estimate far above D
    EmbeddingSet s({"o", "a", "b", "c"}, {0, 0, 1, 0, 0, 1.0001f, -1.0002f, 0}, 2);
    const auto est = mle_lid_batch(s, s, 3, true);
    EXPECT_TRUE(est[0].diagnostics.clamped);
    EXPECT_EQ(est[0].value, 2.0);
}

TEST(MeanLid, SkipsDegenerate) {
    std::vector<LidEstimate> est(3);
    est[0].value = 2.0;
    est[1].value = std::nan("");
    est[1].diagnostics.degenerate = true;
    est[2].value = 4.0;
    EXPECT_EQ(mean_lid(est), 3.0);
}

TEST(GeomleConfig, ForNeighbors) {
    auto c = GeomleConfig::for_neighbors(500);
    EXPECT_EQ(c.t_low, 250u);
    EXPECT_EQ(c.t_high, 500u);
    c = GeomleConfig::for_neighbors(15);
    EXPECT_EQ(c.t_low, 10u);
    c = GeomleConfig::for_neighbors(6);
    EXPECT_EQ(c.t_low, 3u);
    EXPECT_NO_THROW(c.validate());
    c.t_low = c.t_high;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Geomle, RecoversSegmentDimension) {
    const auto s = test::segment(600, 16, 8);
    const double m = mean_lid(geomle_lid(s, s, GeomleConfig::for_neighbors(60, 1), true));
    EXPECT_GE(m, 0.8);
    EXPECT_LE(m, 1.3);
}

TEST(Geomle, LowDimensionalSphere) {
    const auto s = small_sphere(3, 20, 800, 3);
    const double m = mean_lid(geomle_lid(s, s, GeomleConfig::for_neighbors(80, 1), true));
    EXPECT_GE(m, 2.5);
    EXPECT_LE(m, 3.6);
}

TEST(Geomle, DeterministicAcrossThreadCounts) {
    const auto s = small_sphere(5, 30, 300, 4);
    const auto cfg = GeomleConfig::for_neighbors(60, 7);
    const auto one = values_of(geomle_lid(s, s, cfg, true, 1));
    for (unsigned t : {2u, 5u}) {
        EXPECT_EQ(values_of(geomle_lid(s, s, cfg, true, t)), one);
    }
    EXPECT_EQ(values_of(geomle_lid(s, s, cfg, true, 1)), one);
}

TEST(Geomle, SeedChangesBootstrap) {
    const auto s = small_sphere(5, 30, 300, 4);
    EXPECT_NE(values_of(geomle_lid(s, s, GeomleConfig::for_neighbors(60, 1), true)),
              values_of(geomle_lid(s, s, GeomleConfig::for_neighbors(60, 2), true)));
}

TEST(Geomle, ScaleInvariance) {
    const auto s = small_sphere(5, 30, 300, 5);
    const auto cfg = GeomleConfig::for_neighbors(60, 3);
    const auto base = values_of(geomle_lid(s, s, cfg, true));
    const auto s37 = test::scaled(s, 3.7f);
    const auto s01 = test::scaled(s, 0.01f);
    EXPECT_LE(max_rel_diff(base, values_of(geomle_lid(s37, s37, cfg, true))), 1e-6);
    EXPECT_LE(max_rel_diff(base, values_of(geomle_lid(s01, s01, cfg, true))), 1e-6);
}

TEST(Geomle, RotationInvariance) {
    const auto s = small_sphere(5, 30, 300, 6);
    const auto r = test::rotated(s, 5);
    const auto cfg = GeomleConfig::for_neighbors(60, 3);
    EXPECT_LE(max_rel_diff(values_of(geomle_lid(s, s, cfg, true)), values_of(geomle_lid(r, r, cfg, true))), 1e-5);
}

TEST(Geomle, FallbackNeverLeavesRange) {
    const auto s = test::random_set(150, 3, 10);
    auto cfg = GeomleConfig::for_neighbors(40, 1);
    cfg.basis = RegressionBasis::full;
    cfg.degree = 3;
    for (const auto& e : geomle_lid(s, s, cfg, true)) {
        ASSERT_TRUE(e.ok());
        EXPECT_GT(e.value, 0.0);
        EXPECT_LE(e.value, 3.0);
    }
}

TEST(Geomle, FitRecoversExactQuadratic) {
    detail::BootstrapCurve c;
    for (int k = 1; k <= 20; ++k) {
        const double q = 0.1 * k;
        c.mean_radius.push_back(q);
        c.mean_lid.push_back(7.0 - 2.0 * q * q);
        c.variance.push_back(0.01 * k);
    }
    const auto fit = detail::fit_intercept(c, 1, RegressionBasis::even);
    EXPECT_NEAR(fit.intercept, 7.0, 1e-10);
    ASSERT_EQ(fit.coefficients.size(), 1u);
    EXPECT_NEAR(fit.coefficients[0], -2.0, 1e-10);
}

TEST(Geomle, ZeroVarianceIsFloored) {
    detail::BootstrapCurve c{{3.0, 3.0, 3.0}, {1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}};
    const auto fit = detail::fit_intercept(c, 1, RegressionBasis::full);
    EXPECT_NEAR(fit.intercept, 3.0, 1e-9);
}

TEST(Twonn, ClosedFormAllRatiosE) {
    TwonnOptions opt;
    opt.closed_form = true;
    opt.trim_fraction = 0.0;
    const auto r = twonn_from_ratios(std::vector<double>(50, std::exp(1.0)), opt);
    EXPECT_NEAR(r.dimension, 1.0, 1e-14);
    EXPECT_EQ(r.kept, 50u);
}

TEST(Twonn, UnitSquareInThirtyTwoDims) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> ids;
    std::vector<float> v;
    for (int i = 0; i < 2000; ++i) {
        ids.push_back("sq" + std::to_string(i));
        std::vector<float> row(32, 0.0f);
        row[0] = static_cast<float>(u(rng));
        row[1] = static_cast<float>(u(rng));
        v.insert(v.end(), row.begin(), row.end());
    }
    const auto s = test::rotated(EmbeddingSet(ids, v, 32), 3);
    const double d = twonn_global(s).dimension;
    EXPECT_GE(d, 1.7);
    EXPECT_LE(d, 2.3);
}

TEST(Twonn, DuplicatesAreSkipped) {
    auto base = test::random_set(50, 4, 1);
    std::vector<std::string> ids = base.ids();
    std::vector<float> v(base.values().begin(), base.values().end());
    ids.push_back("copy");
    v.insert(v.end(), base.row(0).begin(), base.row(0).end());
    const auto r = twonn_global(EmbeddingSet(ids, v, 4));
    EXPECT_EQ(r.skipped, 2u);
}

TEST(Twonn, Errors) {
    EXPECT_THROW(twonn_global(test::random_set(2, 3, 1)), InvalidArgument);
    TwonnOptions bad;
    bad.trim_fraction = 1.0;
    EXPECT_THROW(twonn_global(test::random_set(10, 3, 1), bad), InvalidArgument);
    EXPECT_THROW(twonn_from_ratios({}), DataError);
}

TEST(KnnGraph, SegmentSlopeNearZero) {
    const auto s = test::segment(800, 16, 2);
    const auto r = knn_graph_dim(s);
    EXPECT_NEAR(r.slope, 0.0, 0.1);
    EXPECT_EQ(r.dimension, 1);
    EXPECT_EQ(r.mean_lengths.size(), r.subset_sizes.size());
}

TEST(KnnGraph, UnitSquare) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> ids;
    std::vector<float> v;
    for (int i = 0; i < 1000; ++i) {
        ids.push_back("p" + std::to_string(i));
        v.push_back(static_cast<float>(u(rng)));
        v.push_back(static_cast<float>(u(rng)));
    }
    const auto r = knn_graph_dim(EmbeddingSet(ids, v, 2));
    EXPECT_EQ(r.dimension, 2);
}

TEST(KnnGraph, DeterministicAcrossThreads) {
    const auto s = small_sphere(4, 20, 300, 1);
    KnnGraphOptions opt;
    opt.rng_seed = 5;
    const auto a = knn_graph_dim(s, opt, 1);
    const auto b = knn_graph_dim(s, opt, 4);
    EXPECT_EQ(a.mean_lengths, b.mean_lengths);
    EXPECT_EQ(a.slope, b.slope);
}

TEST(KnnGraph, InvalidOptions) {
    const auto s = test::random_set(50, 3, 1);
    KnnGraphOptions opt;
    opt.subset_sizes = {20, 10};
    EXPECT_THROW(knn_graph_dim(s, opt), InvalidArgument);
    opt.subset_sizes = {20};
    EXPECT_THROW(knn_graph_dim(s, opt), InvalidArgument);
    opt.subset_sizes = {20, 60};
    EXPECT_THROW(knn_graph_dim(s, opt), InvalidArgument);
}

TEST(Method, ParseAndPrint) {
    for (auto m : {Method::mle, Method::geomle, Method::twonn, Method::knn_graph}) {
        EXPECT_EQ(parse_method(to_string(m)), m);
    }
    EXPECT_EQ(parse_method("knn-graph"), Method::knn_graph);
    EXPECT_THROW(parse_method("pca"), InvalidArgument);
}

TEST(EstimateJson, Fields) {
    LidEstimate e{"x", 3.5, Method::geomle, 40, {}};
    e.diagnostics.fallback = true;
    const auto j = estimate_to_json(e);
    EXPECT_EQ(j["id"], "x");
    EXPECT_EQ(j["lid"], 3.5);
    EXPECT_EQ(j["method"], "geomle");
    EXPECT_EQ(j["T"], 40);
    EXPECT_EQ(j["fallback"], true);
    e.diagnostics.degenerate = true;
    EXPECT_TRUE(estimate_to_json(e)["lid"].is_null());
}
