#include "helpers.hpp"

using namespace lidkit;

namespace {

/// All-pairs oracle: every (distance, row) pair for the query, fully sorted.
std::vector<std::pair<double, std::size_t>> oracle_sorted(std::span<const float> q, const EmbeddingSet& ref,
                                                          std::optional<std::size_t> exclude) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t r = 0; r < ref.size(); ++r) {
        if (exclude && *exclude == r) {
            continue;
        }
        const double d = euclidean_distance(q, ref.row(r));
        if (d >= kDuplicateEpsilon) {
            all.emplace_back(d, r);
        }
    }
    std::sort(all.begin(), all.end());
    return all;
}

void expect_matches_oracle(const EmbeddingSet& queries, const EmbeddingSet& ref, std::size_t T, bool self,
                           const std::vector<NeighborList>& got) {
    ASSERT_EQ(got.size(), queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto want = oracle_sorted(queries.row(i), ref, self ? ref.index_of(queries.id(i)) : std::nullopt);
        ASSERT_EQ(got[i].size(), T);
        EXPECT_EQ(got[i].query_id, queries.id(i));
        for (std::size_t j = 0; j < T; ++j) {
            ASSERT_EQ(got[i].neighbor_rows[j], want[j].second) << "query " << i << " rank " << j;
            ASSERT_EQ(got[i].distances[j], want[j].first);
            ASSERT_EQ(got[i].neighbor_ids[j], ref.id(want[j].second));
        }
    }
}

} // namespace

TEST(Distance, MatchesLongDoubleReference) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = test::random_set(2, 1 + seed * 37, seed);
        long double acc = 0;
        for (std::size_t k = 0; k < s.dim(); ++k) {
            const long double d = static_cast<long double>(s.row(0)[k]) - s.row(1)[k];
            acc += d * d;
        }
        const double want = static_cast<double>(std::sqrt(acc));
        EXPECT_NEAR(euclidean_distance(s.row(0), s.row(1)), want, 1e-12 * want);
    }
}

TEST(KnnQuery, HandExample) {
    EmbeddingSet s({"a", "b", "c"}, {0.0f, 1.0f, 3.0f}, 1);
    const auto l = knn_query(s.row(0), s, 2, std::string("a"), "a");
    EXPECT_EQ(l.neighbor_ids, (std::vector<std::string>{"b", "c"}));
    EXPECT_EQ(l.distances, (std::vector<double>{1.0, 3.0}));
}

TEST(KnnQuery, Errors) {
    EmbeddingSet s({"a", "b", "c"}, {0.0f, 1.0f, 3.0f}, 1);
    try {
        knn_query(s.row(0), s, 3, std::string("a"));
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_EQ(std::string(e.what()).rfind("T exceeds usable reference size", 0), 0u);
    }
    EXPECT_THROW(knn_query(s.row(0), s, 1), InvalidArgument);
    const std::vector<float> q2{0.0f, 0.0f};
    EXPECT_THROW(knn_query(q2, s, 2), InvalidArgument);
}

TEST(KnnQuery, DuplicatesOfQueryAreDropped) {
    EmbeddingSet s({"a", "dup", "b", "c"}, {0.0f, 0.0f, 1.0f, 2.0f}, 1);
    const auto l = knn_query(s.row(0), s, 2, std::string("a"));
    EXPECT_EQ(l.neighbor_ids, (std::vector<std::string>{"b", "c"}));
    EXPECT_THROW(knn_query(s.row(0), s, 3, std::string("a")), InvalidArgument);
}

TEST(KnnQuery, TiesBreakByRow) {
    EmbeddingSet s({"q", "r", "l"}, {0.0f, 1.0f, -1.0f}, 1);
    const auto l = knn_query(s.row(0), s, 2, std::string("q"));
    EXPECT_EQ(l.neighbor_ids, (std::vector<std::string>{"r", "l"}));
}

TEST(KnnAll, HundredPointsMatchOracle) {
    const auto s = test::random_set(100, 16, 7);
    expect_matches_oracle(s, s, 10, true, knn_all(s, s, 10, true, 1));
}

TEST(KnnAll, SelfReferenceOmitsOwnId) {
    EmbeddingSet s({"a", "b", "c"}, {0.0f, 1.0f, 3.0f}, 1);
    const auto lists = knn_all(s, s, 2, true);
    for (const auto& l : lists) {
        EXPECT_EQ(std::count(l.neighbor_ids.begin(), l.neighbor_ids.end(), l.query_id), 0);
    }
}

TEST(KnnAll, CrossReferenceHasNoExclusion) {
    const auto a = test::random_set(20, 5, 1, "a");
    const auto b = test::random_set(30, 5, 2, "b");
    const auto lists = knn_all(a, b, 30, false);
    for (const auto& l : lists) {
        EXPECT_EQ(l.size(), 30u);
    }
    expect_matches_oracle(a, b, 30, false, lists);
}

TEST(KnnAll, SelfReferenceRequiresSameSet) {
    const auto a = test::random_set(5, 3, 1);
    const auto b = test::random_set(5, 3, 2);
    EXPECT_THROW(knn_all(a, b, 2, true), InvalidArgument);
    EXPECT_THROW(knn_all(a, test::random_set(5, 4, 1), 2, false), InvalidArgument);
}

TEST(KnnAll, LargeCrossQueryMatchesPerQuery) {
    const auto q = test::random_set(500, 8, 11, "q");
    const auto r = test::random_set(2000, 8, 12, "r");
    const auto lists = knn_all(q, r, 500, false, 4);
    for (std::size_t i = 0; i < q.size(); i += 7) {
        EXPECT_EQ(lists[i], knn_query(q.row(i), r, 500, std::nullopt, q.id(i)));
    }
}

TEST(KnnAll, RandomDatasetsMatchOracle) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 3 + rng() % 120;
        const std::size_t d = 1 + rng() % 24;
        const std::size_t T = 2 + rng() % (n - 2);
        const auto s = test::random_set(n, d, rng());
        expect_matches_oracle(s, s, T, true, knn_all(s, s, T, true));
    }
}

TEST(KnnAll, ThreadCountDoesNotChangeOutput) {
    const auto s = test::random_set(150, 12, 3);
    const auto one = knn_all(s, s, 20, true, 1);
    for (unsigned t : {2u, 3u, 8u}) {
        EXPECT_EQ(knn_all(s, s, 20, true, t), one);
    }
}

TEST(RankAll, PairwiseCacheMatchesDirectRanking) {
    const auto s = test::random_set(80, 9, 5);
    const auto cached = rank_all(s, s, true, 2);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto direct = rank_reference(s.row(i), s, i);
        ASSERT_EQ(cached[i].size(), direct.size());
        for (std::size_t j = 0; j < direct.size(); ++j) {
            EXPECT_EQ(cached[i][j].row, direct[j].row);
            EXPECT_EQ(cached[i][j].distance, direct[j].distance);
        }
    }
}

TEST(KnnAll, RotationPreservesNeighborIds) {
    const auto s = test::random_set(60, 6, 9);
    const auto r = test::rotated(s, 10);
    const auto a = knn_all(s, s, 5, true);
    const auto b = knn_all(r, r, 5, true);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].neighbor_ids, b[i].neighbor_ids);
        for (std::size_t j = 0; j < 5; ++j) {
            EXPECT_NEAR(a[i].distances[j], b[i].distances[j], 1e-5 * a[i].distances[j]);
        }
    }
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
    for (unsigned t : {1u, 4u}) {
        try {
            parallel_for(100, t, [](std::size_t i) {
                if (i == 17 || i == 60) {
                    throw std::runtime_error(std::to_string(i));
                }
            });
            FAIL();
        } catch (const std::runtime_error& e) {
            EXPECT_STREQ(e.what(), "17");
        }
    }
}
