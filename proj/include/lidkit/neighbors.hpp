#pragma once

// Exact Euclidean k-nearest-neighbor search by brute force.

#include <lidkit/datamodel.hpp>
#include <lidkit/error.hpp>
#include <lidkit/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lidkit {

/// Neighbors closer than this are treated as duplicates of the query and
/// dropped (a zero distance makes log(Q_T / Q_j) undefined).
inline constexpr double kDuplicateEpsilon = 1e-12;

struct Neighbor {
    std::size_t row;
    double distance;
};

/// Strict weak order used everywhere: ascending distance, then row index.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) noexcept {
    return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
}

/// The T nearest reference rows of one query, ascending.
struct NeighborList {
    std::string query_id;
    std::vector<std::string> neighbor_ids;
    std::vector<std::size_t> neighbor_rows;
    std::vector<double> distances;

    std::size_t size() const noexcept { return distances.size(); }
    friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

/// Euclidean distance with 64-bit accumulation.
inline double euclidean_distance(std::span<const float> a, std::span<const float> b) noexcept {
    // independent lanes let the compiler vectorize without reassociating
    constexpr std::size_t kLanes = 8;
    double acc[kLanes] = {};
    const std::size_t d = a.size();
    const float* pa = a.data();
    const float* pb = b.data();
    std::size_t k = 0;
    for (; k + kLanes <= d; k += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) {
            const double diff = static_cast<double>(pa[k + l]) - static_cast<double>(pb[k + l]);
            acc[l] += diff * diff;
        }
    }
    for (; k < d; ++k) {
        const double diff = static_cast<double>(pa[k]) - static_cast<double>(pb[k]);
        acc[0] += diff * diff;
    }
    return std::sqrt(((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])));
}

namespace detail {

inline void check_dims(std::size_t query_dim, const EmbeddingSet& reference) {
    if (query_dim != reference.dim()) {
        throw InvalidArgument("dimension mismatch: query has D=" + std::to_string(query_dim) + ", reference has D=" +
                              std::to_string(reference.dim()));
    }
}

/// Distances from `query` to every usable reference row: `exclude_row` and
/// rows closer than kDuplicateEpsilon are left out. Unordered.
inline std::vector<Neighbor> usable_distances(std::span<const float> query, const EmbeddingSet& reference,
                                              std::optional<std::size_t> exclude_row) {
    std::vector<Neighbor> out;
    out.reserve(reference.size());
    for (std::size_t r = 0; r < reference.size(); ++r) {
        if (exclude_row && *exclude_row == r) {
            continue;
        }
        const double d = euclidean_distance(query, reference.row(r));
        if (d < kDuplicateEpsilon) {
            continue;
        }
        out.push_back({r, d});
    }
    return out;
}

inline std::optional<std::size_t> exclusion_row(const EmbeddingSet& reference, const std::optional<std::string>& id) {
    if (!id) {
        return std::nullopt;
    }
    return reference.index_of(*id);
}

} // namespace detail

/**
 * All usable reference rows sorted by (distance, row).
 *
 * This is the full ranking that knn_query truncates; estimators that need
 * neighbors at many T (or bootstrap resamples of the reference) consume it
 * directly.
 */
inline std::vector<Neighbor> rank_reference(std::span<const float> query, const EmbeddingSet& reference,
                                            std::optional<std::size_t> exclude_row = std::nullopt) {
    detail::check_dims(query.size(), reference);
    auto all = detail::usable_distances(query, reference, exclude_row);
    std::sort(all.begin(), all.end(), neighbor_less);
    return all;
}

inline NeighborList knn_query(std::span<const float> query, const EmbeddingSet& reference, std::size_t T,
                              const std::optional<std::string>& exclude_id = std::nullopt,
                              std::string query_id = {}) {
    if (T < 2) {
        throw InvalidArgument("T must be >= 2");
    }
    detail::check_dims(query.size(), reference);
    auto all = detail::usable_distances(query, reference, detail::exclusion_row(reference, exclude_id));
    if (T > all.size()) {
        throw InvalidArgument("T exceeds usable reference size: T=" + std::to_string(T) + ", usable=" +
                              std::to_string(all.size()));
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(T), all.end(), neighbor_less);

    NeighborList out;
    out.query_id = std::move(query_id);
    out.neighbor_ids.reserve(T);
    out.neighbor_rows.reserve(T);
    out.distances.reserve(T);
    for (std::size_t j = 0; j < T; ++j) {
        out.neighbor_rows.push_back(all[j].row);
        out.neighbor_ids.push_back(reference.id(all[j].row));
        out.distances.push_back(all[j].distance);
    }
    return out;
}

namespace detail {

inline void check_self_reference(const EmbeddingSet& queries, const EmbeddingSet& reference) {
    if (&queries != &reference && !(queries == reference)) {
        throw InvalidArgument("self_reference requires queries and reference to be the same set");
    }
}

} // namespace detail

/// knn_query for every row of `queries`, in query order. In self-reference
/// mode each query excludes its own id from the reference.
inline std::vector<NeighborList> knn_all(const EmbeddingSet& queries, const EmbeddingSet& reference, std::size_t T,
                                         bool self_reference, unsigned threads = 0) {
    if (T < 2) {
        throw InvalidArgument("T must be >= 2");
    }
    detail::check_dims(queries.dim(), reference);
    if (self_reference) {
        detail::check_self_reference(queries, reference);
    }
    std::vector<NeighborList> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        std::optional<std::string> exclude;
        if (self_reference) {
            exclude = queries.id(i);
        }
        out[i] = knn_query(queries.row(i), reference, T, exclude, queries.id(i));
    });
    return out;
}

/// Symmetric n x n distance matrix, row-major. Entry (i, j) is bit-identical
/// to euclidean_distance(row(i), row(j)).
inline std::vector<double> pairwise_distances(const EmbeddingSet& set, unsigned threads = 0) {
    const std::size_t n = set.size();
    std::vector<double> out(n * n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out[i * n + j] = euclidean_distance(set.row(i), set.row(j));
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            out[i * n + j] = out[j * n + i];
        }
    }
    return out;
}

/// Self-reference sets up to this size reuse one symmetric distance matrix.
inline constexpr std::size_t kPairwiseCacheLimit = 8192;

/// Full rankings for every query (see rank_reference).
inline std::vector<std::vector<Neighbor>> rank_all(const EmbeddingSet& queries, const EmbeddingSet& reference,
                                                   bool self_reference, unsigned threads = 0) {
    detail::check_dims(queries.dim(), reference);
    if (self_reference) {
        detail::check_self_reference(queries, reference);
    }
    std::vector<std::vector<Neighbor>> out(queries.size());
    if (self_reference && queries.size() <= kPairwiseCacheLimit) {
        const std::size_t n = queries.size();
        const auto dist = pairwise_distances(queries, threads);
        parallel_for(n, threads, [&](std::size_t i) {
            auto& row = out[i];
            row.reserve(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i && dist[i * n + j] >= kDuplicateEpsilon) {
                    row.push_back({j, dist[i * n + j]});
                }
            }
            std::sort(row.begin(), row.end(), neighbor_less);
        });
        return out;
    }
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        std::optional<std::size_t> exclude;
        if (self_reference) {
            exclude = reference.index_of(queries.id(i));
        }
        out[i] = rank_reference(queries.row(i), reference, exclude);
    });
    return out;
}

/// Ranked neighborhoods of a query set against a reference pool, computed
/// once and shared by the estimators.
struct Neighborhoods {
    std::vector<std::string> ids;
    std::vector<std::vector<Neighbor>> ranked;
    std::size_t reference_size = 0;
    std::size_t dim = 0;
};

inline Neighborhoods neighborhoods(const EmbeddingSet& queries, const EmbeddingSet& reference, bool self_reference,
                                   unsigned threads = 0) {
    return {queries.ids(), rank_all(queries, reference, self_reference, threads), reference.size(), reference.dim()};
}

} // namespace lidkit
