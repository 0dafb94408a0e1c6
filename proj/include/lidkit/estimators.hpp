#pragma once

// Intrinsic-dimension estimators: per-sample MLE and GeoMLE, plus the global
// TwoNN and kNN-graph baselines.

#include <lidkit/datamodel.hpp>
#include <lidkit/error.hpp>
#include <lidkit/neighbors.hpp>
#include <lidkit/parallel.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lidkit {

enum class Method { mle, geomle, twonn, knn_graph };

inline std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::mle: return "mle";
    case Method::geomle: return "geomle";
    case Method::twonn: return "twonn";
    case Method::knn_graph: return "knn_graph";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "mle") return Method::mle;
    if (s == "geomle") return Method::geomle;
    if (s == "twonn") return Method::twonn;
    if (s == "knn_graph" || s == "knn-graph") return Method::knn_graph;
    throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

struct Diagnostics {
    /// Bootstrap variance of the MLE at the largest T (GeoMLE only).
    double sigma = 0.0;
    /// Regression coefficients zeta_1..zeta_l, in the units of the distances.
    std::vector<double> coefficients;
    /// GeoMLE intercept fell outside (0, D]; value is plain MLE at T2.
    bool fallback = false;
    /// Estimate exceeded the ambient dimension and was clamped to D.
    bool clamped = false;
    /// All neighbor distances equal; value is NaN.
    bool degenerate = false;
};

struct LidEstimate {
    std::string sample_id;
    double value = 0.0;
    Method method = Method::mle;
    std::size_t T_used = 0;
    Diagnostics diagnostics;

    bool ok() const noexcept { return !diagnostics.degenerate; }
};

// ---------------------------------------------------------------------------
// MLE
// ---------------------------------------------------------------------------

namespace detail {

/// m = (T-1) / sum_{j<T} log(Q_T / Q_j), from log-distances.
inline double mle_from_logs(std::span<const double> log_q) {
    const std::size_t T = log_q.size();
    const double top = log_q[T - 1];
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < T; ++j) {
        sum += top - log_q[j];
    }
    if (!(sum > 0.0)) {
        throw DegenerateNeighborhood();
    }
    return static_cast<double>(T - 1) / sum;
}

} // namespace detail

/// Levina-Bickel estimate from the ascending distances Q_1..Q_T.
inline double mle_lid(std::span<const double> distances) {
    if (distances.size() < 2) {
        throw InvalidArgument("mle_lid needs T >= 2 distances");
    }
    for (std::size_t j = 0; j < distances.size(); ++j) {
        if (!(distances[j] > 0.0) || !std::isfinite(distances[j])) {
            throw InvalidArgument("invalid distances: Q_" + std::to_string(j + 1) + " is not a positive finite value");
        }
        if (j > 0 && distances[j] < distances[j - 1]) {
            throw InvalidArgument("invalid distances: not ascending at position " + std::to_string(j + 1));
        }
    }
    std::vector<double> logs(distances.size());
    std::transform(distances.begin(), distances.end(), logs.begin(), [](double d) { return std::log(d); });
    return detail::mle_from_logs(logs);
}

namespace detail {

inline LidEstimate mle_estimate(const std::string& id, std::span<const Neighbor> ranked, std::size_t T, std::size_t dim) {
    LidEstimate e{id, 0.0, Method::mle, T, {}};
    std::vector<double> q(T);
    for (std::size_t j = 0; j < T; ++j) {
        q[j] = ranked[j].distance;
    }
    try {
        e.value = mle_lid(q);
    } catch (const DegenerateNeighborhood&) {
        e.value = std::numeric_limits<double>::quiet_NaN();
        e.diagnostics.degenerate = true;
        return e;
    }
    if (e.value > static_cast<double>(dim)) {
        e.value = static_cast<double>(dim);
        e.diagnostics.clamped = true;
    }
    return e;
}

inline void check_usable(const Neighborhoods& hoods, std::size_t T) {
    if (T < 2) {
        throw InvalidArgument("T must be >= 2");
    }
    for (std::size_t i = 0; i < hoods.ranked.size(); ++i) {
        if (hoods.ranked[i].size() < T) {
            throw InvalidArgument("T exceeds usable reference size: T=" + std::to_string(T) + ", usable=" +
                                  std::to_string(hoods.ranked[i].size()) + " for sample '" + hoods.ids[i] + "'");
        }
    }
}

} // namespace detail

/// Per-sample MLE from precomputed neighborhoods. Degenerate samples carry
/// diagnostics.degenerate and a NaN value.
inline std::vector<LidEstimate> mle_lid_batch(const Neighborhoods& hoods, std::size_t T) {
    detail::check_usable(hoods, T);
    std::vector<LidEstimate> out;
    out.reserve(hoods.ranked.size());
    for (std::size_t i = 0; i < hoods.ranked.size(); ++i) {
        out.push_back(detail::mle_estimate(hoods.ids[i], hoods.ranked[i], T, hoods.dim));
    }
    return out;
}

inline std::vector<LidEstimate> mle_lid_batch(const EmbeddingSet& queries, const EmbeddingSet& reference,
                                              std::size_t T, bool self_reference, unsigned threads = 0) {
    const auto lists = knn_all(queries, reference, T, self_reference, threads);
    std::vector<LidEstimate> out;
    out.reserve(lists.size());
    for (const auto& l : lists) {
        std::vector<Neighbor> ranked(l.size());
        for (std::size_t j = 0; j < l.size(); ++j) {
            ranked[j] = {l.neighbor_rows[j], l.distances[j]};
        }
        out.push_back(detail::mle_estimate(l.query_id, ranked, T, reference.dim()));
    }
    return out;
}

/// Mean over non-degenerate estimates (NaN if none).
inline double mean_lid(std::span<const LidEstimate> estimates) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& e : estimates) {
        if (e.ok()) {
            sum += e.value;
            ++count;
        }
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// GeoMLE
// ---------------------------------------------------------------------------

/// Powers of the neighbor radius used as regressors.
enum class RegressionBasis {
    even, ///< Q^2, Q^4, ..., Q^{2l}
    full, ///< Q, Q^2, ..., Q^l
};

struct GeomleConfig {
    std::size_t bootstrap_count = 20;
    std::size_t t_low = 250;
    std::size_t t_high = 500;
    std::size_t degree = 1;
    RegressionBasis basis = RegressionBasis::even;
    std::uint64_t rng_seed = 0;

    /// Default range [max(10, ceil(T/2)), T] for a user neighbor count T;
    /// below T = 11 the lower end drops to max(2, ceil(T/2)).
    static GeomleConfig for_neighbors(std::size_t T, std::uint64_t seed = 0) {
        GeomleConfig c;
        c.t_high = T;
        c.t_low = std::max<std::size_t>(10, (T + 1) / 2);
        if (c.t_low >= T) {
            c.t_low = std::max<std::size_t>(2, (T + 1) / 2);
        }
        c.rng_seed = seed;
        return c;
    }

    void validate() const {
        if (bootstrap_count < 2) {
            throw InvalidArgument("GeoMLE needs bootstrap_count >= 2");
        }
        if (t_low < 2 || t_low >= t_high) {
            throw InvalidArgument("GeoMLE needs 2 <= T1 < T2, got [" + std::to_string(t_low) + ", " +
                                  std::to_string(t_high) + "]");
        }
        if (degree < 1) {
            throw InvalidArgument("GeoMLE needs degree >= 1");
        }
    }
};

/// Bootstrap variances below this are floored before weighting.
inline constexpr double kVarianceFloor = 1e-12;

namespace detail {

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

struct BootstrapCurve {
    std::vector<double> mean_lid;    // m-bar per T
    std::vector<double> mean_radius; // Q-bar_T per T
    std::vector<double> variance;    // sigma per T
};

/**
 * Bootstrap averages of the MLE over T in [t_low, t_high].
 *
 * A resample draws reference_size rows with replacement. Multiplicities are
 * assigned to ranked positions rather than to row ids (the two are equal in
 * distribution), which makes the result independent of reference row order.
 * Positions past the end of `ranked` stand for rows that are not usable
 * (the query itself, zero-distance duplicates) and are dropped.
 */
inline BootstrapCurve bootstrap_curve(std::span<const Neighbor> ranked, std::size_t reference_size,
                                      const GeomleConfig& cfg, std::mt19937_64& rng) {
    const std::size_t T1 = cfg.t_low;
    const std::size_t T2 = cfg.t_high;
    const std::size_t width = T2 - T1 + 1;
    const std::size_t p = cfg.bootstrap_count;

    std::vector<double> lids(p * width);
    std::vector<double> radii(p * width);
    std::vector<std::uint32_t> counts(reference_size);
    std::vector<double> logs(T2);
    std::vector<double> prefix(T2 + 1);
    std::uniform_int_distribution<std::size_t> pick(0, reference_size - 1);

    constexpr int kMaxRedraws = 100;
    for (std::size_t b = 0; b < p; ++b) {
        bool filled = false;
        for (int attempt = 0; attempt < kMaxRedraws && !filled; ++attempt) {
            std::fill(counts.begin(), counts.end(), 0u);
            for (std::size_t k = 0; k < reference_size; ++k) {
                ++counts[pick(rng)];
            }
            std::size_t taken = 0;
            for (std::size_t pos = 0; pos < ranked.size() && taken < T2; ++pos) {
                const double lq = std::log(ranked[pos].distance);
                for (std::uint32_t c = 0; c < counts[pos] && taken < T2; ++c) {
                    logs[taken++] = lq;
                }
            }
            if (taken < T2) {
                continue;
            }
            prefix[0] = 0.0;
            for (std::size_t j = 0; j < T2; ++j) {
                prefix[j + 1] = prefix[j] + logs[j];
            }
            bool degenerate = false;
            for (std::size_t t = T1; t <= T2; ++t) {
                const double sum = static_cast<double>(t - 1) * logs[t - 1] - prefix[t - 1];
                if (!(sum > 0.0)) {
                    degenerate = true;
                    break;
                }
                lids[b * width + (t - T1)] = static_cast<double>(t - 1) / sum;
                radii[b * width + (t - T1)] = std::exp(logs[t - 1]);
            }
            filled = !degenerate;
        }
        if (!filled) {
            throw InvalidArgument("GeoMLE: could not draw a bootstrap resample with " + std::to_string(T2) +
                                  " usable neighbors");
        }
    }

    BootstrapCurve curve{std::vector<double>(width), std::vector<double>(width), std::vector<double>(width)};
    for (std::size_t k = 0; k < width; ++k) {
        double m = 0.0;
        double q = 0.0;
        for (std::size_t b = 0; b < p; ++b) {
            m += lids[b * width + k];
            q += radii[b * width + k];
        }
        m /= static_cast<double>(p);
        q /= static_cast<double>(p);
        double v = 0.0;
        for (std::size_t b = 0; b < p; ++b) {
            const double d = lids[b * width + k] - m;
            v += d * d;
        }
        curve.mean_lid[k] = m;
        curve.mean_radius[k] = q;
        curve.variance[k] = v / static_cast<double>(p);
    }
    return curve;
}

struct RegressionFit {
    double intercept;
    std::vector<double> coefficients;
};

/// Weighted least squares of m-bar on powers of Q-bar with weights 1/sigma.
/// Radii are normalized by their maximum before fitting; the intercept is
/// unaffected and the returned coefficients are mapped back to raw units.
inline RegressionFit fit_intercept(const BootstrapCurve& curve, std::size_t degree, RegressionBasis basis) {
    const auto rows = static_cast<Eigen::Index>(curve.mean_lid.size());
    const auto cols = static_cast<Eigen::Index>(degree + 1);
    const double scale = *std::max_element(curve.mean_radius.begin(), curve.mean_radius.end());
    const int step = basis == RegressionBasis::even ? 2 : 1;

    Eigen::MatrixXd A(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double w = std::sqrt(1.0 / std::max(curve.variance[r], kVarianceFloor));
        const double u = curve.mean_radius[r] / scale;
        A(r, 0) = w;
        for (Eigen::Index c = 1; c < cols; ++c) {
            A(r, c) = w * std::pow(u, static_cast<double>(step * c));
        }
        y(r) = w * curve.mean_lid[r];
    }
    const Eigen::VectorXd beta = A.colPivHouseholderQr().solve(y);

    RegressionFit fit{beta(0), {}};
    for (Eigen::Index c = 1; c < cols; ++c) {
        fit.coefficients.push_back(beta(c) / std::pow(scale, static_cast<double>(step * c)));
    }
    return fit;
}

inline LidEstimate geomle_one(const std::string& id, std::span<const Neighbor> ranked, std::size_t reference_size,
                              std::size_t dim, const GeomleConfig& cfg, std::mt19937_64& rng) {
    const auto curve = bootstrap_curve(ranked, reference_size, cfg, rng);
    const auto fit = fit_intercept(curve, cfg.degree, cfg.basis);

    LidEstimate e{id, fit.intercept, Method::geomle, cfg.t_high, {}};
    e.diagnostics.sigma = curve.variance.back();
    e.diagnostics.coefficients = fit.coefficients;
    if (!(fit.intercept > 0.0) || fit.intercept > static_cast<double>(dim) || !std::isfinite(fit.intercept)) {
        auto plain = mle_estimate(id, ranked, cfg.t_high, dim);
        e.value = plain.value;
        e.diagnostics.fallback = true;
        e.diagnostics.degenerate = plain.diagnostics.degenerate;
        e.diagnostics.clamped = plain.diagnostics.clamped;
    }
    return e;
}

} // namespace detail

/**
 * Distance-aware MLE for every query of `hoods`.
 *
 * For each query: p bootstrap resamples of the reference; per T in [T1, T2]
 * the bootstrap mean MLE, mean T-th neighbor distance and MLE variance;
 * then a weighted polynomial regression of the mean MLE on the mean radius,
 * whose intercept (radius -> 0) is the estimate. Query i uses its own
 * random substream derived from (rng_seed, i).
 */
inline std::vector<LidEstimate> geomle_lid(const Neighborhoods& hoods, const GeomleConfig& cfg, unsigned threads = 0) {
    cfg.validate();
    detail::check_usable(hoods, cfg.t_high);
    std::vector<LidEstimate> out(hoods.ranked.size());
    parallel_for(hoods.ranked.size(), threads, [&](std::size_t i) {
        auto rng = detail::substream(cfg.rng_seed, i);
        out[i] = detail::geomle_one(hoods.ids[i], hoods.ranked[i], hoods.reference_size, hoods.dim, cfg, rng);
    });
    return out;
}

inline std::vector<LidEstimate> geomle_lid(const EmbeddingSet& queries, const EmbeddingSet& reference,
                                           const GeomleConfig& cfg, bool self_reference, unsigned threads = 0) {
    cfg.validate();
    return geomle_lid(neighborhoods(queries, reference, self_reference, threads), cfg, threads);
}

// ---------------------------------------------------------------------------
// TwoNN
// ---------------------------------------------------------------------------

struct TwonnOptions {
    /// Fraction of the largest ratios mu = Q2/Q1 discarded.
    double trim_fraction = 0.1;
    /// Use d = N_kept / sum(log mu) instead of the line fit through the
    /// origin of -log(1 - F(mu)) against log(mu).
    bool closed_form = false;
};

struct TwonnResult {
    double dimension = 0.0;
    std::size_t kept = 0;
    /// Points whose nearest neighbor is closer than kDuplicateEpsilon.
    std::size_t skipped = 0;
};

/// TwoNN fit from the ratios mu_i = Q2/Q1 (any order, all >= 1).
inline TwonnResult twonn_from_ratios(std::vector<double> mu, const TwonnOptions& opt = {}) {
    if (opt.trim_fraction < 0.0 || opt.trim_fraction >= 1.0) {
        throw InvalidArgument("TwoNN trim fraction must lie in [0, 1)");
    }
    if (mu.empty()) {
        throw DataError("TwoNN: no usable ratios");
    }
    std::sort(mu.begin(), mu.end());
    const std::size_t N = mu.size();
    const auto kept = static_cast<std::size_t>(std::floor(static_cast<double>(N) * (1.0 - opt.trim_fraction)));
    if (kept < 1) {
        throw DataError("TwoNN: nothing left after trimming");
    }
    TwonnResult res;
    res.kept = kept;

    if (opt.closed_form) {
        double s = 0.0;
        for (std::size_t i = 0; i < kept; ++i) {
            s += std::log(mu[i]);
        }
        if (!(s > 0.0)) {
            throw DegenerateNeighborhood("TwoNN: all ratios equal 1");
        }
        res.dimension = static_cast<double>(kept) / s;
        return res;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < kept; ++i) {
        const double x = std::log(mu[i]);
        const double F = static_cast<double>(i + 1) / static_cast<double>(N);
        if (F >= 1.0) {
            break;
        }
        const double y = -std::log(1.0 - F);
        sxy += x * y;
        sxx += x * x;
    }
    if (!(sxx > 0.0)) {
        throw DegenerateNeighborhood("TwoNN: all ratios equal 1");
    }
    res.dimension = sxy / sxx;
    return res;
}

/// Estimator from the ratios mu_i = Q2/Q1 of each point's two nearest
/// neighbors. Requires n >= 3.
inline TwonnResult twonn_global(const EmbeddingSet& set, const TwonnOptions& opt = {}, unsigned threads = 0) {
    if (set.size() < 3) {
        throw InvalidArgument("TwoNN needs n >= 3");
    }
    if (opt.trim_fraction < 0.0 || opt.trim_fraction >= 1.0) {
        throw InvalidArgument("TwoNN trim fraction must lie in [0, 1)");
    }
    const std::size_t n = set.size();
    std::vector<double> ratio(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> cache;
    if (n <= kPairwiseCacheLimit) {
        cache = pairwise_distances(set, threads);
    }
    parallel_for(n, threads, [&](std::size_t i) {
        double q1 = std::numeric_limits<double>::infinity();
        double q2 = q1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double d = cache.empty() ? euclidean_distance(set.row(i), set.row(j)) : cache[i * n + j];
            if (d < q1) {
                q2 = q1;
                q1 = d;
            } else if (d < q2) {
                q2 = d;
            }
        }
        if (q1 >= kDuplicateEpsilon) {
            ratio[i] = q2 / q1;
        }
    });

    std::vector<double> mu;
    mu.reserve(n);
    for (double r : ratio) {
        if (!std::isnan(r)) {
            mu.push_back(r);
        }
    }
    if (mu.empty()) {
        throw DataError("TwoNN: every point has a duplicate nearest neighbor");
    }
    const std::size_t usable = mu.size();
    auto res = twonn_from_ratios(std::move(mu), opt);
    res.skipped = n - usable;
    return res;
}

// ---------------------------------------------------------------------------
// kNN-graph length estimator
// ---------------------------------------------------------------------------

struct KnnGraphOptions {
    std::size_t k = 5;
    /// Ascending subset sizes; empty means 10 geometrically spaced sizes in
    /// [n/10, n].
    std::vector<std::size_t> subset_sizes;
    std::size_t trials = 5;
    std::uint64_t rng_seed = 0;
};

struct KnnGraphResult {
    int dimension = 0;
    double raw_dimension = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<std::size_t> subset_sizes;
    std::vector<double> mean_lengths;
};

inline std::vector<std::size_t> geometric_sizes(std::size_t lo, std::size_t hi, std::size_t count) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        const double v = std::exp(std::log(static_cast<double>(lo)) * (1.0 - t) + std::log(static_cast<double>(hi)) * t);
        const auto s = static_cast<std::size_t>(std::llround(v));
        if (out.empty() || s > out.back()) {
            out.push_back(s);
        }
    }
    return out;
}

/**
 * Total k-NN graph edge length L(s) on random s-subsets grows like
 * s^((d-1)/d); a least-squares fit of log L against log s gives the slope b
 * and d = 1/(1-b), rounded to the nearest integer.
 */
inline KnnGraphResult knn_graph_dim(const EmbeddingSet& set, const KnnGraphOptions& opt = {}, unsigned threads = 0) {
    const std::size_t n = set.size();
    if (opt.k < 1) {
        throw InvalidArgument("kNN-graph needs k >= 1");
    }
    if (opt.trials < 1) {
        throw InvalidArgument("kNN-graph needs trials >= 1");
    }
    auto sizes = opt.subset_sizes;
    if (sizes.empty()) {
        sizes = geometric_sizes(std::max<std::size_t>(opt.k + 2, n / 10), n, 10);
    }
    if (sizes.size() < 2) {
        throw InvalidArgument("kNN-graph needs at least two subset sizes");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if ((i > 0 && sizes[i] <= sizes[i - 1]) || sizes[i] > n || sizes[i] <= opt.k) {
            throw InvalidArgument("kNN-graph subset sizes must be strictly ascending, > k and <= n");
        }
    }

    const auto dist = pairwise_distances(set, threads);
    std::vector<double> lengths(sizes.size() * opt.trials);
    parallel_for(lengths.size(), threads, [&](std::size_t job) {
        const std::size_t si = job / opt.trials;
        const std::size_t trial = job % opt.trials;
        const std::size_t s = sizes[si];
        auto rng = detail::substream(opt.rng_seed, (static_cast<std::uint64_t>(s) << 20) ^ trial);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = 0; i < s; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(perm[i], perm[pick(rng)]);
        }
        double total = 0.0;
        std::vector<double> row(s - 1);
        for (std::size_t a = 0; a < s; ++a) {
            std::size_t w = 0;
            for (std::size_t b = 0; b < s; ++b) {
                if (b != a) {
                    row[w++] = dist[perm[a] * n + perm[b]];
                }
            }
            std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(opt.k - 1), row.end());
            std::sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(opt.k));
            for (std::size_t j = 0; j < opt.k; ++j) {
                total += row[j];
            }
        }
        lengths[job] = total;
    });

    KnnGraphResult res;
    res.subset_sizes = sizes;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        double mean = 0.0;
        for (std::size_t t = 0; t < opt.trials; ++t) {
            mean += lengths[si * opt.trials + t];
        }
        mean /= static_cast<double>(opt.trials);
        res.mean_lengths.push_back(mean);
        if (!(mean > 0.0)) {
            throw DataError("kNN-graph: zero total edge length (duplicate points)");
        }
        xs.push_back(std::log(static_cast<double>(sizes[si])));
        ys.push_back(std::log(mean));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    res.slope = sxy / sxx;
    res.intercept = my - res.slope * mx;
    // slope in (-1, 1) maps to d > 1/2; anything else has no finite dimension
    if (!(res.slope < 1.0) || !(res.slope > -1.0)) {
        throw DataError("slope out of range for finite dimension: " + std::to_string(res.slope));
    }
    res.raw_dimension = 1.0 / (1.0 - res.slope);
    res.dimension = static_cast<int>(std::lround(res.raw_dimension));
    return res;
}

/// One JSONL row: {"id", "lid", "method", "T", "fallback", "sigma"}.
/// Degenerate estimates carry "lid": null and "degenerate": true.
inline nlohmann::json estimate_to_json(const LidEstimate& e) {
    nlohmann::json j{{"id", e.sample_id},
                     {"lid", nullptr},
                     {"method", std::string(to_string(e.method))},
                     {"T", e.T_used},
                     {"fallback", e.diagnostics.fallback},
                     {"sigma", e.diagnostics.sigma}};
    if (e.ok()) {
        j["lid"] = e.value;
    } else {
        j["degenerate"] = true;
    }
    if (e.diagnostics.clamped) {
        j["clamped"] = true;
    }
    return j;
}

} // namespace lidkit
