#pragma once

// Ground-truth-dimension manifolds embedded in a high ambient dimension.

#include <lidkit/datamodel.hpp>
#include <lidkit/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace lidkit {

enum class ManifoldKind { sphere, norm };

struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::sphere;
    std::size_t intrinsic_dim = 10;
    std::size_t ambient_dim = 4096;
    std::size_t n = 1000;
    /// RMS length of the added isotropic noise vector; each ambient
    /// coordinate gets N(0, (noise_sigma^2) / D).
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 0;
    bool rotate = true;
    /// Seed of the random embedding; defaults to rng_seed. Sets that share it
    /// lie on the same embedded manifold with independent samples.
    std::optional<std::uint64_t> rotation_seed;

    void validate() const {
        if (intrinsic_dim < 1 || intrinsic_dim >= ambient_dim) {
            throw InvalidArgument("manifold needs 1 <= m < D, got m=" + std::to_string(intrinsic_dim) +
                                  ", D=" + std::to_string(ambient_dim));
        }
        if (n < 1) {
            throw InvalidArgument("manifold needs n >= 1");
        }
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
            throw InvalidArgument("noise_sigma must be a finite value >= 0");
        }
    }
};

namespace detail {

inline std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
    return std::mt19937_64(seq);
}

/// First `cols` columns of a Haar-random D x D orthogonal matrix: thin QR of
/// a Gaussian matrix with the signs of R's diagonal folded into Q.
inline Eigen::MatrixXd random_orthonormal_columns(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            g(r, c) = gauss(rng);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
    const Eigen::MatrixXd& r = qr.matrixQR();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        if (r(c, c) < 0.0) {
            q.col(c) *= -1.0;
        }
    }
    return q;
}

/// Embeds k-dimensional coordinates (n x k, row-major) into D dims, by zero
/// padding or by a random isometry, then adds noise.
inline EmbeddingSet embed(const std::vector<double>& coords, std::size_t k, const ManifoldSpec& spec,
                          const std::string& id_prefix) {
    const std::size_t n = spec.n;
    const std::size_t D = spec.ambient_dim;
    std::vector<float> values(n * D, 0.0f);

    if (spec.rotate) {
        auto rng = seeded(spec.rotation_seed.value_or(spec.rng_seed), 2);
        const Eigen::MatrixXd basis = random_orthonormal_columns(D, k, rng);
        Eigen::VectorXd x(static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < k; ++c) {
                x(static_cast<Eigen::Index>(c)) = coords[i * k + c];
            }
            const Eigen::VectorXd y = basis * x;
            for (std::size_t d = 0; d < D; ++d) {
                values[i * D + d] = static_cast<float>(y(static_cast<Eigen::Index>(d)));
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < k; ++c) {
                values[i * D + c] = static_cast<float>(coords[i * k + c]);
            }
        }
    }

    if (spec.noise_sigma > 0.0) {
        auto rng = seeded(spec.rng_seed, 3);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma / std::sqrt(static_cast<double>(D)));
        for (auto& v : values) {
            v = static_cast<float>(static_cast<double>(v) + noise(rng));
        }
    }

    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = id_prefix + std::to_string(i);
    }
    return EmbeddingSet(std::move(ids), std::move(values), D);
}

} // namespace detail

/// Uniform points on the unit m-sphere S^m (normalized (m+1)-dim Gaussians).
inline EmbeddingSet gen_sphere(const ManifoldSpec& spec, const std::string& id_prefix = "sphere-") {
    if (spec.kind != ManifoldKind::sphere) {
        throw InvalidArgument("gen_sphere needs kind == sphere");
    }
    spec.validate();
    const std::size_t k = spec.intrinsic_dim + 1;
    auto rng = detail::seeded(spec.rng_seed, 1);
    std::normal_distribution<double> gauss;
    std::vector<double> coords(spec.n * k);
    for (std::size_t i = 0; i < spec.n; ++i) {
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double g = gauss(rng);
                coords[i * k + c] = g;
                norm2 += g * g;
            }
        } while (norm2 == 0.0);
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t c = 0; c < k; ++c) {
            coords[i * k + c] *= inv;
        }
    }
    return detail::embed(coords, k, spec, id_prefix);
}

/// Standard Gaussian blob in m dimensions.
inline EmbeddingSet gen_norm(const ManifoldSpec& spec, const std::string& id_prefix = "norm-") {
    if (spec.kind != ManifoldKind::norm) {
        throw InvalidArgument("gen_norm needs kind == norm");
    }
    spec.validate();
    const std::size_t k = spec.intrinsic_dim;
    auto rng = detail::seeded(spec.rng_seed, 1);
    std::normal_distribution<double> gauss;
    std::vector<double> coords(spec.n * k);
    for (auto& c : coords) {
        c = gauss(rng);
    }
    return detail::embed(coords, k, spec, id_prefix);
}

inline EmbeddingSet gen_manifold(const ManifoldSpec& spec) {
    return spec.kind == ManifoldKind::sphere ? gen_sphere(spec) : gen_norm(spec);
}

struct MixtureBenchmark {
    EmbeddingSet set;
    /// 1 for rows from the low-dimensional sphere ("truthful"), else 0.
    std::vector<int> labels;
};

/**
 * n_each points from S^{m_low} labeled 1 plus n_each from S^{m_high}
 * labeled 0, each sphere in its own random subspace of R^D, shuffled by
 * `rng_seed`. Ids are "mix-<row>" after shuffling. `geometry_seed`
 * (default rng_seed) fixes the two subspaces, so mixtures that share it
 * differ only in their samples.
 */
inline MixtureBenchmark mixture_benchmark(std::size_t m_low, std::size_t m_high, std::size_t D, std::size_t n_each,
                                          std::uint64_t rng_seed,
                                          std::optional<std::uint64_t> geometry_seed = std::nullopt) {
    if (!(m_low < m_high && m_high < D)) {
        throw InvalidArgument("mixture needs m_low < m_high < D, got " + std::to_string(m_low) + ", " +
                              std::to_string(m_high) + ", " + std::to_string(D));
    }
    if (m_low < 1 || n_each < 1) {
        throw InvalidArgument("mixture needs m_low >= 1 and n_each >= 1");
    }
    const std::uint64_t g = geometry_seed.value_or(rng_seed);
    const auto low = gen_sphere({ManifoldKind::sphere, m_low, D, n_each, 0.0, rng_seed * 2 + 11, true, g * 2 + 11});
    const auto high = gen_sphere({ManifoldKind::sphere, m_high, D, n_each, 0.0, rng_seed * 2 + 12, true, g * 2 + 12});

    std::vector<std::size_t> order(2 * n_each);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = detail::seeded(rng_seed, 4);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }

    std::vector<float> values;
    values.reserve(order.size() * D);
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t src = order[r];
        const auto row = src < n_each ? low.row(src) : high.row(src - n_each);
        values.insert(values.end(), row.begin(), row.end());
        ids.push_back("mix-" + std::to_string(r));
        labels.push_back(src < n_each ? 1 : 0);
    }
    return {EmbeddingSet(std::move(ids), std::move(values), D), std::move(labels)};
}

} // namespace lidkit
