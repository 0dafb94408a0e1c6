#pragma once

#include <lidkit/lidkit.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

namespace lidkit::test {

/// Gaussian points with ids "<prefix><row>".
inline EmbeddingSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed, const std::string& prefix = "p",
                               double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<std::string> ids(n);
    std::vector<float> values(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = prefix + std::to_string(i);
    }
    for (auto& v : values) {
        v = static_cast<float>(scale * g(rng));
    }
    return EmbeddingSet(std::move(ids), std::move(values), dim);
}

/// Copy of `set` with every value multiplied by c (exact for powers of two).
inline EmbeddingSet scaled(const EmbeddingSet& set, float c) {
    std::vector<float> v(set.values().begin(), set.values().end());
    for (auto& x : v) {
        x *= c;
    }
    return EmbeddingSet(set.ids(), std::move(v), set.dim(), set.layer());
}

/// Copy of `set` multiplied by a random orthogonal matrix.
inline EmbeddingSet rotated(const EmbeddingSet& set, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto q = detail::random_orthonormal_columns(set.dim(), set.dim(), rng);
    std::vector<float> v(set.values().size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto r = set.row(i);
        for (std::size_t a = 0; a < set.dim(); ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < set.dim(); ++b) {
                s += q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * r[b];
            }
            v[i * set.dim() + a] = static_cast<float>(s);
        }
    }
    return EmbeddingSet(set.ids(), std::move(v), set.dim(), set.layer());
}

/// Points t * e on a segment, t uniform in [0, 1], rotated into `dim` dims.
inline EmbeddingSet segment(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> dir(dim);
    std::normal_distribution<double> g;
    double norm = 0.0;
    for (auto& d : dir) {
        d = g(rng);
        norm += d * d;
    }
    norm = std::sqrt(norm);
    std::vector<std::string> ids(n);
    std::vector<float> values(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = "s" + std::to_string(i);
        const double t = u(rng);
        for (std::size_t c = 0; c < dim; ++c) {
            values[i * dim + c] = static_cast<float>(t * dir[c] / norm);
        }
    }
    return EmbeddingSet(std::move(ids), std::move(values), dim);
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "lidkit";
        for (auto& c : name) {
            if (c == '/') {
                c = '_';
            }
        }
        path_ = std::filesystem::temp_directory_path() / ("lidkit_test_" + name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace lidkit::test
