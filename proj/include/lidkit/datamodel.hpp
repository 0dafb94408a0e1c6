#pragma once

// Shared domain types plus the on-disk formats: the LIDA binary activation
// file, multi-layer dump directories and JSONL sample metadata.

#include <lidkit/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lidkit {

/**
 * An n x D matrix of representation vectors, one row per sample.
 *
 * Immutable after construction. The constructor enforces the invariants:
 * n >= 1, D >= 1, unique non-empty ids (no newlines), finite values.
 */
class EmbeddingSet {
public:
    EmbeddingSet(std::vector<std::string> ids, std::vector<float> values, std::size_t dim,
                 std::optional<int> layer = std::nullopt, std::string provenance = {})
        : ids_(std::move(ids)), values_(std::move(values)), dim_(dim), layer_(layer),
          provenance_(std::move(provenance)) {
        if (ids_.empty()) {
            throw DataError("empty set");
        }
        if (dim_ == 0) {
            throw DataError("dimension must be >= 1");
        }
        if (values_.size() != ids_.size() * dim_) {
            throw DataError("value count " + std::to_string(values_.size()) + " != n*D = " +
                            std::to_string(ids_.size() * dim_));
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw DataError("non-finite value at row " + std::to_string(i / dim_) + ", column " +
                                std::to_string(i % dim_));
            }
        }
        index_.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            const auto& id = ids_[i];
            if (id.empty()) {
                throw DataError("empty sample id at row " + std::to_string(i));
            }
            if (id.find('\n') != std::string::npos) {
                throw DataError("sample id contains a newline: row " + std::to_string(i));
            }
            if (!index_.emplace(id, i).second) {
                throw DataError("duplicate sample id '" + id + "'");
            }
        }
    }

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const float> row(std::size_t i) const noexcept {
        return {values_.data() + i * dim_, dim_};
    }
    std::span<const float> values() const noexcept { return values_; }

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::string& id(std::size_t i) const noexcept { return ids_[i]; }

    std::optional<std::size_t> index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    std::optional<int> layer() const noexcept { return layer_; }
    const std::string& provenance() const noexcept { return provenance_; }

    /// Same ids and bit-identical values (layer and provenance ignored).
    friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
        if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.values_.size() != b.values_.size()) {
            return false;
        }
        return std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
    }

private:
    std::vector<std::string> ids_;
    std::vector<float> values_;
    std::size_t dim_;
    std::optional<int> layer_;
    std::string provenance_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// One question/answer pair. `label` is 1 for truthful, 0 otherwise.
struct SampleRecord {
    std::string id;
    std::string question;
    std::string generation;
    std::string reference;
    std::optional<int> label;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Per-layer activations of the same samples, ordered by layer index.
class LayerStack {
public:
    explicit LayerStack(std::vector<EmbeddingSet> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) {
            throw DataError("layer stack is empty");
        }
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (!layers_[k].layer()) {
                throw DataError("layer stack member " + std::to_string(k) + " has no layer index");
            }
            if (k > 0) {
                if (*layers_[k].layer() <= *layers_[k - 1].layer()) {
                    throw DataError("layer indices must be strictly increasing");
                }
                if (layers_[k].ids() != layers_[0].ids()) {
                    throw DataError("layer " + std::to_string(*layers_[k].layer()) +
                                    " ids differ from layer " + std::to_string(*layers_[0].layer()));
                }
            }
        }
    }

    std::size_t size() const noexcept { return layers_.size(); }
    const EmbeddingSet& operator[](std::size_t k) const noexcept { return layers_[k]; }
    const std::vector<EmbeddingSet>& layers() const noexcept { return layers_; }

    std::vector<int> layer_indices() const {
        std::vector<int> out;
        out.reserve(layers_.size());
        for (const auto& l : layers_) {
            out.push_back(*l.layer());
        }
        return out;
    }

private:
    std::vector<EmbeddingSet> layers_;
};

// ---------------------------------------------------------------------------
// LIDA binary format
//
//   0..3   "LIDA"
//   4..5   version (u16 LE, = 1)
//   6..7   reserved (= 0)
//   8..15  n (u64 LE)
//   16..23 D (u64 LE)
//   24..31 id-table length B (u64 LE)
//   B bytes of '\n'-separated UTF-8 ids
//   n*D float32 LE, row-major
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kLidaVersion = 1;
inline constexpr std::size_t kLidaHeaderSize = 32;

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

} // namespace detail

/// Serialize to the LIDA byte layout.
inline std::string encode_activations(const EmbeddingSet& set) {
    std::string ids;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (i > 0) {
            ids.push_back('\n');
        }
        ids += set.id(i);
    }
    std::string out;
    out.reserve(kLidaHeaderSize + ids.size() + set.values().size() * 4);
    out += "LIDA";
    detail::put_le(out, kLidaVersion, 2);
    detail::put_le(out, 0, 2);
    detail::put_le(out, set.size(), 8);
    detail::put_le(out, set.dim(), 8);
    detail::put_le(out, ids.size(), 8);
    out += ids;
    for (float v : set.values()) {
        detail::put_le(out, std::bit_cast<std::uint32_t>(v), 4);
    }
    return out;
}

inline EmbeddingSet decode_activations(std::string_view bytes, std::optional<int> layer = std::nullopt,
                                       std::string provenance = {}) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kLidaHeaderSize) {
        if (bytes.size() >= 4 && bytes.substr(0, 4) != "LIDA") {
            throw DataError("bad magic");
        }
        throw DataError("truncated header");
    }
    if (bytes.substr(0, 4) != "LIDA") {
        throw DataError("bad magic");
    }
    const auto version = detail::get_le(p + 4, 2);
    if (version != kLidaVersion) {
        throw DataError("version mismatch: file has " + std::to_string(version) + ", reader supports " +
                        std::to_string(kLidaVersion));
    }
    const std::uint64_t n = detail::get_le(p + 8, 8);
    const std::uint64_t dim = detail::get_le(p + 16, 8);
    const std::uint64_t id_bytes = detail::get_le(p + 24, 8);
    if (n == 0) {
        throw DataError("empty set");
    }
    const std::uint64_t avail = bytes.size() - kLidaHeaderSize;
    if (id_bytes > avail) {
        throw DataError("truncated id table");
    }
    if (dim != 0 && n > (avail - id_bytes) / dim / 4 + 1) {
        throw DataError("truncated payload: header claims n=" + std::to_string(n) + ", D=" + std::to_string(dim));
    }
    const std::uint64_t payload = n * dim * 4;
    const std::uint64_t have = avail - id_bytes;
    if (have < payload) {
        throw DataError("truncated payload: expected " + std::to_string(payload) + " bytes, found " +
                        std::to_string(have));
    }
    if (have > payload) {
        throw DataError("trailing bytes after payload: " + std::to_string(have - payload));
    }

    std::string_view table = bytes.substr(kLidaHeaderSize, id_bytes);
    if (!table.empty() && table.back() == '\n') {
        table.remove_suffix(1);
    }
    std::vector<std::string> ids;
    ids.reserve(n);
    std::size_t start = 0;
    while (true) {
        auto pos = table.find('\n', start);
        ids.emplace_back(table.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    if (ids.size() != n) {
        throw DataError("id table holds " + std::to_string(ids.size()) + " ids, header says n=" + std::to_string(n));
    }

    std::vector<float> values(n * dim);
    const unsigned char* q = p + kLidaHeaderSize + id_bytes;
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(q + 4 * i, 4)));
        if (std::isnan(values[i])) {
            throw DataError("NaN encountered at row " + std::to_string(i / dim) + ", column " +
                            std::to_string(i % dim));
        }
    }
    return EmbeddingSet(std::move(ids), std::move(values), dim, layer, std::move(provenance));
}

inline void write_activations(const EmbeddingSet& set, const std::filesystem::path& path) {
    detail::write_file(path, encode_activations(set));
}

inline EmbeddingSet read_activations(const std::filesystem::path& path, std::optional<int> layer = std::nullopt) {
    try {
        return decode_activations(detail::read_file(path), layer, path.filename().string());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Multi-layer dump: <dir>/layer_<k>.bin + <dir>/manifest.json
// ---------------------------------------------------------------------------

struct LayerManifest {
    std::string model;
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<int> layers;
    int token_position = -1;
};

inline std::filesystem::path layer_file(const std::filesystem::path& dir, int layer) {
    return dir / ("layer_" + std::to_string(layer) + ".bin");
}

inline LayerManifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
        LayerManifest m;
        m.model = j.value("model", std::string{});
        m.n = j.at("n").get<std::size_t>();
        m.dim = j.at("D").get<std::size_t>();
        m.layers = j.at("layers").get<std::vector<int>>();
        m.token_position = j.value("token_position", -1);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write_manifest(const LayerManifest& m, const std::filesystem::path& dir) {
    nlohmann::json j{{"model", m.model},
                     {"n", m.n},
                     {"D", m.dim},
                     {"layers", m.layers},
                     {"token_position", m.token_position}};
    detail::write_file(dir / "manifest.json", j.dump(2) + "\n");
}

/// Loads one layer of a dump directory, checking it against the manifest.
inline EmbeddingSet load_layer(const std::filesystem::path& dir, const LayerManifest& m, int layer) {
    auto set = read_activations(layer_file(dir, layer), layer);
    if (set.size() != m.n || set.dim() != m.dim) {
        throw DataError("layer " + std::to_string(layer) + " shape " + std::to_string(set.size()) + "x" +
                        std::to_string(set.dim()) + " disagrees with manifest " + std::to_string(m.n) + "x" +
                        std::to_string(m.dim));
    }
    return set;
}

inline LayerStack read_layer_stack(const std::filesystem::path& dir) {
    const auto m = read_manifest(dir);
    std::vector<EmbeddingSet> layers;
    layers.reserve(m.layers.size());
    for (int k : m.layers) {
        layers.push_back(load_layer(dir, m, k));
    }
    return LayerStack(std::move(layers));
}

inline void write_layer_stack(const LayerStack& stack, const std::filesystem::path& dir, const std::string& model,
                              int token_position = -1) {
    std::filesystem::create_directories(dir);
    for (const auto& layer : stack.layers()) {
        write_activations(layer, layer_file(dir, *layer.layer()));
    }
    write_manifest({model, stack[0].size(), stack[0].dim(), stack.layer_indices(), token_position}, dir);
}

// ---------------------------------------------------------------------------
// JSONL samples
// ---------------------------------------------------------------------------

inline SampleRecord sample_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw DataError("expected a JSON object");
    }
    SampleRecord r;
    for (const char* key : {"id", "generation", "reference"}) {
        if (!j.contains(key)) {
            throw DataError(std::string("missing required field \"") + key + "\"");
        }
        if (!j.at(key).is_string()) {
            throw DataError(std::string("field \"") + key + "\" must be a string");
        }
    }
    r.id = j.at("id").get<std::string>();
    if (r.id.empty()) {
        throw DataError("field \"id\" is empty");
    }
    r.generation = j.at("generation").get<std::string>();
    r.reference = j.at("reference").get<std::string>();
    if (auto it = j.find("question"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw DataError("field \"question\" must be a string");
        }
        r.question = it->get<std::string>();
    }
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1)) {
            throw DataError("field \"label\" must be 0 or 1");
        }
        r.label = it->get<int>();
    }
    return r;
}

inline nlohmann::json sample_to_json(const SampleRecord& r) {
    nlohmann::json j{{"id", r.id}, {"question", r.question}, {"generation", r.generation}, {"reference", r.reference}};
    if (r.label) {
        j["label"] = *r.label;
    }
    return j;
}

/// Parses newline-delimited JSON; blank lines are skipped. Errors name the
/// 1-based line number.
inline std::vector<SampleRecord> parse_samples(std::istream& in) {
    std::vector<SampleRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<SampleRecord> read_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    try {
        return parse_samples(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write_samples(std::span<const SampleRecord> samples, std::ostream& out) {
    for (const auto& r : samples) {
        out << sample_to_json(r).dump() << '\n';
    }
}

inline void write_samples(std::span<const SampleRecord> samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    write_samples(samples, out);
}

} // namespace lidkit
