#pragma once

// Truthfulness labeling (Rouge-L), AUROC, layer selection and the
// end-to-end detection pipeline.

#include <lidkit/datamodel.hpp>
#include <lidkit/error.hpp>
#include <lidkit/estimators.hpp>
#include <lidkit/neighbors.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lidkit {

// ---------------------------------------------------------------------------
// Rouge-L
// ---------------------------------------------------------------------------

/// Lowercase, replace every non-alphanumeric byte with a space, split on
/// whitespace.
inline std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (c < 0x80 && std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

/// Token-level longest common subsequence length, O(|a|*|b|) time and
/// O(|b|) memory.
inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline double rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference) {
    if (candidate.empty() || reference.empty()) {
        return 0.0;
    }
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0.0) {
        return 0.0;
    }
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    return 2.0 * p * r / (p + r);
}

/// Rouge-L F-measure between a generated answer and a reference answer.
inline double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = rouge_tokens(candidate);
    const auto r = rouge_tokens(reference);
    return rouge_l_tokens(c, r);
}

struct LabelResult {
    std::vector<SampleRecord> records;
    /// Records that already carried a label which was replaced.
    std::size_t overwritten = 0;
};

/// label = 1 iff rouge_l(generation, reference) >= threshold.
inline LabelResult label_samples(std::span<const SampleRecord> samples, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw InvalidArgument("threshold must lie in (0, 1]");
    }
    LabelResult out;
    out.records.assign(samples.begin(), samples.end());
    for (auto& r : out.records) {
        if (r.label) {
            ++out.overwritten;
        }
        r.label = rouge_l(r.generation, r.reference) >= threshold ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// AUROC
// ---------------------------------------------------------------------------

/// Probability that a random positive outranks a random negative, ties
/// counted one half. Computed from midranks (Mann-Whitney U).
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw InvalidArgument("scores and labels differ in length");
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw InvalidArgument("labels must be 0 or 1");
        }
        if (!std::isfinite(scores[i])) {
            throw InvalidArgument("scores must be finite");
        }
        pos += static_cast<std::size_t>(labels[i]);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
        throw InvalidArgument("undefined AUROC: labels contain a single class");
    }

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the rank sum of positives, so midranks stay integral.
    double twice_rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::size_t pos_in_group = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            pos_in_group += static_cast<std::size_t>(labels[order[j]]);
            ++j;
        }
        // ranks i+1..j share the midrank (i+1+j)/2
        twice_rank_sum += static_cast<double>(pos_in_group) * static_cast<double>(i + 1 + j);
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double u = twice_rank_sum / 2.0 - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

// ---------------------------------------------------------------------------
// Layer selection
// ---------------------------------------------------------------------------

struct EstimatorSettings {
    Method method = Method::mle;
    std::size_t neighbors = 500;
    GeomleConfig geomle = GeomleConfig::for_neighbors(500);
    unsigned threads = 0;
};

inline nlohmann::json settings_to_json(const EstimatorSettings& s) {
    nlohmann::json j{{"method", std::string(to_string(s.method))}, {"T", s.neighbors}};
    if (s.method == Method::geomle) {
        j["geomle"] = {{"bootstrap_count", s.geomle.bootstrap_count},
                       {"T1", s.geomle.t_low},
                       {"T2", s.geomle.t_high},
                       {"degree", s.geomle.degree},
                       {"basis", s.geomle.basis == RegressionBasis::even ? "even" : "full"},
                       {"seed", s.geomle.rng_seed}};
    }
    return j;
}

/// Per-sample estimates of `queries` with the configured method.
inline std::vector<LidEstimate> estimate_lids(const EmbeddingSet& queries, const EmbeddingSet& reference,
                                              bool self_reference, const EstimatorSettings& s) {
    switch (s.method) {
    case Method::mle: return mle_lid_batch(queries, reference, s.neighbors, self_reference, s.threads);
    case Method::geomle: return geomle_lid(queries, reference, s.geomle, self_reference, s.threads);
    default: throw InvalidArgument("per-sample scoring supports mle and geomle only");
    }
}

struct LayerSweep {
    /// Layer index -> sum of per-sample LIDs over the query set.
    std::map<int, double> per_layer_sums;
    int argmax_layer = 0;
    int chosen_layer = 0;
    /// Layers dropped because every sample was degenerate.
    std::vector<int> excluded_layers;
};

/// Order-independent sum: values are summed in sorted order.
inline double stable_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) {
        s += v;
    }
    return s;
}

/**
 * Picks the layer whose summed LID is largest, then moves `shift` layers
 * deeper (default one), clamped to the last layer of the stack. Ties in the
 * argmax resolve to the earlier layer.
 */
inline LayerSweep select_layer(const std::map<int, double>& per_layer_sums, const std::vector<int>& stack_layers,
                               int shift = 1) {
    if (per_layer_sums.empty()) {
        throw DataError("layer sweep: no layer produced a usable estimate");
    }
    LayerSweep out;
    out.per_layer_sums = per_layer_sums;
    auto best = per_layer_sums.begin();
    for (auto it = per_layer_sums.begin(); it != per_layer_sums.end(); ++it) {
        if (it->second > best->second) {
            best = it;
        }
    }
    out.argmax_layer = best->first;
    const auto pos = std::find(stack_layers.begin(), stack_layers.end(), best->first) - stack_layers.begin();
    const auto target = std::clamp<std::ptrdiff_t>(pos + shift, 0, static_cast<std::ptrdiff_t>(stack_layers.size()) - 1);
    out.chosen_layer = stack_layers[static_cast<std::size_t>(target)];
    return out;
}

inline LayerSweep layer_sweep(const LayerStack& stack, const EstimatorSettings& settings, int shift = 1) {
    if (stack.size() < 2) {
        throw InvalidArgument("layer sweep needs at least two layers");
    }
    std::map<int, double> sums;
    std::vector<int> excluded;
    for (const auto& layer : stack.layers()) {
        const auto est = estimate_lids(layer, layer, true, settings);
        std::vector<double> values;
        for (const auto& e : est) {
            if (e.ok()) {
                values.push_back(e.value);
            }
        }
        if (values.empty()) {
            excluded.push_back(*layer.layer());
            continue;
        }
        sums[*layer.layer()] = stable_sum(std::move(values));
    }
    auto out = select_layer(sums, stack.layer_indices(), shift);
    out.excluded_layers = std::move(excluded);
    return out;
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

struct ScoredSample {
    std::string id;
    double lid;
    double score;
    int label;
};

struct DetectionReport {
    double auroc = 0.5;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    std::vector<ScoredSample> per_sample;
    /// Samples left out because their neighborhood was degenerate.
    std::vector<std::string> skipped;
    std::optional<int> layer_used;
    nlohmann::json config;
};

/**
 * Scores each sample by -LID (higher means more likely truthful) and reports
 * the AUROC against labels, where label 1 is truthful.
 *
 * Without `reference` the activations are their own neighbor pool (each
 * query excludes itself); with it, neighbors come from the reference pool
 * and no exclusion is applied.
 */
inline DetectionReport detect(const EmbeddingSet& activations, std::span<const SampleRecord> samples,
                              const EstimatorSettings& settings, const EmbeddingSet* reference = nullptr) {
    if (samples.size() != activations.size()) {
        throw DataError("id mismatch: " + std::to_string(activations.size()) + " activation rows but " +
                        std::to_string(samples.size()) + " samples");
    }
    std::unordered_map<std::string, int> label_of;
    for (const auto& s : samples) {
        if (!activations.index_of(s.id)) {
            throw DataError("id mismatch: sample '" + s.id + "' has no activation row");
        }
        if (!s.label) {
            throw DataError("sample '" + s.id + "' has no label");
        }
        if (!label_of.emplace(s.id, *s.label).second) {
            throw DataError("duplicate sample id '" + s.id + "'");
        }
    }

    const bool self_reference = reference == nullptr;
    const auto est = estimate_lids(activations, self_reference ? activations : *reference, self_reference, settings);

    DetectionReport rep;
    rep.config = settings_to_json(settings);
    rep.config["reference"] = self_reference ? "self" : "external";
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& e : est) {
        if (!e.ok()) {
            rep.skipped.push_back(e.sample_id);
            continue;
        }
        const int label = label_of.at(e.sample_id);
        rep.per_sample.push_back({e.sample_id, e.value, -e.value, label});
        scores.push_back(-e.value);
        labels.push_back(label);
        (label == 1 ? rep.n_pos : rep.n_neg) += 1;
    }
    rep.auroc = auroc(scores, labels);
    return rep;
}

inline nlohmann::json report_to_json(const DetectionReport& r, bool include_samples = true) {
    nlohmann::json j{{"auroc", r.auroc},
                     {"n_pos", r.n_pos},
                     {"n_neg", r.n_neg},
                     {"layer_used", nullptr},
                     {"skipped", r.skipped},
                     {"config", r.config}};
    if (r.layer_used) {
        j["layer_used"] = *r.layer_used;
    }
    if (include_samples) {
        auto rows = nlohmann::json::array();
        for (const auto& s : r.per_sample) {
            rows.push_back({{"id", s.id}, {"lid", s.lid}, {"score", s.score}, {"label", s.label}});
        }
        j["per_sample"] = std::move(rows);
    }
    return j;
}

/// CSV with header id,lid,score,label.
inline void write_report_csv(const DetectionReport& r, std::ostream& out) {
    out << "id,lid,score,label\n";
    out.precision(17);
    for (const auto& s : r.per_sample) {
        std::string id = s.id;
        if (id.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : id) {
                if (c == '"') {
                    quoted += '"';
                }
                quoted += c;
            }
            id = quoted + "\"";
        }
        out << id << ',' << s.lid << ',' << s.score << ',' << s.label << '\n';
    }
}

} // namespace lidkit
