// lidkit: local intrinsic dimension estimation and LID-based truthfulness
// scoring from the command line.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage error. Machine output
// (JSON, JSONL, CSV) goes to stdout or -o files; human text to stderr.

#include <lidkit/lidkit.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kDefaultSeed = 42;

/// Writes to the named file, or stdout for "" / "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::trunc);
            if (!file_) {
                throw lidkit::DataError("cannot open '" + path + "' for writing");
            }
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
    bool is_stdout() const { return !file_.is_open(); }

private:
    std::ofstream file_;
};

// ---------------------------------------------------------------------------
// gen-synthetic
// ---------------------------------------------------------------------------

struct GenOptions {
    std::string manifold = "sphere";
    std::size_t m = 10;
    std::size_t ambient = 4096;
    std::size_t n = 1000;
    double noise = 0.0;
    std::uint64_t seed = kDefaultSeed;
    bool no_rotate = false;
    std::optional<std::uint64_t> geometry_seed;
    std::size_t m_low = 8;
    std::size_t m_high = 16;
    std::size_t n_each = 500;
    std::string output;
    std::string labels;
};

int run_gen(const GenOptions& o) {
    if (o.output.empty()) {
        throw UsageError("-o/--output is required");
    }
    json summary;
    if (o.manifold == "mixture") {
        if (!(o.m_low < o.m_high && o.m_high < o.ambient)) {
            throw UsageError("mixture needs --m-low < --m-high < --ambient");
        }
        const auto mix = lidkit::mixture_benchmark(o.m_low, o.m_high, o.ambient, o.n_each, o.seed, o.geometry_seed);
        lidkit::write_activations(mix.set, o.output);
        if (!o.labels.empty()) {
            std::vector<lidkit::SampleRecord> recs;
            for (std::size_t i = 0; i < mix.set.size(); ++i) {
                recs.push_back({mix.set.id(i), "", "", "", mix.labels[i]});
            }
            lidkit::write_samples(recs, std::filesystem::path(o.labels));
        }
        summary = {{"manifold", "mixture"}, {"n", mix.set.size()}, {"D", o.ambient},
                   {"m_low", o.m_low},      {"m_high", o.m_high},   {"seed", o.seed},
                   {"geometry_seed", o.geometry_seed.value_or(o.seed)}};
    } else {
        lidkit::ManifoldSpec spec;
        if (o.manifold == "sphere") {
            spec.kind = lidkit::ManifoldKind::sphere;
        } else if (o.manifold == "norm") {
            spec.kind = lidkit::ManifoldKind::norm;
        } else {
            throw UsageError("--manifold must be sphere, norm or mixture");
        }
        spec.intrinsic_dim = o.m;
        spec.ambient_dim = o.ambient;
        spec.n = o.n;
        spec.noise_sigma = o.noise;
        spec.rng_seed = o.seed;
        spec.rotate = !o.no_rotate;
        spec.rotation_seed = o.geometry_seed;
        if (o.m < 1 || o.m >= o.ambient) {
            throw UsageError("--m must satisfy 1 <= m < --ambient");
        }
        if (!o.labels.empty()) {
            throw UsageError("--labels applies to --manifold mixture only");
        }
        const auto set = lidkit::gen_manifold(spec);
        lidkit::write_activations(set, o.output);
        summary = {{"manifold", o.manifold}, {"n", o.n},         {"D", o.ambient},       {"m", o.m},
                   {"noise", o.noise},       {"seed", o.seed},   {"rotate", spec.rotate},
                   {"geometry_seed", o.geometry_seed.value_or(o.seed)}};
    }
    std::cout << summary.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// Estimator flags shared by estimate and detect
// ---------------------------------------------------------------------------

struct EstimatorFlags {
    std::string method = "mle";
    std::size_t neighbors = 500;
    std::uint64_t seed = kDefaultSeed;
    std::size_t bootstrap = 20;
    std::size_t t_low = 0;
    std::size_t degree = 1;
    std::string basis = "even";
    unsigned threads = 0;

    void add_to(CLI::App* app, bool all_methods) {
        auto* opt = app->add_option("--method", method, "Estimator")->capture_default_str();
        if (all_methods) {
            opt->check(CLI::IsMember({"mle", "geomle", "twonn", "knn-graph"}));
        } else {
            opt->check(CLI::IsMember({"mle", "geomle"}));
        }
        app->add_option("--neighbors,-T", neighbors, "Neighbor count T (GeoMLE: upper end T2)")
            ->capture_default_str()
            ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
        app->add_option("--seed", seed, "Random seed (GeoMLE bootstrap, kNN-graph subsets)")->capture_default_str();
        app->add_option("--bootstrap", bootstrap, "GeoMLE bootstrap resamples p")
            ->capture_default_str()
            ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
        app->add_option("--t-low", t_low, "GeoMLE lower neighbor count T1 (default max(10, ceil(T/2)))");
        app->add_option("--degree", degree, "GeoMLE regression degree l")
            ->capture_default_str()
            ->check(CLI::Range(std::size_t{1}, std::size_t{8}));
        app->add_option("--basis", basis, "GeoMLE regressors: even (Q^2..Q^2l) or full (Q..Q^l)")
            ->capture_default_str()
            ->check(CLI::IsMember({"even", "full"}));
        app->add_option("--threads", threads, "Worker threads (0: $LIDKIT_THREADS or all cores)")
            ->capture_default_str();
    }

    lidkit::EstimatorSettings settings() const {
        lidkit::EstimatorSettings s;
        s.method = lidkit::parse_method(method);
        s.neighbors = neighbors;
        s.geomle = lidkit::GeomleConfig::for_neighbors(neighbors, seed);
        s.geomle.bootstrap_count = bootstrap;
        if (t_low != 0) {
            s.geomle.t_low = t_low;
        }
        s.geomle.degree = degree;
        s.geomle.basis = basis == "full" ? lidkit::RegressionBasis::full : lidkit::RegressionBasis::even;
        s.threads = threads;
        if (s.method == lidkit::Method::geomle) {
            try {
                s.geomle.validate();
            } catch (const lidkit::InvalidArgument& e) {
                throw UsageError(e.what());
            }
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateOptions {
    std::string input;
    std::string reference;
    std::string output;
    EstimatorFlags est;
    double trim = 0.1;
    bool twonn_closed_form = false;
    std::size_t knn_k = 5;
    std::size_t trials = 5;
};

int run_estimate(const EstimateOptions& o) {
    const auto settings = o.est.settings();
    const auto set = lidkit::read_activations(o.input);
    Output out(o.output);
    json config = lidkit::settings_to_json(settings);
    config["input"] = o.input;
    config["seed"] = o.est.seed;

    if (settings.method == lidkit::Method::mle || settings.method == lidkit::Method::geomle) {
        std::optional<lidkit::EmbeddingSet> reference;
        if (!o.reference.empty()) {
            reference = lidkit::read_activations(o.reference);
            config["reference"] = o.reference;
        }
        const auto est = lidkit::estimate_lids(set, reference ? *reference : set, !reference, settings);
        std::size_t degenerate = 0;
        std::size_t fallback = 0;
        for (const auto& e : est) {
            out.stream() << lidkit::estimate_to_json(e).dump() << '\n';
            degenerate += e.ok() ? 0 : 1;
            fallback += e.diagnostics.fallback ? 1 : 0;
        }
        if (degenerate > 0) {
            std::cerr << "warning: " << degenerate << " sample(s) have degenerate neighborhoods\n";
        }
        json summary{{"summary", true},          {"method", settings.method == lidkit::Method::mle ? "mle" : "geomle"},
                     {"n", est.size()},          {"mean", lidkit::mean_lid(est)},
                     {"degenerate", degenerate}, {"fallback", fallback},
                     {"config", config}};
        out.stream() << summary.dump() << '\n';
        return 0;
    }

    json row;
    if (settings.method == lidkit::Method::twonn) {
        lidkit::TwonnOptions opt{o.trim, o.twonn_closed_form};
        config["trim"] = o.trim;
        config["closed_form"] = o.twonn_closed_form;
        const auto r = lidkit::twonn_global(set, opt, settings.threads);
        if (r.skipped > 0) {
            std::cerr << "warning: TwoNN skipped " << r.skipped << " point(s) with duplicate nearest neighbors\n";
        }
        row = {{"id", "global"}, {"lid", r.dimension}, {"method", "twonn"}, {"T", 2},
               {"fallback", false}, {"sigma", 0.0},     {"kept", r.kept},    {"skipped", r.skipped}};
    } else {
        lidkit::KnnGraphOptions opt;
        opt.k = o.knn_k;
        opt.trials = o.trials;
        opt.rng_seed = o.est.seed;
        config["k"] = o.knn_k;
        config["trials"] = o.trials;
        const auto r = lidkit::knn_graph_dim(set, opt, settings.threads);
        row = {{"id", "global"},          {"lid", r.dimension}, {"method", "knn_graph"},     {"T", o.knn_k},
               {"fallback", false},       {"sigma", 0.0},       {"slope", r.slope},          {"raw", r.raw_dimension},
               {"subset_sizes", r.subset_sizes}, {"mean_lengths", r.mean_lengths}};
    }
    out.stream() << row.dump() << '\n';
    out.stream() << json{{"summary", true}, {"method", row["method"]}, {"n", set.size()}, {"mean", row["lid"]},
                         {"config", config}}
                        .dump()
                 << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

struct DetectOptions {
    std::string activations;
    std::string layer_dir;
    std::optional<int> layer;
    bool auto_layer = false;
    int layer_shift = 1;
    std::string samples;
    std::string reference;
    std::string output;
    std::string csv;
    bool no_per_sample = false;
    EstimatorFlags est;
};

int run_detect(const DetectOptions& o) {
    const auto settings = o.est.settings();
    if (o.activations.empty() == o.layer_dir.empty()) {
        throw UsageError("give exactly one of --activations or --layer-dir");
    }
    if (!o.layer_dir.empty() && !o.layer && !o.auto_layer) {
        throw UsageError("--layer-dir needs --layer <k> or --auto-layer");
    }
    if (o.layer && o.auto_layer) {
        throw UsageError("--layer and --auto-layer are exclusive");
    }
    const auto samples = lidkit::read_samples(o.samples);

    std::optional<lidkit::EmbeddingSet> reference;
    if (!o.reference.empty()) {
        reference = lidkit::read_activations(o.reference);
    }

    std::optional<int> layer_used;
    std::optional<lidkit::LayerSweep> sweep;
    std::optional<lidkit::EmbeddingSet> acts;
    if (!o.activations.empty()) {
        acts = lidkit::read_activations(o.activations);
    } else {
        const auto manifest = lidkit::read_manifest(o.layer_dir);
        if (o.auto_layer) {
            const auto stack = lidkit::read_layer_stack(o.layer_dir);
            sweep = lidkit::layer_sweep(stack, settings, o.layer_shift);
            for (int k : sweep->excluded_layers) {
                std::cerr << "warning: layer " << k << " excluded from the sweep (all samples degenerate)\n";
            }
            layer_used = sweep->chosen_layer;
            for (const auto& l : stack.layers()) {
                if (*l.layer() == *layer_used) {
                    acts = l;
                }
            }
        } else {
            layer_used = *o.layer;
            acts = lidkit::load_layer(o.layer_dir, manifest, *o.layer);
        }
    }

    auto report = lidkit::detect(*acts, samples, settings, reference ? &*reference : nullptr);
    report.layer_used = layer_used;
    report.config["seed"] = o.est.seed;
    report.config["samples"] = o.samples;
    report.config["activations"] = o.activations.empty() ? o.layer_dir : o.activations;
    if (!o.reference.empty()) {
        report.config["reference_path"] = o.reference;
    }
    auto j = lidkit::report_to_json(report, !o.no_per_sample);
    if (sweep) {
        json sums = json::object();
        for (const auto& [k, v] : sweep->per_layer_sums) {
            sums[std::to_string(k)] = v;
        }
        j["layer_sweep"] = {{"per_layer_sums", sums},
                            {"argmax_layer", sweep->argmax_layer},
                            {"chosen_layer", sweep->chosen_layer},
                            {"shift", o.layer_shift},
                            {"excluded_layers", sweep->excluded_layers}};
    }
    if (!report.skipped.empty()) {
        std::cerr << "warning: " << report.skipped.size() << " sample(s) skipped (degenerate neighborhoods)\n";
    }
    Output out(o.output);
    out.stream() << j.dump(2) << '\n';
    if (!o.csv.empty()) {
        std::ofstream csv(o.csv, std::ios::trunc);
        if (!csv) {
            throw lidkit::DataError("cannot open '" + o.csv + "' for writing");
        }
        lidkit::write_report_csv(report, csv);
    }
    std::cerr << "AUROC " << std::fixed << std::setprecision(4) << report.auroc << " (" << report.n_pos
              << " truthful, " << report.n_neg << " untruthful)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreOptions {
    std::string input;
    std::string output;
    double threshold = 0.5;
};

int run_score(const ScoreOptions& o) {
    const auto samples = lidkit::read_samples(o.input);
    if (samples.empty()) {
        throw UsageError("'" + o.input + "' holds no samples");
    }
    const auto labeled = lidkit::label_samples(samples, o.threshold);
    if (labeled.overwritten > 0) {
        std::cerr << "warning: overwrote " << labeled.overwritten << " existing label(s)\n";
    }
    std::size_t truthful = 0;
    for (const auto& r : labeled.records) {
        truthful += static_cast<std::size_t>(*r.label);
    }
    Output out(o.output);
    lidkit::write_samples(labeled.records, out.stream());
    const json summary{{"n", labeled.records.size()},
                       {"truthful", truthful},
                       {"accuracy", static_cast<double>(truthful) / static_cast<double>(labeled.records.size())},
                       {"threshold", o.threshold}};
    (out.is_stdout() ? std::cerr : std::cout) << summary.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// sanity
// ---------------------------------------------------------------------------

struct SanityOptions {
    std::uint64_t seed = kDefaultSeed;
    bool fast = false;
    std::string output;
    unsigned threads = 0;
};

int run_sanity(const SanityOptions& o) {
    auto cfg = o.fast ? lidkit::SanityConfig::fast(o.seed) : lidkit::SanityConfig{};
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    const auto res = lidkit::run_sanity(cfg);

    std::ostringstream table;
    table << std::fixed << std::setprecision(2);
    table << std::left << std::setw(14) << "dataset" << std::setw(4) << "m" << std::setw(16) << "TwoNN"
          << std::setw(12) << "KNN" << std::setw(16) << "MLE" << std::setw(16) << "GeoMLE" << '\n';
    for (const auto& r : res.rows) {
        auto pair = [](double ours, double ref) {
            std::ostringstream s;
            s << std::fixed << std::setprecision(2) << ours << " (" << ref << ")";
            return s.str();
        };
        std::ostringstream knn;
        if (r.knn) {
            knn << *r.knn << " (" << r.ref_knn << ")";
        } else {
            knn << "fail (" << r.ref_knn << ")";
        }
        table << std::setw(14) << r.name << std::setw(4) << r.intrinsic_dim << std::setw(16)
              << pair(r.twonn, r.ref_twonn) << std::setw(12) << knn.str() << std::setw(16) << pair(r.mle, r.ref_mle)
              << std::setw(16) << pair(r.geomle, r.ref_geomle) << '\n';
    }
    table << "(reference values in parentheses)\n";
    for (const auto& c : res.checks) {
        table << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    }
    std::cerr << table.str();

    Output out(o.output);
    out.stream() << lidkit::sanity_to_json(res, cfg).dump(2) << '\n';
    return res.passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local intrinsic dimension estimation and LID-based truthfulness scoring"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic manifold dataset (LIDA file)");
    gen_cmd->add_option("--manifold", gen.manifold, "sphere, norm or mixture")
        ->capture_default_str()
        ->check(CLI::IsMember({"sphere", "norm", "mixture"}));
    gen_cmd->add_option("--m", gen.m, "Intrinsic dimension")->capture_default_str()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--ambient,-D", gen.ambient, "Ambient dimension D")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--n", gen.n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--noise", gen.noise, "RMS length of the added Gaussian noise vector")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--geometry-seed", gen.geometry_seed,
                        "Seed of the random embedding (default --seed); equal values give the same manifold");
    gen_cmd->add_flag("--no-rotate", gen.no_rotate, "Keep the manifold axis-aligned (zero padding)");
    gen_cmd->add_option("--m-low", gen.m_low, "Mixture: truthful sphere dimension")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--m-high", gen.m_high, "Mixture: untruthful sphere dimension")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--n-each", gen.n_each, "Mixture: points per sphere")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("-o,--output", gen.output, "Output LIDA file")->required();
    gen_cmd->add_option("--labels", gen.labels, "Mixture: write labels as samples JSONL");

    EstimateOptions est;
    auto* est_cmd = app.add_subcommand("estimate", "Estimate intrinsic dimension of a LIDA file");
    est_cmd->add_option("-i,--input", est.input, "Input LIDA file")->required();
    est_cmd->add_option("--reference", est.reference, "Neighbor pool from another LIDA file (cross-task)");
    est_cmd->add_option("-o,--output", est.output, "Output JSONL (default stdout)");
    est.est.add_to(est_cmd, true);
    est_cmd->add_option("--trim", est.trim, "TwoNN: fraction of largest ratios discarded")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.99));
    est_cmd->add_flag("--closed-form", est.twonn_closed_form, "TwoNN: closed-form MLE instead of the line fit");
    est_cmd->add_option("--knn-k", est.knn_k, "kNN-graph: neighbors per point")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    est_cmd->add_option("--trials", est.trials, "kNN-graph: subsets per size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    DetectOptions det;
    auto* det_cmd = app.add_subcommand("detect", "Score samples by -LID and report AUROC against labels");
    det_cmd->add_option("--activations,-a", det.activations, "LIDA activations file");
    det_cmd->add_option("--layer-dir", det.layer_dir, "Multi-layer dump directory (manifest.json + layer_<k>.bin)");
    det_cmd->add_option("--layer", det.layer, "Layer to score from --layer-dir");
    det_cmd->add_flag("--auto-layer", det.auto_layer, "Pick the layer by the summed-LID argmax + shift rule");
    det_cmd->add_option("--layer-shift", det.layer_shift, "Layers past the argmax chosen by --auto-layer")
        ->capture_default_str();
    det_cmd->add_option("--samples,-s", det.samples, "Labeled samples JSONL")->required();
    det_cmd->add_option("--reference", det.reference, "Neighbor pool from another LIDA file (cross-task)");
    det_cmd->add_option("-o,--output", det.output, "Report JSON (default stdout)");
    det_cmd->add_option("--csv", det.csv, "Per-sample CSV (id,lid,score,label)");
    det_cmd->add_flag("--no-per-sample", det.no_per_sample, "Omit per-sample rows from the JSON report");
    det.est.add_to(det_cmd, false);

    ScoreOptions sc;
    auto* sc_cmd = app.add_subcommand("score", "Label samples by Rouge-L against the reference answer");
    sc_cmd->add_option("-i,--input", sc.input, "Samples JSONL")->required();
    sc_cmd->add_option("-o,--output", sc.output, "Labeled samples JSONL (default stdout)");
    sc_cmd->add_option("--threshold", sc.threshold, "Rouge-L threshold for label 1")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));

    SanityOptions san;
    auto* san_cmd = app.add_subcommand("sanity", "Estimator sanity check on synthetic manifolds");
    san_cmd->add_option("--seed", san.seed, "Random seed")->capture_default_str();
    san_cmd->add_flag("--fast", san.fast, "n=500, D=512, bands widened by 1.5");
    san_cmd->add_option("-o,--output", san.output, "Result JSON (default stdout)");
    san_cmd->add_option("--threads", san.threads, "Worker threads (0: $LIDKIT_THREADS or all cores)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*est_cmd) return run_estimate(est);
        if (*det_cmd) return run_detect(det);
        if (*sc_cmd) {
            if (!(sc.threshold > 0.0)) {
                throw UsageError("--threshold must lie in (0, 1]");
            }
            return run_score(sc);
        }
        if (*san_cmd) return run_sanity(san);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
