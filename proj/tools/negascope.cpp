// negascope command-line driver: generate | run | verify.
//
// Exit codes: 0 success, 1 property failure, 2 usage error, 3 I/O or
// integrity error.

#include "negascope/csv.hpp"
#include "negascope/dataset.hpp"
#include "negascope/errors.hpp"
#include "negascope/experiments.hpp"
#include "negascope/hash.hpp"
#include "negascope/report.hpp"
#include "negascope/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace negascope;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

fs::path home_dir() {
    const char* env = std::getenv("NEGASCOPE_HOME");
    return env && *env ? fs::path(env) : fs::current_path();
}

// Bundled tokenizer and reference data. NEGASCOPE_HOME/data wins when it has
// the file; otherwise fall back to the source tree's data directory.
fs::path data_file(const fs::path& rel) {
    const auto local = home_dir() / "data" / rel;
    if (fs::exists(local)) return local;
    return fs::path(NEGASCOPE_DATA_DIR) / rel;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw IoError("missing " + what + ": " + path.string());
}

struct ModelPaths {
    std::string checkpoint;
    std::string config;
    std::string vocab;
    std::string merges;

    void add_to(CLI::App& app) {
        app.add_option("--checkpoint", checkpoint, "GPT-2 safetensors checkpoint")
            ->capture_default_str();
        app.add_option("--config", config,
                       "Hugging Face config.json (default: next to the checkpoint, else GPT-2 Small)");
        app.add_option("--vocab", vocab, "vocab.json")->capture_default_str();
        app.add_option("--merges", merges, "merges.txt")->capture_default_str();
    }

    Vocabulary load_tokenizer() const {
        require_file(vocab, "vocabulary");
        require_file(merges, "merge list");
        return load_vocab(vocab, merges);
    }

    ModelWeights load_model() const {
        require_file(checkpoint, "checkpoint");
        ModelConfig cfg = ModelConfig::gpt2_small();
        fs::path cfg_path = config;
        if (cfg_path.empty()) {
            const auto sibling = fs::path(checkpoint).parent_path() / "config.json";
            if (fs::exists(sibling)) cfg_path = sibling;
        }
        if (!cfg_path.empty()) {
            require_file(cfg_path, "model config");
            cfg = ModelConfig::from_hf_json(cfg_path);
        }
        return load_weights(checkpoint, cfg);
    }
};

ModelPaths default_model_paths() {
    return {(home_dir() / "data" / "gpt2" / "model.safetensors").string(), "",
            data_file("gpt2/vocab.json").string(), data_file("gpt2/merges.txt").string()};
}

// --- generate ---------------------------------------------------------------

struct GenerateOptions {
    long long total = static_cast<long long>(kDefaultCorpusSize);
    std::uint64_t seed = 42;
    std::string out = (home_dir() / "corpus").string();
    SliceConfig slice;
};

int cmd_generate(const GenerateOptions& opt) {
    if (opt.total < 0) throw ArgumentError("--total must be non-negative");
    const auto total = static_cast<std::size_t>(opt.total);
    const fs::path out = opt.out;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

    auto corpus = generate_corpus(builtin_templates(), total, opt.seed);
    const auto counts = stratum_counts(corpus);

    bool sliced = true;
    for (auto form : kCanAbilityForms) {
        const auto it = counts.find("can_ability/" + std::string(form_name(form)));
        if (it == counts.end() || it->second < opt.slice.per_form) sliced = false;
    }
    std::optional<CanAbilitySlice> slice;
    if (sliced) {
        slice = build_can_ability_slice(corpus, opt.slice, opt.seed);
        mark_splits(corpus, *slice);
    } else {
        std::cerr << "note: corpus too small for a " << opt.slice.per_form
                  << "-per-form can_ability slice; dev/test files not written\n";
    }

    std::vector<std::string> files{"corpus.csv"};
    write_text_file(out / "corpus.csv", pairs_csv(corpus));
    if (slice) {
        write_text_file(out / "dev.csv", pairs_csv(slice->dev));
        write_text_file(out / "test.csv", pairs_csv(slice->test));
        files.push_back("dev.csv");
        files.push_back("test.csv");
    }

    nlohmann::ordered_json m;
    m["tool_version"] = NEGASCOPE_VERSION;
    m["seed"] = opt.seed;
    m["total"] = total;
    m["slice"] = slice ? nlohmann::ordered_json{{"per_form", opt.slice.per_form},
                                                {"dev", slice->dev.size()},
                                                {"test", slice->test.size()}}
                       : nlohmann::ordered_json(nullptr);
    m["strata"] = counts;
    auto listed = nlohmann::ordered_json::array();
    for (const auto& f : files) {
        const auto e = hashed_entry(out, f);
        listed.push_back({{"path", e.path}, {"sha256", e.sha256}});
    }
    m["files"] = listed;
    write_text_file(out / "manifest.json", m.dump(2) + "\n");

    std::cout << "wrote " << corpus.size() << " pairs to " << (out / "corpus.csv").string();
    if (slice) std::cout << " (dev " << slice->dev.size() << ", test " << slice->test.size() << ")";
    std::cout << "\n";
    return kExitOk;
}

// --- run --------------------------------------------------------------------

struct RunOptions {
    std::string stage = "all";
    std::uint64_t seed = 42;
    ModelPaths model = default_model_paths();
    std::string data = (home_dir() / "corpus").string();
    std::string out = (home_dir() / "results").string();
    std::string pairs;
    ExternalColumns columns;
    std::string ranking;
    std::size_t k = 8;
    std::vector<std::size_t> k_values{1, 2, 4, 8, 16};
    std::vector<std::uint64_t> control_seeds{1, 2, 3, 4, 5};
    std::size_t jaccard_m = 10;
    std::size_t subsample = 0;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    bool quiet = false;
};

class Runner {
public:
    explicit Runner(const RunOptions& opt) : opt_(opt) {}

    int run() {
        std::vector<std::string> stages;
        if (opt_.stage == "all") {
            stages = {"baseline", "layers", "heads", "curves", "crossform"};
            if (!opt_.pairs.empty()) stages.push_back("external");
        } else {
            stages = {opt_.stage};
        }
        const bool needs_ranking = std::any_of(stages.begin(), stages.end(), [](const auto& s) {
            return s == "curves" || s == "crossform" || s == "external";
        });
        const bool makes_ranking = std::find(stages.begin(), stages.end(), "heads") != stages.end();

        // Resolve every input before any expensive work.
        const fs::path root = opt_.out;
        std::optional<fs::path> ranking_file;
        if (needs_ranking && !makes_ranking) {
            if (!opt_.ranking.empty()) {
                ranking_file = opt_.ranking;
                require_file(*ranking_file, "head ranking");
            } else if (auto latest = latest_run(root); latest && fs::exists(*latest / "heads.csv")) {
                ranking_file = *latest / "heads.csv";
            } else {
                throw DependencyError("stage '" + opt_.stage +
                                      "' needs a head ranking: run the heads stage first or pass --ranking");
            }
        }
        if (std::find(stages.begin(), stages.end(), "external") != stages.end() && opt_.pairs.empty()) {
            throw ArgumentError("the external stage needs --pairs");
        }
        for (const auto& s : stages) {
            if (s == "baseline") require_file(data_path("corpus.csv"), "corpus");
            if (s == "layers" || s == "heads") require_file(data_path("dev.csv"), "dev split");
            if (s == "curves" || s == "crossform") require_file(data_path("test.csv"), "test split");
            if (s == "external") require_file(opt_.pairs, "external pairs");
        }

        cfg_.seed = opt_.seed;
        cfg_.k_values = opt_.k_values;
        cfg_.control_seeds = opt_.control_seeds;
        cfg_.cross_form_k = opt_.k;
        cfg_.external_k = opt_.k;
        cfg_.jaccard_m = opt_.jaccard_m;
        cfg_.jobs = opt_.jobs;
        if (opt_.subsample > 0) cfg_.subsample = opt_.subsample;
        cfg_.validate();

        vocab_ = opt_.model.load_tokenizer();
        log("loading checkpoint " + opt_.model.checkpoint);
        weights_ = opt_.model.load_model();

        run_dir_ = create_run_dir(root);
        log("run directory " + run_dir_.string());
        manifest_.tool_version = NEGASCOPE_VERSION;
        manifest_.checkpoint_path = opt_.model.checkpoint;
        manifest_.checkpoint_sha256 = weights_.checkpoint_sha256;
        add_input(opt_.model.vocab);
        add_input(opt_.model.merges);
        if (ranking_file) {
            fs::copy_file(*ranking_file, run_dir_ / "heads.csv");
            ranking_ = read_heads_csv(run_dir_ / "heads.csv");
            add_input(ranking_file->string());
        }

        for (const auto& s : stages) {
            const auto start = std::chrono::steady_clock::now();
            log("stage " + s);
            run_stage(s);
            const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
            manifest_.stage_seconds.emplace_back(s, took.count());
        }
        write_manifest(stages);
        write_latest_pointer(root, run_dir_);
        std::cout << run_dir_.string() << "\n";
        return kExitOk;
    }

private:
    fs::path data_path(const std::string& name) const { return fs::path(opt_.data) / name; }

    void log(const std::string& msg) const {
        if (!opt_.quiet) std::cerr << "[negascope] " << msg << "\n";
    }

    void add_input(const std::string& path) {
        manifest_.inputs.push_back({path, sha256_file(path)});
    }

    std::vector<SentencePair> read_split(const std::string& name) {
        const auto path = data_path(name);
        if (std::find_if(manifest_.inputs.begin(), manifest_.inputs.end(), [&](const FileEntry& e) {
                return e.path == path.string();
            }) == manifest_.inputs.end()) {
            add_input(path.string());
        }
        return read_pairs_csv(path);
    }

    void emit(const std::string& name, const std::string& content) {
        write_text_file(run_dir_ / name, content);
        outputs_.push_back(name);
    }

    ExperimentConfig stage_config() {
        ExperimentConfig c = cfg_;
        if (!opt_.quiet) {
            c.progress = [last = std::chrono::steady_clock::time_point{}](std::size_t done,
                                                                          std::size_t total) mutable {
                const auto now = std::chrono::steady_clock::now();
                if (done == total || now - last > std::chrono::seconds(10)) {
                    std::cerr << "[negascope]   " << done << "/" << total << " examples\n";
                    last = now;
                }
            };
        }
        return c;
    }

    const HeadRanking& ranking() const {
        if (!ranking_) throw DependencyError("no head ranking available");
        return *ranking_;
    }

    void run_stage(const std::string& s) {
        const ModelContext ctx{weights_, vocab_};
        const auto c = stage_config();
        if (s == "baseline") {
            std::vector<std::string> names;
            for (const auto& t : builtin_templates()) names.push_back(t.name);
            const auto corpus = read_split("corpus.csv");
            const auto result = run_baseline(ctx, c, corpus, names);
            emit("baseline.csv", baseline_csv(result.rows));
            emit("nes_baseline.csv", nes_records_csv(result.records));
            emit("baseline.svg", baseline_svg(result.rows));
        } else if (s == "layers") {
            const auto rows = run_layer_sweep(ctx, c, read_split("dev.csv"));
            emit("layers.csv", layers_csv(rows));
            emit("layers.svg", layers_svg(rows));
        } else if (s == "heads") {
            const auto sweep = sweep_heads(ctx, c, read_split("dev.csv"));
            ranking_ = rank_sweep(sweep);
            emit("heads.csv", heads_csv(*ranking_));
            emit("heads.svg", heads_svg(*ranking_));
            emit("topk_heads.csv", headset_csv(top_k(*ranking_, opt_.k), *ranking_));
            try {
                emit("jaccard.csv", jaccard_csv(jaccard_from_sweep(sweep, opt_.jaccard_m)));
            } catch (const CompletenessError& e) {
                // Heavy subsampling can leave a form without dev rows.
                log(std::string("warning: jaccard.csv not written: ") + e.what());
            }
        } else if (s == "curves") {
            const auto points = run_ablation_rescue_curves(ctx, c, read_split("test.csv"), ranking());
            emit("curves.csv", curves_csv(points));
            emit("curves.svg", curves_svg(points));
        } else if (s == "crossform") {
            const auto rows = run_cross_form(ctx, c, read_split("test.csv"), top_k(ranking(), opt_.k));
            emit("crossform.csv", crossform_csv(rows));
            emit("crossform.svg", crossform_svg(rows));
        } else if (s == "external") {
            add_input(opt_.pairs);
            const auto records = load_external_pairs(opt_.pairs, opt_.columns);
            const auto aligned = align_external(vocab_, records);
            std::ostringstream skipped;
            write_csv_row(skipped, {"row", "reason"});
            for (const auto& [row, reason] : aligned.skipped) {
                write_csv_row(skipped, {std::to_string(row), reason});
            }
            log(std::to_string(aligned.pairs.size()) + " external pairs aligned, " +
                std::to_string(aligned.skipped.size()) + " skipped");
            emit("external_pairs.csv", pairs_csv(aligned.pairs));
            emit("external_skipped.csv", skipped.str());
            const auto result = run_external_validation(ctx, c, aligned.pairs, top_k(ranking(), opt_.k));
            emit("external.csv", external_csv(result));
            emit("external.svg", external_svg(result));
        } else {
            throw ArgumentError("unknown stage '" + s + "'");
        }
    }

    void write_manifest(const std::vector<std::string>& stages) {
        const auto corpus_manifest = data_path("manifest.json");
        if (fs::exists(corpus_manifest)) {
            try {
                std::ifstream in(corpus_manifest);
                const auto j = nlohmann::json::parse(in);
                if (j.contains("seed")) manifest_.seeds["corpus_and_split"] = j["seed"];
            } catch (const nlohmann::json::exception&) {
                log("warning: unreadable " + corpus_manifest.string());
            }
        }
        manifest_.seeds["run"] = cfg_.seed;
        manifest_.seeds["controls"] = cfg_.control_seeds;
        manifest_.config["stages"] = stages;
        manifest_.config["data"] = opt_.data;
        manifest_.config["k"] = opt_.k;
        manifest_.config["k_values"] = cfg_.k_values;
        manifest_.config["control_seeds"] = cfg_.control_seeds;
        manifest_.config["jaccard_m"] = cfg_.jaccard_m;
        manifest_.config["subsample"] = cfg_.subsample ? nlohmann::ordered_json(*cfg_.subsample)
                                                       : nlohmann::ordered_json(nullptr);
        manifest_.config["jobs"] = cfg_.jobs;
        manifest_.config["controls_exclude_top_k"] = cfg_.controls_exclude_top_k;
        manifest_.config["model"] = {{"n_layers", weights_.config.n_layers},
                                     {"n_heads", weights_.config.n_heads},
                                     {"d_model", weights_.config.d_model},
                                     {"d_mlp", weights_.config.d_mlp},
                                     {"n_ctx", weights_.config.n_ctx},
                                     {"vocab_size", weights_.config.vocab_size}};
        if (!opt_.pairs.empty()) {
            manifest_.config["external_columns"] = {{"affirmative", opt_.columns.affirmative},
                                                    {"negated", opt_.columns.negated},
                                                    {"label", opt_.columns.label}};
        }
        for (const auto& f : outputs_) manifest_.outputs.push_back(hashed_entry(run_dir_, f));
        write_text_file(run_dir_ / "manifest.json", manifest_.to_json().dump(2) + "\n");
    }

    const RunOptions& opt_;
    ExperimentConfig cfg_;
    Vocabulary vocab_;
    ModelWeights weights_;
    fs::path run_dir_;
    RunManifest manifest_;
    std::vector<std::string> outputs_;
    std::optional<HeadRanking> ranking_;
};

// --- verify -------------------------------------------------------------------

struct VerifyOptions {
    ModelPaths model = default_model_paths();
    std::string parity = data_file("tokenizer/parity.json").string();
    std::string reference_dir = data_file("reference").string();
    std::string pairs;
    std::size_t count = 20;
    std::uint64_t seed = 42;
};

int cmd_verify(const VerifyOptions& opt) {
    std::vector<CheckResult> results;
    const auto vocab = opt.model.load_tokenizer();
    if (fs::exists(opt.parity)) results.push_back(check_tokenizer_parity(vocab, opt.parity));

    ModelWeights w;
    try {
        w = opt.model.load_model();
    } catch (const Error& e) {
        std::cout << "FAIL checkpoint_integrity: " << e.what() << "\n";
        return kExitIo;
    }
    std::cout << "PASS checkpoint_integrity: " << w.parameter_count() << " parameters, sha256 "
              << w.checkpoint_sha256 << "\n";

    std::vector<SentencePair> pairs;
    if (!opt.pairs.empty()) {
        require_file(opt.pairs, "pairs file");
        pairs = read_pairs_csv(opt.pairs);
    } else {
        pairs = generate_corpus({builtin_template("can_ability")}, opt.count, opt.seed);
    }
    if (pairs.size() > opt.count) pairs.resize(opt.count);

    std::vector<std::vector<TokenId>> affirm, negated;
    for (const auto& p : pairs) {
        const auto e = encode_pair(vocab, p);
        affirm.push_back(e.affirmative);
        negated.push_back(e.negated);
    }
    const std::size_t few = std::min<std::size_t>(pairs.size(), 10);
    affirm.resize(few);
    negated.resize(few);

    results.push_back(check_null_patch(w, vocab, pairs));
    results.push_back(check_head_decomposition(w, negated));
    results.push_back(check_patch_equivalence(w, affirm, negated));
    results.push_back(check_determinism(w, vocab, std::vector<SentencePair>(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(few))));

    const fs::path ref = opt.reference_dir;
    if (fs::exists(ref / "expected.json") && fs::exists(ref / "final_logits.safetensors")) {
        auto r = check_reference_outputs(w, vocab, ref / "expected.json", ref / "final_logits.safetensors");
        if (r.detail.find("differs from the reference") != std::string::npos) {
            std::cout << "SKIP reference_outputs: " << r.detail << "\n";
        } else {
            results.push_back(std::move(r));
        }
    }

    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " = "
                  << r.measured << " (limit " << r.tolerance << ")\n";
        ok = ok && r.passed;
    }
    return ok ? kExitOk : kExitFailure;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const CapacityError*>(&e) ||
        dynamic_cast<const RangeError*>(&e)) {
        return kExitUsage;
    }
    return kExitIo;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Negation circuit analysis for GPT-2 Small"};
    app.set_version_flag("--version", std::string(NEGASCOPE_VERSION));
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Generate the templated sentence-pair corpus and splits");
    g->add_option("--total", gen.total, "Number of pairs")->capture_default_str();
    g->add_option("--seed", gen.seed, "Corpus and split seed")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->capture_default_str();
    g->add_option("--per-form", gen.slice.per_form, "can_ability pairs per negation form")
        ->capture_default_str();
    g->add_option("--dev", gen.slice.dev_size, "Dev split size")->capture_default_str();
    g->add_option("--test", gen.slice.test_size, "Test split size")->capture_default_str();

    RunOptions run;
    auto* r = app.add_subcommand("run", "Run experiment stages and write CSVs, plots and a manifest");
    r->add_option("--stage", run.stage, "Stage to run")
        ->check(CLI::IsMember({"baseline", "layers", "heads", "curves", "crossform", "external", "all"}))
        ->capture_default_str();
    r->add_option("--seed", run.seed, "Seed for subsampling")->capture_default_str();
    run.model.add_to(*r);
    r->add_option("--data", run.data, "Directory with corpus.csv, dev.csv, test.csv")->capture_default_str();
    r->add_option("--out", run.out, "Results root (runs/<timestamp> and a latest pointer)")
        ->capture_default_str();
    r->add_option("--pairs", run.pairs, "External sentence-pair CSV for the external stage");
    r->add_option("--affirmative-column", run.columns.affirmative, "External CSV affirmative column")
        ->capture_default_str();
    r->add_option("--negated-column", run.columns.negated, "External CSV negated column")
        ->capture_default_str();
    r->add_option("--label-column", run.columns.label, "External CSV label column (optional)")
        ->capture_default_str();
    r->add_option("--ranking", run.ranking, "heads.csv to reuse instead of the latest run's");
    r->add_option("--k", run.k, "Head-set size for crossform and external")
        ->check(CLI::Range(0, kHeadCount))
        ->capture_default_str();
    r->add_option("--k-values", run.k_values, "k grid for ablation/rescue curves")->delimiter(',');
    r->add_option("--control-seeds", run.control_seeds, "Random-control seeds")->delimiter(',');
    r->add_option("--jaccard-m", run.jaccard_m, "Top-M heads per form for Jaccard overlap")
        ->check(CLI::Range(1, kHeadCount))
        ->capture_default_str();
    r->add_option("--subsample", run.subsample, "Deterministic per-stage example cap (0 = all)")
        ->capture_default_str();
    r->add_option("--jobs", run.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    r->add_flag("--quiet", run.quiet, "Suppress progress output");

    VerifyOptions ver;
    auto* v = app.add_subcommand("verify", "Run property checks against a checkpoint");
    ver.model.add_to(*v);
    v->add_option("--parity", ver.parity, "Tokenizer parity corpus")->capture_default_str();
    v->add_option("--reference-dir", ver.reference_dir, "Recorded reference outputs")
        ->capture_default_str();
    v->add_option("--pairs", ver.pairs, "Pairs CSV for the null-patch check (default: generated)");
    v->add_option("--count", ver.count, "Number of pairs to check")->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (g->parsed()) return cmd_generate(gen);
        if (r->parsed()) return Runner(run).run();
        if (v->parsed()) return cmd_verify(ver);
    } catch (const Error& e) {
        std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}
