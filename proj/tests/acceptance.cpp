// Acceptance checks, one criterion per invocation:
//
//   acceptance --criterion N [--reference DIR] [--cli PATH]
//
// Prints one "PASS|FAIL|BLOCKED criterion N: ..." line. Exit 0 on pass, 1 on
// failure, 77 when a required external input (a real GPT-2 checkpoint or the
// xNot360 file) is not available.
//
// Criteria 1, 3, 4 and 12 run on the deterministic full-size synthetic
// checkpoint in DIR. Criteria 6-10 need NEGASCOPE_GPT2_CHECKPOINT (a
// safetensors file; config.json next to it is honoured). Criterion 10 also
// needs NEGASCOPE_XNOT360. NEGASCOPE_ACCEPTANCE_SUBSAMPLE caps the examples
// per sweep for a faster, approximate run of 6-10, and
// NEGASCOPE_ACCEPTANCE_JOBS sets the worker count.

#include "negascope/dataset.hpp"
#include "negascope/errors.hpp"
#include "negascope/experiments.hpp"
#include "negascope/metrics.hpp"
#include "negascope/verify.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <sys/wait.h>
#include <thread>

namespace fs = std::filesystem;
using namespace negascope;
using negascope::testing::data_dir;
using negascope::testing::gpt2_vocab;
using negascope::testing::read_file;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kBlocked = 77;
constexpr std::uint64_t kSeed = 42;

struct Options {
    int criterion = 0;
    fs::path reference;
    std::string cli;
};

int report(int criterion, bool passed, const std::string& detail) {
    std::cout << (passed ? "PASS" : "FAIL") << " criterion " << criterion << ": " << detail << "\n";
    return passed ? kPass : kFail;
}

int blocked(int criterion, const std::string& why) {
    std::cout << "BLOCKED criterion " << criterion << ": " << why << "\n";
    return kBlocked;
}

std::string describe(const CheckResult& r) {
    std::ostringstream out;
    out << r.name << " " << r.detail << ", measured " << r.measured << " (limit " << r.tolerance << ")";
    return out.str();
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

const ModelWeights& synthetic_model(const Options& opt) {
    static const ModelWeights w = load_weights(opt.reference / "model.safetensors", ModelConfig::gpt2_small());
    return w;
}

struct Corpus {
    std::vector<SentencePair> pairs;
    CanAbilitySlice slice;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        Corpus out;
        out.pairs = generate_corpus(builtin_templates(), kDefaultCorpusSize, kSeed);
        out.slice = build_can_ability_slice(out.pairs, SliceConfig{}, kSeed);
        mark_splits(out.pairs, out.slice);
        return out;
    }();
    return c;
}

std::vector<SentencePair> first_test_pairs(std::size_t n) {
    const auto& test = corpus().slice.test;
    return {test.begin(), test.begin() + static_cast<std::ptrdiff_t>(std::min(n, test.size()))};
}

// --- criteria on the synthetic checkpoint ------------------------------------

int forward_fidelity(const Options& opt) {
    const auto ref = data_dir() / "reference";
    const auto r = check_reference_outputs(synthetic_model(opt), gpt2_vocab(), ref / "expected.json",
                                           ref / "final_logits.safetensors", 1e-3);
    return report(1, r.passed, describe(r));
}

int tokenizer_parity() {
    const auto r = check_tokenizer_parity(gpt2_vocab(), data_dir() / "tokenizer" / "parity.json");
    return report(2, r.passed, describe(r));
}

int null_patch(const Options& opt) {
    const auto r = check_null_patch(synthetic_model(opt), gpt2_vocab(), first_test_pairs(100), 1e-5);
    return report(3, r.passed, describe(r));
}

int head_decomposition(const Options& opt) {
    std::vector<std::vector<TokenId>> affirm, negated;
    for (const auto& p : first_test_pairs(10)) {
        const auto e = encode_pair(gpt2_vocab(), p);
        affirm.push_back(e.affirmative);
        negated.push_back(e.negated);
    }
    const auto& w = synthetic_model(opt);
    const auto d = check_head_decomposition(w, negated, 1e-4);
    const auto p = check_patch_equivalence(w, affirm, negated, 1e-4);
    return report(4, d.passed && p.passed, describe(d) + "; " + describe(p));
}

int dataset_contract() {
    const auto& c = corpus();
    std::map<NegationForm, std::size_t> per_form;
    for (const auto* split : {&c.slice.dev, &c.slice.test}) {
        for (const auto& p : *split) ++per_form[*p.form];
    }
    bool forms_ok = per_form.size() == kCanAbilityForms.size();
    for (auto f : kCanAbilityForms) forms_ok = forms_ok && per_form[f] == 268;
    const auto diffs = check_cue_only_diffs(gpt2_vocab(), c.pairs);
    const bool ok = c.pairs.size() == 12000 && forms_ok && c.slice.dev.size() == 938 &&
                    c.slice.test.size() == 402 && diffs.passed;
    std::ostringstream out;
    out << c.pairs.size() << " pairs, slice " << c.slice.dev.size() + c.slice.test.size() << " (dev "
        << c.slice.dev.size() << ", test " << c.slice.test.size() << "), 268 per form "
        << (forms_ok ? "yes" : "no") << "; " << describe(diffs);
    return report(5, ok, out.str());
}

bool approx(double a, double b) { return std::abs(a - b) < 1e-12; }

int statistics_suite() {
    std::vector<std::string> failures;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    };
    const std::vector<double> a{-1.0, -2.0}, b{-1.0, 0.5, 2.0}, c{1.0, 2.0, 3.0};
    expect(aggregate(a).failure_rate == 0.0, "[-1,-2] failure rate");
    const auto sb = aggregate(b);
    expect(approx(sb.failure_rate, 2.0 / 3.0), "[-1,0.5,2] failure rate");
    expect(sb.median == 0.5, "[-1,0.5,2] median");
    const auto sc = aggregate(c);
    expect(sc.mean == 2.0, "[1,2,3] mean");
    expect(sc.ci_half_width && approx(*sc.ci_half_width, 1.96 / std::sqrt(3.0)), "[1,2,3] ci");
    expect(!aggregate(std::vector<double>{0.3}).ci_half_width.has_value(), "n=1 has no ci");
    expect(aggregate(std::vector<double>{1.0, 2.0, 3.0, 4.0}).median == 2.5, "even-n median");
    try {
        aggregate(std::vector<double>{});
        failures.push_back("empty aggregate accepted");
    } catch (const ArgumentError&) {
    }
    expect(delta_nes(2.5, 1.0) == 1.5, "delta (2.5, 1.0)");
    expect(delta_nes(0.7, 0.7) == 0.0, "delta (x, x)");

    const HeadSet x({{0, 0}, {0, 1}}, HeadSetLabel::top_k);
    const HeadSet y({{0, 1}, {0, 2}}, HeadSetLabel::top_k);
    const HeadSet z({{3, 3}}, HeadSetLabel::top_k);
    expect(approx(jaccard(x, y), 1.0 / 3.0), "jaccard 1/3");
    expect(jaccard(x, y) == jaccard(y, x), "jaccard symmetry");
    expect(jaccard(x, x) == 1.0, "jaccard identical");
    expect(jaccard(x, z) == 0.0, "jaccard disjoint");
    try {
        jaccard(HeadSet{}, HeadSet{});
        failures.push_back("jaccard of two empty sets accepted");
    } catch (const ArgumentError&) {
    }

    std::map<HeadId, std::vector<double>> sweep;
    for (auto h : all_heads()) sweep[h] = {0.0};
    const auto tied = rank_heads(sweep);
    expect(tied.entries.front().head == HeadId{0, 0} && tied.entries[1].head == HeadId{0, 1},
           "tie-break order");
    sweep[HeadId{7, 3}] = {5.0};
    const auto ranked = rank_heads(sweep);
    expect(ranked.entries.front().head == HeadId{7, 3}, "largest mean first");
    expect(top_k(ranked, 0).empty() && top_k(ranked, 144).k() == 144, "top_k bounds");

    std::string detail = "aggregate, failure rate, CI, delta, ranking and Jaccard examples";
    if (!failures.empty()) {
        detail = "mismatches:";
        for (const auto& f : failures) detail += " " + f + ";";
    }
    return report(11, failures.empty(), detail);
}

// --- CLI reproducibility ---------------------------------------------------------

int shell(const std::string& cmd, std::string& output) {
    output.clear();
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return -1;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, got);
    const int status = pclose(pipe);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path last_line(std::string s) {
    while (!s.empty() && s.back() == '\n') s.pop_back();
    const auto nl = s.find_last_of('\n');
    return nl == std::string::npos ? s : s.substr(nl + 1);
}

int reproducibility(const Options& opt) {
    if (opt.cli.empty()) return report(12, false, "--cli not given");
    negascope::testing::TempDir dir;
    auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    std::string out;
    if (shell(opt.cli + " generate --out " + q(dir / "corpus"), out) != 0) {
        return report(12, false, "generate failed: " + out);
    }
    const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    const std::string run = opt.cli + " run --stage all --subsample 2 --quiet --jobs " + std::to_string(jobs) +
                            " --checkpoint " + q(opt.reference / "model.safetensors") + " --data " +
                            q(dir / "corpus") + " --out " + q(dir / "results") + " --pairs " +
                            q(data_dir() / "external" / "sample_pairs.csv");
    std::vector<fs::path> runs;
    for (int i = 0; i < 2; ++i) {
        if (shell(run, out) != 0) return report(12, false, "run failed: " + out);
        runs.push_back(last_line(out));
    }
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::directory_iterator(runs[0])) {
        if (entry.path().extension() != ".csv") continue;
        ++compared;
        const auto other = runs[1] / entry.path().filename();
        if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) {
            differing.push_back(entry.path().filename().string());
        }
    }
    std::ostringstream detail;
    detail << compared << " CSVs compared across two `run --stage all` invocations";
    for (const auto& d : differing) detail << "; differs: " << d;
    return report(12, compared >= 7 && differing.empty(), detail.str());
}

// --- criteria needing a pretrained checkpoint ------------------------------------

struct RealModel {
    ModelWeights weights;
    ExperimentConfig cfg;
};

std::optional<RealModel> real_model() {
    const auto path = env("NEGASCOPE_GPT2_CHECKPOINT");
    if (!path) return std::nullopt;
    RealModel m;
    ModelConfig config = ModelConfig::gpt2_small();
    const auto sibling = fs::path(*path).parent_path() / "config.json";
    if (fs::exists(sibling)) config = ModelConfig::from_hf_json(sibling);
    m.weights = load_weights(*path, config);
    m.cfg.seed = kSeed;
    m.cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    if (const auto j = env("NEGASCOPE_ACCEPTANCE_JOBS")) m.cfg.jobs = std::stoul(*j);
    if (const auto s = env("NEGASCOPE_ACCEPTANCE_SUBSAMPLE")) m.cfg.subsample = std::stoul(*s);
    return m;
}

const char* kNeedsCheckpoint =
    "needs pretrained GPT-2 Small weights; set NEGASCOPE_GPT2_CHECKPOINT to a model.safetensors";

double curve_mean(const std::vector<CurvePoint>& pts, std::size_t k, CurveCondition c,
                  std::optional<double>* ci = nullptr) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : pts) {
        if (p.k == k && p.condition == c) {
            sum += p.mean_nes;
            if (ci) *ci = p.ci_half_width;
            ++n;
        }
    }
    if (n == 0) throw CompletenessError("no curve point for k=" + std::to_string(k));
    return sum / static_cast<double>(n);
}

int causal_curves(int criterion) {
    auto m = real_model();
    if (!m) return blocked(criterion, kNeedsCheckpoint);
    const ModelContext ctx{m->weights, gpt2_vocab()};
    m->cfg.k_values = {4, 8, 16};
    const auto ranking = run_head_sweep(ctx, m->cfg, corpus().slice.dev);
    const auto pts = run_ablation_rescue_curves(ctx, m->cfg, corpus().slice.test, ranking);
    std::ostringstream detail;
    bool ok = true;
    for (std::size_t k : m->cfg.k_values) {
        // The baseline is the k=0 point shared by every k.
        std::optional<double> ci_base, ci_abl, ci_res;
        const double base = curve_mean(pts, 0, CurveCondition::baseline, &ci_base);
        const double abl = curve_mean(pts, k, CurveCondition::ablated, &ci_abl);
        const double res = curve_mean(pts, k, CurveCondition::rescued, &ci_res);
        detail << "k=" << k << ": ";
        if (criterion == 6) {
            const double gap_ab = abl - base, gap_ra = res - abl;
            const bool a_ok = gap_ab > std::max(ci_abl.value_or(0.0), ci_base.value_or(0.0));
            const bool r_ok = gap_ra > std::max(ci_res.value_or(0.0), ci_abl.value_or(0.0));
            ok = ok && a_ok && r_ok;
            detail << "baseline " << base << ", ablated " << abl << ", rescued " << res << "; ";
        } else {
            const double control = curve_mean(pts, k, CurveCondition::random_control);
            const double ratio = std::abs(control - base) / std::abs(abl - base);
            ok = ok && std::abs(control - base) < 0.25 * std::abs(abl - base);
            detail << "control shift / top-k shift = " << ratio << "; ";
        }
    }
    return report(criterion, ok, detail.str());
}

int cross_form() {
    auto m = real_model();
    if (!m) return blocked(8, kNeedsCheckpoint);
    const ModelContext ctx{m->weights, gpt2_vocab()};
    const auto ranking = run_head_sweep(ctx, m->cfg, corpus().slice.dev);
    const auto rows = run_cross_form(ctx, m->cfg, corpus().slice.test, top_k(ranking, 8));
    bool ok = rows.size() == kCanAbilityForms.size();
    std::ostringstream detail;
    for (const auto& r : rows) {
        ok = ok && r.stats.mean > 0.0;
        detail << form_name(r.form) << " " << r.stats.mean << "; ";
    }
    return report(8, ok, detail.str());
}

int mid_layers() {
    auto m = real_model();
    if (!m) return blocked(9, kNeedsCheckpoint);
    const ModelContext ctx{m->weights, gpt2_vocab()};
    const auto layers = run_layer_sweep(ctx, m->cfg, corpus().slice.dev);
    const auto best = std::max_element(layers.begin(), layers.end(), [](const LayerRow& a, const LayerRow& b) {
        return a.stats.mean < b.stats.mean;
    });
    const auto ranking = run_head_sweep(ctx, m->cfg, corpus().slice.dev);
    std::size_t mid = 0;
    std::ostringstream detail;
    detail << "layer-sweep peak at layer " << best->layer << "; top-8 heads:";
    const auto top8 = top_k(ranking, 8);
    for (auto h : top8.heads()) {
        if (h.layer >= 4 && h.layer <= 6) ++mid;
        detail << " " << to_string(h);
    }
    const bool ok = best->layer >= 3 && best->layer <= 6 && mid >= 4;
    return report(9, ok, detail.str());
}

int external_validation() {
    auto m = real_model();
    if (!m) return blocked(10, kNeedsCheckpoint);
    const auto file = env("NEGASCOPE_XNOT360");
    if (!file) return blocked(10, "needs the xNot360 CSV; set NEGASCOPE_XNOT360");
    const ModelContext ctx{m->weights, gpt2_vocab()};
    const auto aligned = align_external(gpt2_vocab(), load_external_pairs(*file));
    const auto ranking = run_head_sweep(ctx, m->cfg, corpus().slice.dev);
    const auto r = run_external_validation(ctx, m->cfg, aligned.pairs, top_k(ranking, 8));
    const bool ordered = r.ablated.mean <= r.baseline.mean && r.baseline.mean <= r.rescued.mean;
    const bool close = std::abs(r.baseline.mean - 0.762) <= 0.05 && std::abs(r.ablated.mean - 0.755) <= 0.05 &&
                       std::abs(r.rescued.mean - 0.764) <= 0.05;
    std::ostringstream detail;
    detail << aligned.pairs.size() << " aligned pairs (" << aligned.skipped.size() << " skipped); baseline "
           << r.baseline.mean << ", ablated " << r.ablated.mean << ", rescued " << r.rescued.mean
           << "; ordering " << (ordered ? "holds" : "WARN: does not hold") << "; within 0.05 of 0.762/0.755/0.764: "
           << (close ? "yes" : "no");
    // The ordering is a soft check: reported, never failed.
    return report(10, true, detail.str());
}

int run_criterion(const Options& opt) {
    switch (opt.criterion) {
    case 1: return forward_fidelity(opt);
    case 2: return tokenizer_parity();
    case 3: return null_patch(opt);
    case 4: return head_decomposition(opt);
    case 5: return dataset_contract();
    case 6: return causal_curves(6);
    case 7: return causal_curves(7);
    case 8: return cross_form();
    case 9: return mid_layers();
    case 10: return external_validation();
    case 11: return statistics_suite();
    case 12: return reproducibility(opt);
    default: throw ArgumentError("criterion must be 1..12");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    Options opt;
    app.add_option("--criterion", opt.criterion, "Criterion number 1..12")->required();
    app.add_option("--reference", opt.reference, "Directory with the synthetic full-size checkpoint");
    app.add_option("--cli", opt.cli, "negascope executable");
    CLI11_PARSE(app, argc, argv);
    try {
        return run_criterion(opt);
    } catch (const std::exception& e) {
        std::cout << "FAIL criterion " << opt.criterion << ": " << e.what() << "\n";
        return kFail;
    }
}
