#include "negascope/verify.hpp"

#include "negascope/errors.hpp"
#include "negascope/experiments.hpp"
#include "negascope/hash.hpp"
#include "negascope/interventions.hpp"
#include "negascope/metrics.hpp"
#include "negascope/safetensors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace negascope {

namespace {

CheckResult make_result(std::string name, double measured, double tolerance, std::string detail) {
    CheckResult r;
    r.name = std::move(name);
    r.measured = measured;
    r.tolerance = tolerance;
    r.passed = measured < tolerance;
    r.detail = std::move(detail);
    return r;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<std::string> words(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

} // namespace

CheckResult check_tokenizer_parity(const Vocabulary& vocab, const std::filesystem::path& parity_file) {
    const auto j = read_json(parity_file);
    std::size_t mismatches = 0, round_trip_failures = 0, total = 0;
    std::string first;
    for (const auto& item : j.at("strings")) {
        ++total;
        const auto text = item.at("text").get<std::string>();
        const auto expected = item.at("ids").get<std::vector<TokenId>>();
        const auto got = encode(vocab, text).ids;
        if (got != expected) {
            ++mismatches;
            if (first.empty()) first = "first mismatch: \"" + text + "\"";
        }
        if (decode(vocab, got) != text) ++round_trip_failures;
    }
    std::string detail = std::to_string(total) + " strings, " + std::to_string(mismatches) +
                         " id mismatches, " + std::to_string(round_trip_failures) +
                         " round-trip failures";
    if (!first.empty()) detail += "; " + first;
    return make_result("tokenizer_parity", static_cast<double>(mismatches + round_trip_failures),
                       0.5, detail);
}

CheckResult check_null_patch(const ModelWeights& w, const Vocabulary& vocab,
                             const std::vector<SentencePair>& pairs, double tolerance) {
    if (pairs.empty()) throw EmptyInputError("null-patch check needs at least one pair");
    double worst = 0.0;
    for (const auto& p : pairs) {
        const auto e = encode_pair(vocab, p);
        const double base = nes(w, e);
        const auto sites = last_position_sites(w.config, static_cast<int>(e.negated.size()) - 1);
        const auto edits = build_null_self_patch(w, e.negated, sites);
        worst = std::max(worst, std::fabs(delta_nes(nes(w, e, {}, edits), base)));
    }
    return make_result("null_patch", worst, tolerance,
                       std::to_string(pairs.size()) + " pairs, 156 sites each, max |delta NES|");
}

CheckResult check_head_decomposition(const ModelWeights& w,
                                     const std::vector<std::vector<TokenId>>& inputs,
                                     double tolerance) {
    const auto& c = w.config;
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& tokens : inputs) {
        std::vector<HookSite> sites;
        for (int pos = 0; pos < static_cast<int>(tokens.size()); ++pos) {
            for (int l = 0; l < c.n_layers; ++l) {
                sites.push_back(HookSite::attn_out(l, pos));
                for (int h = 0; h < c.n_heads; ++h) sites.push_back(HookSite::head_slice(l, h, pos));
            }
        }
        const auto result = forward(w, tokens, sites, {}, RowRange{0, 0});
        for (int pos = 0; pos < static_cast<int>(tokens.size()); ++pos) {
            for (int l = 0; l < c.n_layers; ++l) {
                const auto& layer = w.layers[static_cast<std::size_t>(l)];
                std::vector<double> sum(layer.out_bias.begin(), layer.out_bias.end());
                for (int h = 0; h < c.n_heads; ++h) {
                    const auto& z = result.captured.at(HookSite::head_slice(l, h, pos));
                    for (int i = 0; i < c.d_head; ++i) {
                        const auto row = layer.out_weight.row(
                            static_cast<std::size_t>(h * c.d_head + i));
                        for (std::size_t j = 0; j < sum.size(); ++j) {
                            sum[j] += static_cast<double>(z[static_cast<std::size_t>(i)]) * row[j];
                        }
                    }
                }
                const auto& out = result.captured.at(HookSite::attn_out(l, pos));
                for (std::size_t j = 0; j < sum.size(); ++j) {
                    worst = std::max(worst, std::fabs(sum[j] - out[j]));
                }
                ++checked;
            }
        }
    }
    return make_result("head_decomposition", worst, tolerance,
                       std::to_string(checked) + " (layer, position) sites, max |sum_h - attn_out|");
}

CheckResult check_patch_equivalence(const ModelWeights& w,
                                    const std::vector<std::vector<TokenId>>& sources,
                                    const std::vector<std::vector<TokenId>>& dests,
                                    double tolerance) {
    if (sources.size() != dests.size()) {
        throw ArgumentError("patch equivalence needs one source per destination");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const int src_pos = static_cast<int>(sources[i].size()) - 1;
        const int dst_pos = static_cast<int>(dests[i].size()) - 1;
        const auto cache = cache_activations(w, sources[i], SourceLabel::affirmative, "source");
        const auto n = dests[i].size();
        std::vector<InterventionSpec> by_heads, by_layers;
        for (int l = 0; l < w.config.n_layers; ++l) {
            by_layers.push_back({HookSite::attn_out(l, dst_pos), PayloadKind::cached,
                                 cache.at(HookSite::attn_out(l, src_pos))});
            for (int h = 0; h < w.config.n_heads; ++h) {
                by_heads.push_back({HookSite::head_slice(l, h, dst_pos), PayloadKind::cached,
                                    cache.at(HookSite::head_slice(l, h, src_pos))});
            }
        }
        const RowRange last{n - 1, n};
        const auto a = forward(w, dests[i], {}, by_heads, last);
        const auto b = forward(w, dests[i], {}, by_layers, last);
        for (std::size_t j = 0; j < a.logits.data.size(); ++j) {
            worst = std::max(worst, static_cast<double>(std::fabs(a.logits.data[j] - b.logits.data[j])));
        }
    }
    return make_result("patch_equivalence", worst, tolerance,
                       std::to_string(sources.size()) +
                           " inputs, 144 head slices vs 12 attn_out sites, max |logit diff|");
}

CheckResult check_determinism(const ModelWeights& w, const Vocabulary& vocab,
                              const std::vector<SentencePair>& pairs) {
    std::size_t differences = 0;
    std::vector<EncodedPair> encoded;
    for (const auto& p : pairs) encoded.push_back(encode_pair(vocab, p));

    for (const auto& e : encoded) {
        std::vector<TokenId> full = e.negated;
        full.insert(full.end(), e.target.begin(), e.target.end());
        const auto a = forward(w, full);
        const auto b = forward(w, full);
        if (a.logits.data != b.logits.data) ++differences;

        // Incremental recomputation must match a full pass with the same edit.
        const auto state = record_pass(w, full);
        const int pos = static_cast<int>(e.negated.size()) - 1;
        const std::vector<InterventionSpec> edits{
            {HookSite::head_slice(w.config.n_layers / 2, 0, pos), PayloadKind::zero,
             std::vector<float>(static_cast<std::size_t>(w.config.d_head), 0.0f)}};
        const auto full_pass = forward(w, full, {}, edits);
        const auto incremental = forward_edited(w, state, {}, edits);
        if (full_pass.logits.data != incremental.logits.data) ++differences;
    }

    // Threaded scoring must not depend on scheduling.
    std::vector<double> serial(encoded.size()), threaded(encoded.size());
    parallel_for(encoded.size(), 1, [&](std::size_t i) { serial[i] = nes(w, encoded[i]); });
    parallel_for(encoded.size(), 3, [&](std::size_t i) { threaded[i] = nes(w, encoded[i]); });
    if (serial != threaded) ++differences;

    return make_result("determinism", static_cast<double>(differences), 0.5,
                       std::to_string(pairs.size()) + " pairs, repeated/incremental/threaded " +
                           "passes compared bitwise; differing comparisons");
}

CheckResult check_reference_outputs(const ModelWeights& w, const Vocabulary& vocab,
                                    const std::filesystem::path& expected_file,
                                    const std::filesystem::path& logits_file, double tolerance) {
    const auto j = read_json(expected_file);
    const auto want_sha = j.value("checkpoint_sha256", std::string());
    if (!want_sha.empty() && !w.checkpoint_sha256.empty() && want_sha != w.checkpoint_sha256) {
        CheckResult r;
        r.name = "reference_outputs";
        r.measured = INFINITY;
        r.tolerance = tolerance;
        r.detail = "checkpoint hash " + w.checkpoint_sha256 + " differs from the reference's " + want_sha;
        return r;
    }
    SafetensorsFile file(logits_file);
    const auto& shape = file.info("logits").shape;
    const auto ref = file.read_f32("logits");
    const auto& prompts = j.at("prompts");
    if (shape.size() != 2 || shape[0] != static_cast<std::int64_t>(prompts.size()) ||
        shape[1] != w.config.vocab_size) {
        throw ShapeError("reference logits do not match the prompt list and vocabulary");
    }
    double worst = 0.0;
    std::size_t top1_mismatch = 0, tokenization_mismatch = 0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& p = prompts[i];
        const auto ids = encode(vocab, p.at("text").get<std::string>()).ids;
        if (ids != p.at("ids").get<std::vector<TokenId>>()) ++tokenization_mismatch;
        const auto result = forward(w, ids, {}, {}, RowRange{ids.size() - 1, ids.size()});
        const auto row = result.logits.row(0);
        const auto top = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
        if (top != p.at("top1").get<TokenId>()) ++top1_mismatch;
        for (std::size_t v = 0; v < row.size(); ++v) {
            worst = std::max(worst, std::fabs(static_cast<double>(row[v]) -
                                              ref[i * row.size() + v]));
        }
    }
    CheckResult r = make_result("reference_outputs", worst, tolerance,
                                std::to_string(prompts.size()) + " prompts, " +
                                    std::to_string(top1_mismatch) + " top-1 mismatches, " +
                                    std::to_string(tokenization_mismatch) +
                                    " tokenization mismatches, max |logit diff|");
    r.passed = r.passed && top1_mismatch == 0 && tokenization_mismatch == 0;
    return r;
}

CheckResult check_cue_only_diffs(const Vocabulary& vocab, const std::vector<SentencePair>& pairs) {
    std::size_t violations = 0, checked = 0;
    std::string first;
    for (const auto& p : pairs) {
        if (!p.form) continue;
        const auto& tmpl = builtin_template(p.template_name);
        std::set<std::string> allowed;
        auto allow = [&](const CueText& c) {
            for (auto& w : words(c.lead)) allowed.insert(w);
            for (auto& w : words(c.cue)) allowed.insert(w);
        };
        allow(tmpl.affirmative);
        for (const auto& [form, cue] : tmpl.negated) {
            if (form == *p.form) allow(cue);
        }
        const auto a = encode(vocab, p.affirmative_prefix).ids;
        const auto n = encode(vocab, p.negated_prefix).ids;
        std::size_t pre = 0;
        while (pre < a.size() && pre < n.size() && a[pre] == n[pre]) ++pre;
        std::size_t suf = 0;
        while (suf < a.size() - pre && suf < n.size() - pre &&
               a[a.size() - 1 - suf] == n[n.size() - 1 - suf]) {
            ++suf;
        }
        // Every non-space byte of the differing token span must fall inside a
        // whitespace-delimited word that belongs to the cue text.
        auto within_cues = [&](const std::string& text, const std::vector<TokenId>& ids) {
            const auto ids_span = std::span<const TokenId>(ids);
            const std::size_t begin = decode(vocab, ids_span.first(pre)).size();
            const std::size_t end = decode(vocab, ids_span.first(ids.size() - suf)).size();
            std::size_t i = 0;
            while (i < text.size()) {
                if (std::isspace(static_cast<unsigned char>(text[i]))) {
                    ++i;
                    continue;
                }
                std::size_t j = i;
                while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
                const bool touched = i < end && j > begin;
                if (touched && !allowed.count(text.substr(i, j - i))) return false;
                i = j;
            }
            return true;
        };
        const bool ok = within_cues(p.affirmative_prefix, a) && within_cues(p.negated_prefix, n);
        ++checked;
        if (!ok) {
            ++violations;
            if (first.empty()) first = "first violation: " + p.id;
        }
    }
    std::string detail = std::to_string(checked) + " pairs, " + std::to_string(violations) +
                         " diffs outside cue tokens";
    if (!first.empty()) detail += "; " + first;
    return make_result("cue_only_diffs", static_cast<double>(violations), 0.5, detail);
}

} // namespace negascope
