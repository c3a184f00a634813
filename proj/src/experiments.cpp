#include "negascope/experiments.hpp"

#include "negascope/errors.hpp"
#include "negascope/rng.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace negascope {

void ExperimentConfig::validate() const {
    if (jobs == 0) throw ArgumentError("jobs must be at least 1");
    for (std::size_t i = 0; i < k_values.size(); ++i) {
        if (k_values[i] == 0 || k_values[i] > static_cast<std::size_t>(kHeadCount)) {
            throw ArgumentError("k values must lie in 1..144");
        }
        if (i > 0 && k_values[i] <= k_values[i - 1]) {
            throw ArgumentError("k values must be strictly ascending");
        }
    }
    if (subsample && *subsample == 0) throw ArgumentError("subsample must be positive");
    if (cross_form_k > static_cast<std::size_t>(kHeadCount) ||
        external_k > static_cast<std::size_t>(kHeadCount) ||
        jaccard_m == 0 || jaccard_m > static_cast<std::size_t>(kHeadCount)) {
        throw ArgumentError("head-set sizes must lie in 0..144 (jaccard M in 1..144)");
    }
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<SentencePair> subsample_pairs(const std::vector<SentencePair>& pairs,
                                          const ExperimentConfig& cfg, std::uint64_t stream) {
    if (!cfg.subsample || *cfg.subsample >= pairs.size()) return pairs;
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, 5000 + stream));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(*cfg.subsample);
    std::sort(idx.begin(), idx.end());
    std::vector<SentencePair> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(pairs[i]);
    return out;
}

PreparedPair::PreparedPair(const ModelWeights& w, EncodedPair pair)
    : w_(w), pair_(std::move(pair)) {
    const int pos = static_cast<int>(pair_.affirmative.size()) - 1;
    const auto sites = last_position_sites(w.config, pos);
    auto scored = score_span(w, pair_.affirmative, pair_.target, sites, {});
    affirm_logprob_ = scored.logprob;
    cache_ = cache_from_captures(scored.captured, pos, SourceLabel::affirmative, pair_.pair.id);

    std::vector<TokenId> full = pair_.negated;
    full.insert(full.end(), pair_.target.begin(), pair_.target.end());
    if (full.size() > static_cast<std::size_t>(w.config.n_ctx)) {
        throw RangeError("pair '" + pair_.pair.id + "' exceeds the context window");
    }
    state_ = record_pass(w, full);
    negated_logprob_ = affirm_logprob_ - nes_with({});
}

double PreparedPair::nes_with(std::span<const InterventionSpec> edits) const {
    const std::size_t p = pair_.negated.size();
    const RowRange rows{p - 1, p + pair_.target.size() - 1};
    const auto result = forward_edited(w_, state_, {}, edits, rows);
    return affirm_logprob_ - target_logprob(result, p, pair_.target);
}

namespace {

std::vector<EncodedPair> encode_all(const Vocabulary& vocab,
                                    const std::vector<SentencePair>& pairs) {
    std::vector<EncodedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(encode_pair(vocab, p));
    return out;
}

/// Runs fn(i) for each example with progress reporting.
void for_each_example(const ExperimentConfig& cfg, std::size_t n,
                      const std::function<void(std::size_t)>& fn) {
    std::mutex progress_mutex;
    std::size_t done = 0;
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        fn(i);
        if (cfg.progress) {
            std::lock_guard lock(progress_mutex);
            cfg.progress(++done, n);
        }
    });
}

void require_pairs(const std::vector<SentencePair>& pairs, std::string_view what) {
    if (pairs.empty()) throw EmptyInputError(std::string(what) + " has no pairs");
}

} // namespace

BaselineResult run_baseline(const ModelContext& ctx, const ExperimentConfig& cfg,
                            const std::vector<SentencePair>& corpus,
                            const std::vector<std::string>& expected_templates) {
    cfg.validate();
    // The cap applies per template so every template keeps a row.
    std::vector<std::string> seen;
    for (const auto& p : corpus) {
        if (std::find(seen.begin(), seen.end(), p.template_name) == seen.end()) seen.push_back(p.template_name);
    }
    std::set<std::string> kept;
    for (std::size_t t = 0; t < seen.size(); ++t) {
        std::vector<SentencePair> group;
        for (const auto& p : corpus) {
            if (p.template_name == seen[t]) group.push_back(p);
        }
        for (const auto& p : subsample_pairs(group, cfg, 100 + t)) kept.insert(p.id);
    }
    std::vector<SentencePair> pairs;
    for (const auto& p : corpus) {
        if (kept.count(p.id)) pairs.push_back(p);
    }
    require_pairs(pairs, "baseline corpus");
    const auto encoded = encode_all(ctx.vocab, pairs);

    std::vector<double> scores(encoded.size());
    for_each_example(cfg, encoded.size(),
                     [&](std::size_t i) { scores[i] = nes(ctx.weights, encoded[i]); });

    std::vector<std::string> order = expected_templates;
    if (order.empty()) {
        for (const auto& p : pairs) {
            if (std::find(order.begin(), order.end(), p.template_name) == order.end()) {
                order.push_back(p.template_name);
            }
        }
    }
    BaselineResult result;
    for (const auto& name : order) {
        std::vector<double> values;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (pairs[i].template_name == name) values.push_back(scores[i]);
        }
        if (values.empty()) {
            throw CompletenessError("template '" + name + "' has no examples");
        }
        result.rows.push_back({name, aggregate(values)});
    }
    result.records.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        result.records.push_back(make_record(pairs[i].id, {}, scores[i], std::nullopt));
    }
    return result;
}

std::vector<LayerRow> run_layer_sweep(const ModelContext& ctx, const ExperimentConfig& cfg,
                                      const std::vector<SentencePair>& dev_pairs) {
    cfg.validate();
    const auto pairs = subsample_pairs(dev_pairs, cfg, 1);
    require_pairs(pairs, "layer sweep set");
    auto encoded = encode_all(ctx.vocab, pairs);
    const auto n_layers = static_cast<std::size_t>(ctx.weights.config.n_layers);

    std::vector<std::vector<double>> deltas(encoded.size());
    for_each_example(cfg, encoded.size(), [&](std::size_t i) {
        const PreparedPair prep(ctx.weights, encoded[i]);
        const double base = prep.baseline_nes();
        auto& row = deltas[i];
        row.resize(n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            const InterventionSpec edit =
                build_layer_patch(prep.affirmative_cache(), static_cast<int>(l), prep.negated_len());
            row[l] = delta_nes(prep.nes_with({&edit, 1}), base);
        }
    });

    std::vector<LayerRow> rows;
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::vector<double> values;
        values.reserve(deltas.size());
        for (const auto& d : deltas) values.push_back(d[l]);
        rows.push_back({static_cast<int>(l), aggregate(values)});
    }
    return rows;
}

HeadSweep sweep_heads(const ModelContext& ctx, const ExperimentConfig& cfg,
                      const std::vector<SentencePair>& dev_pairs) {
    cfg.validate();
    HeadSweep out;
    out.pairs = subsample_pairs(dev_pairs, cfg, 2);
    require_pairs(out.pairs, "head sweep set");
    auto encoded = encode_all(ctx.vocab, out.pairs);
    const auto heads = all_heads();
    std::vector<HeadSet> singles;
    singles.reserve(heads.size());
    for (const auto& h : heads) singles.emplace_back(std::vector<HeadId>{h}, HeadSetLabel::top_k);

    out.deltas.resize(encoded.size());
    for_each_example(cfg, encoded.size(), [&](std::size_t i) {
        const PreparedPair prep(ctx.weights, encoded[i]);
        const double base = prep.baseline_nes();
        auto& row = out.deltas[i];
        row.resize(heads.size());
        for (std::size_t h = 0; h < heads.size(); ++h) {
            const auto edits =
                build_head_patches(prep.affirmative_cache(), singles[h], prep.negated_len());
            row[h] = delta_nes(prep.nes_with(edits), base);
        }
    });
    return out;
}

HeadRanking rank_sweep(const HeadSweep& sweep,
                       const std::function<bool(const SentencePair&)>& keep) {
    const auto heads = all_heads();
    std::map<HeadId, std::vector<double>> values;
    for (std::size_t h = 0; h < heads.size(); ++h) {
        auto& v = values[heads[h]];
        for (std::size_t i = 0; i < sweep.pairs.size(); ++i) {
            if (!keep || keep(sweep.pairs[i])) v.push_back(sweep.deltas[i][h]);
        }
    }
    return rank_heads(values);
}

HeadRanking run_head_sweep(const ModelContext& ctx, const ExperimentConfig& cfg,
                           const std::vector<SentencePair>& dev_pairs) {
    return rank_sweep(sweep_heads(ctx, cfg, dev_pairs));
}

std::string_view curve_condition_name(CurveCondition c) {
    switch (c) {
    case CurveCondition::baseline: return "baseline";
    case CurveCondition::ablated: return "ablated";
    case CurveCondition::rescued: return "rescued";
    case CurveCondition::random_control: return "random_control";
    }
    return "?";
}

HeadSet control_heads(const HeadRanking& ranking, std::size_t k, std::uint64_t control_seed,
                      bool exclude_top_k) {
    const HeadSet exclude = exclude_top_k ? top_k(ranking, k) : HeadSet{};
    return sample_random_heads(k, exclude, mix_seed(control_seed, k));
}

std::vector<CurvePoint> run_ablation_rescue_curves(const ModelContext& ctx,
                                                   const ExperimentConfig& cfg,
                                                   const std::vector<SentencePair>& test_pairs,
                                                   const HeadRanking& ranking) {
    cfg.validate();
    const auto pairs = subsample_pairs(test_pairs, cfg, 3);
    require_pairs(pairs, "curve test set");
    auto encoded = encode_all(ctx.vocab, pairs);
    const int d_head = ctx.weights.config.d_head;

    std::vector<HeadSet> top_sets;
    std::vector<std::vector<HeadSet>> controls;
    for (auto k : cfg.k_values) {
        top_sets.push_back(top_k(ranking, k));
        auto& row = controls.emplace_back();
        for (auto s : cfg.control_seeds) {
            row.push_back(control_heads(ranking, k, s, cfg.controls_exclude_top_k));
        }
    }

    // Per example: [baseline, then per k: ablated, rescued, controls...].
    const std::size_t per_k = 2 + cfg.control_seeds.size();
    std::vector<std::vector<double>> scores(encoded.size());
    for_each_example(cfg, encoded.size(), [&](std::size_t i) {
        const PreparedPair prep(ctx.weights, encoded[i]);
        const auto len = prep.negated_len();
        auto& row = scores[i];
        row.reserve(1 + per_k * top_sets.size());
        row.push_back(prep.baseline_nes());
        for (std::size_t ki = 0; ki < top_sets.size(); ++ki) {
            const auto& s = top_sets[ki];
            row.push_back(prep.nes_with(build_ablation(s, len, d_head)));
            row.push_back(prep.nes_with(compose_rescue(prep.affirmative_cache(), s, s, len, d_head)));
            for (const auto& c : controls[ki]) {
                row.push_back(prep.nes_with(build_ablation(c, len, d_head)));
            }
        }
    });

    auto column = [&](std::size_t col) {
        std::vector<double> v;
        v.reserve(scores.size());
        for (const auto& r : scores) v.push_back(r[col]);
        return aggregate(v);
    };
    auto point = [](std::size_t k, CurveCondition c, std::optional<std::uint64_t> seed,
                    const AggregateStats& st) {
        return CurvePoint{k, c, seed, st.mean, st.ci_half_width, st.n};
    };

    std::vector<CurvePoint> out;
    out.push_back(point(0, CurveCondition::baseline, std::nullopt, column(0)));
    for (std::size_t ki = 0; ki < top_sets.size(); ++ki) {
        const std::size_t base = 1 + ki * per_k;
        const auto k = cfg.k_values[ki];
        out.push_back(point(k, CurveCondition::ablated, std::nullopt, column(base)));
        out.push_back(point(k, CurveCondition::rescued, std::nullopt, column(base + 1)));
        for (std::size_t si = 0; si < cfg.control_seeds.size(); ++si) {
            out.push_back(point(k, CurveCondition::random_control, cfg.control_seeds[si],
                                column(base + 2 + si)));
        }
    }
    return out;
}

std::vector<FormRow> run_cross_form(const ModelContext& ctx, const ExperimentConfig& cfg,
                                    const std::vector<SentencePair>& test_pairs,
                                    const HeadSet& heads) {
    cfg.validate();
    const int d_head = ctx.weights.config.d_head;
    std::vector<FormRow> rows;
    for (std::size_t fi = 0; fi < kCanAbilityForms.size(); ++fi) {
        const auto form = kCanAbilityForms[fi];
        std::vector<SentencePair> of_form;
        for (const auto& p : test_pairs) {
            if (p.form == form) of_form.push_back(p);
        }
        if (of_form.empty()) {
            throw CompletenessError("negation form '" + std::string(form_name(form)) +
                                    "' has no test examples");
        }
        of_form = subsample_pairs(of_form, cfg, 400 + fi);
        auto encoded = encode_all(ctx.vocab, of_form);
        std::vector<double> deltas(encoded.size());
        for_each_example(cfg, encoded.size(), [&](std::size_t i) {
            const PreparedPair prep(ctx.weights, encoded[i]);
            const auto edits = build_ablation(heads, prep.negated_len(), d_head);
            deltas[i] = delta_nes(prep.nes_with(edits), prep.baseline_nes());
        });
        rows.push_back({form, aggregate(deltas)});
    }
    return rows;
}

JaccardMatrix jaccard_from_sweep(const HeadSweep& sweep, std::size_t m) {
    JaccardMatrix out;
    for (auto form : kCanAbilityForms) {
        const auto present = std::any_of(sweep.pairs.begin(), sweep.pairs.end(),
                                         [&](const SentencePair& p) { return p.form == form; });
        if (!present) {
            throw CompletenessError("negation form '" + std::string(form_name(form)) +
                                    "' has no dev examples");
        }
        out.forms.push_back(form);
        out.top_sets.push_back(
            top_k(rank_sweep(sweep, [&](const SentencePair& p) { return p.form == form; }), m));
    }
    const auto n = out.forms.size();
    out.values.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double j = jaccard(out.top_sets[a], out.top_sets[b]);
            out.values[a][b] = j;
            out.values[b][a] = j;
        }
    }
    return out;
}

JaccardMatrix run_cross_form_jaccard(const ModelContext& ctx, const ExperimentConfig& cfg,
                                     const std::vector<SentencePair>& dev_pairs, std::size_t m) {
    std::vector<SentencePair> can;
    for (const auto& p : dev_pairs) {
        if (p.form && std::find(kCanAbilityForms.begin(), kCanAbilityForms.end(), *p.form) !=
                          kCanAbilityForms.end()) {
            can.push_back(p);
        }
    }
    return jaccard_from_sweep(sweep_heads(ctx, cfg, can), m);
}

ExternalResult run_external_validation(const ModelContext& ctx, const ExperimentConfig& cfg,
                                       const std::vector<SentencePair>& external_pairs,
                                       const HeadSet& heads) {
    cfg.validate();
    const auto pairs = subsample_pairs(external_pairs, cfg, 6);
    require_pairs(pairs, "external set");
    auto encoded = encode_all(ctx.vocab, pairs);
    const int d_head = ctx.weights.config.d_head;

    std::vector<double> base(encoded.size()), ablated(encoded.size()), rescued(encoded.size());
    for_each_example(cfg, encoded.size(), [&](std::size_t i) {
        const PreparedPair prep(ctx.weights, encoded[i]);
        const auto len = prep.negated_len();
        base[i] = prep.baseline_nes();
        ablated[i] = prep.nes_with(build_ablation(heads, len, d_head));
        rescued[i] =
            prep.nes_with(compose_rescue(prep.affirmative_cache(), heads, heads, len, d_head));
    });
    return {aggregate(base), aggregate(ablated), aggregate(rescued)};
}

} // namespace negascope
