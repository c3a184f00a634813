#pragma once

#include "negascope/dataset.hpp"
#include "negascope/interventions.hpp"
#include "negascope/metrics.hpp"
#include "negascope/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace negascope {

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::vector<std::size_t> k_values = {1, 2, 4, 8, 16};
    std::vector<std::uint64_t> control_seeds = {1, 2, 3, 4, 5};
    std::optional<std::size_t> subsample;  // deterministic per-sweep example cap
    std::size_t jobs = 1;
    std::size_t cross_form_k = 8;
    std::size_t external_k = 8;
    std::size_t jaccard_m = 10;
    bool controls_exclude_top_k = true;
    /// Called after each example finishes, serialised across workers.
    std::function<void(std::size_t done, std::size_t total)> progress;

    /// k_values ascending, each <= 144; jobs >= 1.
    void validate() const;
};

struct ModelContext {
    const ModelWeights& weights;
    const Vocabulary& vocab;
};

/// Runs fn(0..n-1) on `jobs` threads. Each index runs exactly once; callers
/// write results into per-index slots so output is order-independent.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Deterministic subset of `pairs` (original order kept) when cfg.subsample
/// is below the pair count.
std::vector<SentencePair> subsample_pairs(const std::vector<SentencePair>& pairs,
                                          const ExperimentConfig& cfg, std::uint64_t stream);

/// Everything needed to score one pair under negated-pass interventions:
/// the affirmative score and cache plus a recorded negated pass.
class PreparedPair {
public:
    PreparedPair(const ModelWeights& w, EncodedPair pair);

    const EncodedPair& encoded() const noexcept { return pair_; }
    const ActivationCache& affirmative_cache() const noexcept { return cache_; }
    double affirmative_logprob() const noexcept { return affirm_logprob_; }
    double baseline_nes() const noexcept { return affirm_logprob_ - negated_logprob_; }
    std::size_t negated_len() const noexcept { return pair_.negated.size(); }

    /// NES with `edits` applied to the negated pass only.
    double nes_with(std::span<const InterventionSpec> edits) const;

private:
    const ModelWeights& w_;
    EncodedPair pair_;
    ActivationCache cache_;
    double affirm_logprob_ = 0.0;
    double negated_logprob_ = 0.0;
    PassState state_;
};

struct TemplateRow {
    std::string template_name;
    AggregateStats stats;
};

struct BaselineResult {
    std::vector<TemplateRow> rows;
    std::vector<NesRecord> records;
};

/// Per-template aggregates of baseline NES. Rows follow `expected_templates`
/// order (CompletenessError if one has no pairs), or first-seen order when
/// the list is empty. A subsample cap applies to each template separately.
BaselineResult run_baseline(const ModelContext& ctx, const ExperimentConfig& cfg,
                            const std::vector<SentencePair>& corpus,
                            const std::vector<std::string>& expected_templates = {});

struct LayerRow {
    int layer = 0;
    AggregateStats stats;
};

std::vector<LayerRow> run_layer_sweep(const ModelContext& ctx, const ExperimentConfig& cfg,
                                      const std::vector<SentencePair>& dev_pairs);

/// Per-example delta-NES of every single-head patch; deltas[i][h] follows
/// all_heads() order.
struct HeadSweep {
    std::vector<SentencePair> pairs;
    std::vector<std::vector<double>> deltas;
};

HeadSweep sweep_heads(const ModelContext& ctx, const ExperimentConfig& cfg,
                      const std::vector<SentencePair>& dev_pairs);

/// Ranking over the sweep rows whose pair satisfies `keep` (all rows if empty).
HeadRanking rank_sweep(const HeadSweep& sweep,
                       const std::function<bool(const SentencePair&)>& keep = {});

HeadRanking run_head_sweep(const ModelContext& ctx, const ExperimentConfig& cfg,
                           const std::vector<SentencePair>& dev_pairs);

enum class CurveCondition { baseline, ablated, rescued, random_control };

std::string_view curve_condition_name(CurveCondition c);

struct CurvePoint {
    std::size_t k = 0;
    CurveCondition condition = CurveCondition::baseline;
    std::optional<std::uint64_t> seed;  // control seed for random_control
    double mean_nes = 0.0;
    std::optional<double> ci_half_width;
    std::size_t n = 0;
};

/// The random-control head set used at (k, control seed).
HeadSet control_heads(const HeadRanking& ranking, std::size_t k, std::uint64_t control_seed,
                      bool exclude_top_k);

std::vector<CurvePoint> run_ablation_rescue_curves(const ModelContext& ctx,
                                                   const ExperimentConfig& cfg,
                                                   const std::vector<SentencePair>& test_pairs,
                                                   const HeadRanking& ranking);

struct FormRow {
    NegationForm form;
    AggregateStats stats;  // of NES_ablated - NES_baseline
};

std::vector<FormRow> run_cross_form(const ModelContext& ctx, const ExperimentConfig& cfg,
                                    const std::vector<SentencePair>& test_pairs,
                                    const HeadSet& heads);

struct JaccardMatrix {
    std::vector<NegationForm> forms;
    std::vector<std::vector<double>> values;
    std::vector<HeadSet> top_sets;
};

/// Top-m sets from each form's rows of an existing sweep. A single-head
/// patch score depends only on its own example, so this equals running a
/// separate sweep per form.
JaccardMatrix jaccard_from_sweep(const HeadSweep& sweep, std::size_t m);

JaccardMatrix run_cross_form_jaccard(const ModelContext& ctx, const ExperimentConfig& cfg,
                                     const std::vector<SentencePair>& dev_pairs, std::size_t m);

struct ExternalResult {
    AggregateStats baseline;
    AggregateStats ablated;
    AggregateStats rescued;
};

ExternalResult run_external_validation(const ModelContext& ctx, const ExperimentConfig& cfg,
                                       const std::vector<SentencePair>& external_pairs,
                                       const HeadSet& heads);

} // namespace negascope
