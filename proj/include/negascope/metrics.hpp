#pragma once

#include "negascope/dataset.hpp"
#include "negascope/interventions.hpp"
#include "negascope/model.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace negascope {

/// A sentence pair with its three token sequences.
struct EncodedPair {
    SentencePair pair;
    std::vector<TokenId> affirmative;
    std::vector<TokenId> negated;
    std::vector<TokenId> target;
};

/// Throws ArgumentError when a prefix or the target encodes to no tokens.
EncodedPair encode_pair(const Vocabulary& vocab, const SentencePair& pair);

/// Negation Effect Score in nats:
/// log P(target | affirmative) - log P(target | negated).
double nes(const ModelWeights& w, const EncodedPair& pair,
           std::span<const InterventionSpec> edits_affirm = {},
           std::span<const InterventionSpec> edits_neg = {});

/// patched - baseline; both must be finite.
double delta_nes(double patched, double baseline);

enum class ConditionKind {
    baseline,
    layer_patch,
    head_patch,
    ablated,
    rescued,
    random_control,
    null_patch,
};

struct Condition {
    ConditionKind kind = ConditionKind::baseline;
    int layer = -1;
    int head = -1;
    int k = -1;
    std::uint64_t seed = 0;

    std::string key() const;  // e.g. "head_patch(5,11)", "ablated(8)"
    auto operator<=>(const Condition&) const = default;
};

struct NesRecord {
    std::string pair_id;
    Condition condition;
    double nes = 0.0;
    std::optional<double> delta_nes;  // present iff condition is not baseline
};

/// Builds a record, checking the delta/condition invariant.
NesRecord make_record(std::string pair_id, Condition condition, double nes,
                      std::optional<double> delta);

struct AggregateStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double failure_rate = 0.0;            // fraction with value > 0
    std::optional<double> ci_half_width;  // 1.96 * sample sd / sqrt(n); absent for n == 1
};

/// Throws ArgumentError on an empty input.
AggregateStats aggregate(std::span<const double> values);

struct HeadRankingEntry {
    HeadId head;
    double mean_delta_nes = 0.0;
    std::optional<double> ci_half_width;
    std::size_t n = 0;
};

/// Heads ordered by descending mean delta-NES, ties by (layer, head).
struct HeadRanking {
    std::vector<HeadRankingEntry> entries;
};

/// Throws CompletenessError unless all 144 heads have at least one value.
HeadRanking rank_heads(const std::map<HeadId, std::vector<double>>& sweep);

HeadSet top_k(const HeadRanking& ranking, std::size_t k);

/// |a ∩ b| / |a ∪ b|; ArgumentError when both are empty.
double jaccard(const HeadSet& a, const HeadSet& b);

} // namespace negascope
