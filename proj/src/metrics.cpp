#include "negascope/metrics.hpp"

#include "negascope/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace negascope {

EncodedPair encode_pair(const Vocabulary& vocab, const SentencePair& pair) {
    EncodedPair e;
    e.pair = pair;
    e.affirmative = encode(vocab, pair.affirmative_prefix).ids;
    e.negated = encode(vocab, pair.negated_prefix).ids;
    e.target = encode(vocab, pair.target).ids;
    if (e.affirmative.empty() || e.negated.empty()) {
        throw ArgumentError("pair '" + pair.id + "' has an empty prefix");
    }
    if (e.target.empty()) {
        throw ArgumentError("pair '" + pair.id + "' has an empty target");
    }
    return e;
}

double nes(const ModelWeights& w, const EncodedPair& pair,
           std::span<const InterventionSpec> edits_affirm,
           std::span<const InterventionSpec> edits_neg) {
    const double a = span_logprob(w, pair.affirmative, pair.target, edits_affirm);
    const double n = span_logprob(w, pair.negated, pair.target, edits_neg);
    return a - n;
}

double delta_nes(double patched, double baseline) {
    if (!std::isfinite(patched) || !std::isfinite(baseline)) {
        throw ArgumentError("delta_nes needs finite scores");
    }
    return patched - baseline;
}

std::string Condition::key() const {
    switch (kind) {
    case ConditionKind::baseline: return "baseline";
    case ConditionKind::layer_patch: return "layer_patch(" + std::to_string(layer) + ")";
    case ConditionKind::head_patch:
        return "head_patch(" + std::to_string(layer) + "," + std::to_string(head) + ")";
    case ConditionKind::ablated: return "ablated(" + std::to_string(k) + ")";
    case ConditionKind::rescued: return "rescued(" + std::to_string(k) + ")";
    case ConditionKind::random_control:
        return "random_control(" + std::to_string(k) + "," + std::to_string(seed) + ")";
    case ConditionKind::null_patch: return "null_patch";
    }
    return "?";
}

NesRecord make_record(std::string pair_id, Condition condition, double nes_value,
                      std::optional<double> delta) {
    const bool is_baseline = condition.kind == ConditionKind::baseline;
    if (is_baseline == delta.has_value()) {
        throw ArgumentError("delta_nes must be present exactly for non-baseline conditions");
    }
    return {std::move(pair_id), condition, nes_value, delta};
}

AggregateStats aggregate(std::span<const double> values) {
    if (values.empty()) {
        throw ArgumentError("aggregate needs at least one value");
    }
    AggregateStats s;
    s.n = values.size();
    double sum = 0.0;
    std::size_t failures = 0;
    for (double v : values) {
        sum += v;
        if (v > 0.0) ++failures;
    }
    s.mean = sum / static_cast<double>(s.n);
    s.failure_rate = static_cast<double>(failures) / static_cast<double>(s.n);

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = s.n / 2;
    s.median = s.n % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    if (s.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
        s.ci_half_width = 1.96 * sd / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

HeadRanking rank_heads(const std::map<HeadId, std::vector<double>>& sweep) {
    HeadRanking r;
    for (const auto& h : all_heads()) {
        auto it = sweep.find(h);
        if (it == sweep.end() || it->second.empty()) {
            throw CompletenessError("head sweep has no values for " + to_string(h));
        }
        const auto stats = aggregate(it->second);
        r.entries.push_back({h, stats.mean, stats.ci_half_width, stats.n});
    }
    if (sweep.size() != static_cast<std::size_t>(kHeadCount)) {
        throw CompletenessError("head sweep contains heads outside the 144-head universe");
    }
    std::stable_sort(r.entries.begin(), r.entries.end(),
                     [](const HeadRankingEntry& a, const HeadRankingEntry& b) {
                         if (a.mean_delta_nes != b.mean_delta_nes) {
                             return a.mean_delta_nes > b.mean_delta_nes;
                         }
                         return a.head < b.head;
                     });
    return r;
}

HeadSet top_k(const HeadRanking& ranking, std::size_t k) {
    if (k > static_cast<std::size_t>(kHeadCount)) {
        throw ArgumentError("k = " + std::to_string(k) + " exceeds 144 heads");
    }
    if (k > ranking.entries.size()) {
        throw ArgumentError("ranking has only " + std::to_string(ranking.entries.size()) +
                            " entries");
    }
    std::vector<HeadId> heads;
    heads.reserve(k);
    for (std::size_t i = 0; i < k; ++i) heads.push_back(ranking.entries[i].head);
    return HeadSet(std::move(heads), HeadSetLabel::top_k);
}

double jaccard(const HeadSet& a, const HeadSet& b) {
    if (a.empty() && b.empty()) {
        throw ArgumentError("jaccard similarity of two empty head sets is undefined");
    }
    const std::set<HeadId> sa(a.heads().begin(), a.heads().end());
    const std::set<HeadId> sb(b.heads().begin(), b.heads().end());
    std::size_t inter = 0;
    for (const auto& h : sa) inter += sb.count(h);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace negascope
