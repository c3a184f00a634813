#pragma once

#include "negascope/model.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace negascope {

inline constexpr int kLayers = 12;
inline constexpr int kHeadsPerLayer = 12;
inline constexpr int kHeadCount = kLayers * kHeadsPerLayer;

/// One attention head of GPT-2 Small, (layer, head) in 0..11 x 0..11.
struct HeadId {
    int layer = 0;
    int head = 0;

    auto operator<=>(const HeadId&) const = default;
};

std::string to_string(HeadId id);  // "L5H11"
HeadId parse_head(std::string_view text);
void validate(HeadId id);          // throws RangeError
std::vector<HeadId> all_heads();   // L0H0, L0H1, ..., L11H11

enum class SourceLabel { affirmative, negated };

/// Activations recorded at one token position of one run.
struct ActivationCache {
    std::map<HookSite, std::vector<float>> entries;
    SourceLabel source_label = SourceLabel::affirmative;
    std::string source_pair_id;
    int position = 0;

    /// Throws CacheMissError when the site was not recorded.
    const std::vector<float>& at(const HookSite& site) const;
};

enum class HeadSetLabel { top_k, random_control };

/// Ordered, duplicate-free set of heads.
class HeadSet {
public:
    HeadSet() = default;
    HeadSet(std::vector<HeadId> heads, HeadSetLabel label);

    const std::vector<HeadId>& heads() const noexcept { return heads_; }
    HeadSetLabel label() const noexcept { return label_; }
    std::size_t k() const noexcept { return heads_.size(); }
    bool empty() const noexcept { return heads_.empty(); }
    bool contains(HeadId id) const;

private:
    std::vector<HeadId> heads_;
    HeadSetLabel label_ = HeadSetLabel::top_k;
};

/// Every attn_out site and every head slice at `position`, layer-major.
std::vector<HookSite> last_position_sites(const ModelConfig& config, int position);

/// Records all attn_out and head-slice activations at the prefix's last token.
ActivationCache cache_activations(const ModelWeights& w, std::span<const TokenId> prefix,
                                  SourceLabel label, std::string pair_id);

/// Same contents as cache_activations, taken from captures of a longer pass.
ActivationCache cache_from_captures(const std::map<HookSite, std::vector<float>>& captured,
                                    int position, SourceLabel label, std::string pair_id);

/// Affirmative attn_out of `layer` injected at the negated prefix's last token.
InterventionSpec build_layer_patch(const ActivationCache& cache, int layer,
                                   std::size_t negated_prefix_len);

std::vector<InterventionSpec> build_head_patches(const ActivationCache& cache,
                                                 const HeadSet& heads,
                                                 std::size_t negated_prefix_len);

/// Zero-vector head-slice edits.
std::vector<InterventionSpec> build_ablation(const HeadSet& heads, std::size_t negated_prefix_len,
                                             int d_head = 64);

/// Cached affirmative head slices for `heads`. Appended after an ablation the
/// patches win at shared sites, so rescue(S) over ablate(S) == patch(S).
std::vector<InterventionSpec> build_rescue(const ActivationCache& cache, const HeadSet& heads,
                                           std::size_t negated_prefix_len);

/// ablation(ablated) followed by rescue(rescued).
std::vector<InterventionSpec> compose_rescue(const ActivationCache& cache,
                                             const HeadSet& ablated, const HeadSet& rescued,
                                             std::size_t negated_prefix_len, int d_head = 64);

/// Edits that write the negated run's own activations back into itself.
std::vector<InterventionSpec> build_null_self_patch(const ModelWeights& w,
                                                    std::span<const TokenId> negated_prefix,
                                                    std::span<const HookSite> sites);

/// k distinct heads drawn uniformly from the 144 minus `exclude`.
HeadSet sample_random_heads(std::size_t k, const HeadSet& exclude, std::uint64_t seed);

} // namespace negascope
