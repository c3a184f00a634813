#include "negascope/interventions.hpp"

#include "negascope/errors.hpp"
#include "negascope/rng.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace negascope {

std::string to_string(HeadId id) {
    return "L" + std::to_string(id.layer) + "H" + std::to_string(id.head);
}

HeadId parse_head(std::string_view text) {
    HeadId id;
    const auto h = text.find('H');
    if (text.size() < 4 || text.front() != 'L' || h == std::string_view::npos) {
        throw ParseError("bad head id '" + std::string(text) + "'");
    }
    auto num = [&](std::string_view s, int& out) {
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc{} || p != s.data() + s.size()) {
            throw ParseError("bad head id '" + std::string(text) + "'");
        }
    };
    num(text.substr(1, h - 1), id.layer);
    num(text.substr(h + 1), id.head);
    validate(id);
    return id;
}

void validate(HeadId id) {
    if (id.layer < 0 || id.layer >= kLayers || id.head < 0 || id.head >= kHeadsPerLayer) {
        throw RangeError("head " + to_string(id) + " outside L0..L11 x H0..H11");
    }
}

std::vector<HeadId> all_heads() {
    std::vector<HeadId> out;
    out.reserve(kHeadCount);
    for (int l = 0; l < kLayers; ++l) {
        for (int h = 0; h < kHeadsPerLayer; ++h) out.push_back({l, h});
    }
    return out;
}

const std::vector<float>& ActivationCache::at(const HookSite& site) const {
    auto it = entries.find(site);
    if (it == entries.end()) {
        throw CacheMissError("activation cache for '" + source_pair_id + "' has no entry for " +
                             to_string(site));
    }
    return it->second;
}

HeadSet::HeadSet(std::vector<HeadId> heads, HeadSetLabel label)
    : heads_(std::move(heads)), label_(label) {
    std::set<HeadId> seen;
    for (const auto& h : heads_) {
        validate(h);
        if (!seen.insert(h).second) {
            throw ArgumentError("head set lists " + to_string(h) + " twice");
        }
    }
}

bool HeadSet::contains(HeadId id) const {
    return std::find(heads_.begin(), heads_.end(), id) != heads_.end();
}

std::vector<HookSite> last_position_sites(const ModelConfig& config, int position) {
    std::vector<HookSite> sites;
    for (int l = 0; l < config.n_layers; ++l) {
        sites.push_back(HookSite::attn_out(l, position));
        for (int h = 0; h < config.n_heads; ++h) {
            sites.push_back(HookSite::head_slice(l, h, position));
        }
    }
    return sites;
}

ActivationCache cache_from_captures(const std::map<HookSite, std::vector<float>>& captured,
                                    int position, SourceLabel label, std::string pair_id) {
    ActivationCache cache;
    cache.source_label = label;
    cache.source_pair_id = std::move(pair_id);
    cache.position = position;
    for (const auto& [site, value] : captured) {
        if (site.position == position) cache.entries.emplace(site, value);
    }
    return cache;
}

ActivationCache cache_activations(const ModelWeights& w, std::span<const TokenId> prefix,
                                  SourceLabel label, std::string pair_id) {
    if (prefix.empty()) {
        throw ArgumentError("cannot cache activations of an empty prefix");
    }
    const int pos = static_cast<int>(prefix.size()) - 1;
    const auto sites = last_position_sites(w.config, pos);
    auto result = forward(w, prefix, sites, {}, RowRange{0, 0});
    return cache_from_captures(result.captured, pos, label, std::move(pair_id));
}

namespace {

int last_position(std::size_t prefix_len) {
    if (prefix_len == 0) {
        throw ArgumentError("negated prefix must contain at least one token");
    }
    return static_cast<int>(prefix_len) - 1;
}

} // namespace

InterventionSpec build_layer_patch(const ActivationCache& cache, int layer,
                                   std::size_t negated_prefix_len) {
    if (layer < 0 || layer >= kLayers) {
        throw RangeError("layer " + std::to_string(layer) + " outside 0.." +
                         std::to_string(kLayers - 1));
    }
    const auto& value = cache.at(HookSite::attn_out(layer, cache.position));
    return {HookSite::attn_out(layer, last_position(negated_prefix_len)), PayloadKind::cached,
            value};
}

std::vector<InterventionSpec> build_head_patches(const ActivationCache& cache,
                                                 const HeadSet& heads,
                                                 std::size_t negated_prefix_len) {
    const int pos = last_position(negated_prefix_len);
    std::vector<InterventionSpec> out;
    out.reserve(heads.k());
    for (const auto& h : heads.heads()) {
        const auto& value = cache.at(HookSite::head_slice(h.layer, h.head, cache.position));
        out.push_back({HookSite::head_slice(h.layer, h.head, pos), PayloadKind::cached, value});
    }
    return out;
}

std::vector<InterventionSpec> build_ablation(const HeadSet& heads, std::size_t negated_prefix_len,
                                             int d_head) {
    std::vector<InterventionSpec> out;
    if (heads.empty()) return out;
    const int pos = last_position(negated_prefix_len);
    out.reserve(heads.k());
    for (const auto& h : heads.heads()) {
        out.push_back({HookSite::head_slice(h.layer, h.head, pos), PayloadKind::zero,
                       std::vector<float>(static_cast<std::size_t>(d_head), 0.0f)});
    }
    return out;
}

std::vector<InterventionSpec> build_rescue(const ActivationCache& cache, const HeadSet& heads,
                                           std::size_t negated_prefix_len) {
    return build_head_patches(cache, heads, negated_prefix_len);
}

std::vector<InterventionSpec> compose_rescue(const ActivationCache& cache,
                                             const HeadSet& ablated, const HeadSet& rescued,
                                             std::size_t negated_prefix_len, int d_head) {
    auto edits = build_ablation(ablated, negated_prefix_len, d_head);
    auto patches = build_rescue(cache, rescued, negated_prefix_len);
    edits.insert(edits.end(), std::make_move_iterator(patches.begin()),
                 std::make_move_iterator(patches.end()));
    return edits;
}

std::vector<InterventionSpec> build_null_self_patch(const ModelWeights& w,
                                                    std::span<const TokenId> negated_prefix,
                                                    std::span<const HookSite> sites) {
    std::vector<InterventionSpec> out;
    if (sites.empty()) return out;
    auto result = forward(w, negated_prefix, sites, {}, RowRange{0, 0});
    out.reserve(sites.size());
    for (const auto& s : sites) {
        out.push_back({s, PayloadKind::self_cache, result.captured.at(s)});
    }
    return out;
}

HeadSet sample_random_heads(std::size_t k, const HeadSet& exclude, std::uint64_t seed) {
    std::vector<HeadId> pool;
    for (const auto& h : all_heads()) {
        if (!exclude.contains(h)) pool.push_back(h);
    }
    if (k > pool.size()) {
        throw ArgumentError("cannot draw " + std::to_string(k) + " heads from " +
                            std::to_string(pool.size()) + " candidates");
    }
    Rng rng(seed);
    // Partial Fisher-Yates: the first k slots end up uniformly sampled.
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return HeadSet(std::move(pool), HeadSetLabel::random_control);
}

} // namespace negascope
