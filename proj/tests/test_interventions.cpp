#include "negascope/errors.hpp"
#include "negascope/interventions.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace negascope;
using negascope::testing::gpt2_vocab;
using negascope::testing::tiny_model;

namespace {

std::vector<TokenId> tokens(std::string_view text) { return encode(gpt2_vocab(), text).ids; }

const std::vector<TokenId>& affirmative() {
    static const auto t = tokens("Alice can");
    return t;
}
const std::vector<TokenId>& negated() {
    static const auto t = tokens("Alice can never");
    return t;
}

const ActivationCache& cache() {
    static const auto c = cache_activations(tiny_model(), affirmative(), SourceLabel::affirmative, "p1");
    return c;
}

Matrix last_logits(std::span<const InterventionSpec> edits) {
    const std::size_t n = negated().size();
    return forward(tiny_model(), negated(), {}, edits, {n - 1, n}).logits;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(a.data[i] - b.data[i])));
    }
    return worst;
}

HeadSet heads(std::vector<HeadId> ids) { return HeadSet(std::move(ids), HeadSetLabel::top_k); }

HeadSet first_heads(std::size_t k) {
    auto all = all_heads();
    all.resize(k);
    return heads(all);
}

} // namespace

TEST(Cache, Holds156EntriesAtTheLastPosition) {
    const auto& c = cache();
    EXPECT_EQ(c.entries.size(), 156u);
    EXPECT_EQ(c.position, static_cast<int>(affirmative().size()) - 1);
    EXPECT_EQ(c.source_label, SourceLabel::affirmative);
    for (const auto& [site, value] : c.entries) {
        EXPECT_EQ(site.position, c.position);
        EXPECT_EQ(value.size(), site.kind == SiteKind::attn_out ? 48u : 4u);
    }
    EXPECT_THROW(c.at(HookSite::attn_out(0, 0)), CacheMissError);
}

TEST(Cache, IsDeterministic) {
    const auto again = cache_activations(tiny_model(), affirmative(), SourceLabel::affirmative, "p1");
    EXPECT_EQ(again.entries, cache().entries);
}

TEST(Cache, HeadSlicesRecomposeToAttnOut) {
    const auto& w = tiny_model();
    const auto& c = cache();
    for (int layer = 0; layer < 12; ++layer) {
        const auto& lw = w.layers[static_cast<std::size_t>(layer)];
        std::vector<double> sum(48);
        for (std::size_t j = 0; j < 48; ++j) sum[j] = lw.out_bias[j];
        for (int h = 0; h < 12; ++h) {
            const auto& z = c.at(HookSite::head_slice(layer, h, c.position));
            for (std::size_t e = 0; e < 4; ++e) {
                const std::size_t row = static_cast<std::size_t>(h) * 4 + e;
                for (std::size_t j = 0; j < 48; ++j) sum[j] += z[e] * lw.out_weight.at(row, j);
            }
        }
        const auto& out = c.at(HookSite::attn_out(layer, c.position));
        for (std::size_t j = 0; j < 48; ++j) EXPECT_NEAR(sum[j], out[j], 1e-4) << layer;
    }
}

TEST(Cache, FromCapturesMatchesDirectCache) {
    const auto sites = last_position_sites(tiny_model().config, static_cast<int>(affirmative().size()) - 1);
    std::vector<TokenId> longer = affirmative();
    longer.push_back(tokens(" swim")[0]);
    const auto result = forward(tiny_model(), longer, sites);
    const auto c = cache_from_captures(result.captured, cache().position, SourceLabel::affirmative, "p1");
    EXPECT_EQ(c.entries, cache().entries);
}

TEST(LayerPatch, TargetsLastNegatedPosition) {
    const auto spec = build_layer_patch(cache(), 4, 7);
    EXPECT_EQ(spec.site, HookSite::attn_out(4, 6));
    EXPECT_EQ(spec.payload, PayloadKind::cached);
    EXPECT_EQ(spec.value, cache().at(HookSite::attn_out(4, cache().position)));
    EXPECT_THROW(build_layer_patch(cache(), 12, 7), RangeError);
    EXPECT_THROW(build_layer_patch(cache(), -1, 7), RangeError);
}

TEST(LayerPatch, CaptureReturnsTheInjectedVector) {
    const auto spec = build_layer_patch(cache(), 4, negated().size());
    const std::vector<HookSite> capture{spec.site};
    const auto r = forward(tiny_model(), negated(), capture, std::vector<InterventionSpec>{spec});
    EXPECT_EQ(r.captured.at(spec.site), spec.value);
}

TEST(LayerPatch, MissingEntryIsACacheMiss) {
    ActivationCache empty;
    EXPECT_THROW(build_layer_patch(empty, 3, 5), CacheMissError);
    EXPECT_THROW(build_head_patches(empty, first_heads(1), 5), CacheMissError);
}

TEST(HeadPatches, OneSpecPerHead) {
    const auto specs = build_head_patches(cache(), heads({{5, 11}}), 9);
    ASSERT_EQ(specs.size(), 1u);
    EXPECT_EQ(specs[0].site, HookSite::head_slice(5, 11, 8));
    EXPECT_EQ(build_head_patches(cache(), first_heads(144), 9).size(), 144u);
}

TEST(HeadPatches, AllHeadsEqualAllLayerPatches) {
    const std::size_t n = negated().size();
    std::vector<InterventionSpec> layer_edits;
    for (int l = 0; l < 12; ++l) layer_edits.push_back(build_layer_patch(cache(), l, n));
    const auto head_edits = build_head_patches(cache(), first_heads(144), n);
    EXPECT_LT(max_abs_diff(last_logits(head_edits), last_logits(layer_edits)), 1e-4);
}

TEST(Ablation, SpecsAndIdentity) {
    EXPECT_TRUE(build_ablation(HeadSet{}, 5).empty());
    EXPECT_TRUE(build_ablation(HeadSet{}, 0).empty());
    const auto specs = build_ablation(first_heads(8), 5, 4);
    ASSERT_EQ(specs.size(), 8u);
    for (const auto& s : specs) {
        EXPECT_EQ(s.site.position, 4);
        EXPECT_EQ(s.payload, PayloadKind::zero);
        EXPECT_EQ(s.value, std::vector<float>(4, 0.0f));
    }
    const auto plain = last_logits({});
    EXPECT_EQ(max_abs_diff(last_logits(build_ablation(HeadSet{}, negated().size(), 4)), plain), 0.0);
}

TEST(Ablation, AllHeadsEqualZeroedAttnOutMinusBias) {
    // Zeroing every head leaves only the output bias, so it matches an attn_out
    // patch carrying that bias.
    const std::size_t n = negated().size();
    std::vector<InterventionSpec> out_edits;
    for (int l = 0; l < 12; ++l) {
        out_edits.push_back({HookSite::attn_out(l, static_cast<int>(n) - 1), PayloadKind::cached,
                             tiny_model().layers[static_cast<std::size_t>(l)].out_bias});
    }
    const auto abl = build_ablation(first_heads(144), n, 4);
    EXPECT_LT(max_abs_diff(last_logits(abl), last_logits(out_edits)), 1e-4);
}

TEST(Rescue, OverAblationEqualsHeadPatch) {
    const std::size_t n = negated().size();
    const auto s8 = first_heads(8);
    const auto rescued = compose_rescue(cache(), s8, s8, n, 4);
    const auto patched = build_head_patches(cache(), s8, n);
    EXPECT_LT(max_abs_diff(last_logits(rescued), last_logits(patched)), 1e-6);
}

TEST(Rescue, OfEmptySetEqualsAblation) {
    const std::size_t n = negated().size();
    const auto s8 = first_heads(8);
    EXPECT_EQ(max_abs_diff(last_logits(compose_rescue(cache(), s8, HeadSet{}, n, 4)),
                           last_logits(build_ablation(s8, n, 4))),
              0.0);
}

TEST(Rescue, SmallerSetLeavesTheRestZeroed) {
    const std::size_t n = negated().size();
    const auto s4 = first_heads(4), s8 = first_heads(8);
    const auto edits = compose_rescue(cache(), s8, s4, n, 4);
    std::vector<HookSite> sites;
    for (auto h : s8.heads()) sites.push_back(HookSite::head_slice(h.layer, h.head, static_cast<int>(n) - 1));
    const auto r = forward(tiny_model(), negated(), sites, edits);
    for (std::size_t i = 0; i < 8; ++i) {
        const auto& got = r.captured.at(sites[i]);
        if (i < 4) {
            EXPECT_EQ(got, cache().at(HookSite::head_slice(sites[i].layer, sites[i].head, cache().position)));
        } else {
            EXPECT_EQ(got, std::vector<float>(4, 0.0f));
        }
    }
}

TEST(NullPatch, EmptySitesGiveNoEdits) {
    EXPECT_TRUE(build_null_self_patch(tiny_model(), negated(), {}).empty());
}

TEST(NullPatch, AllSitesLeaveLogitsUnchanged) {
    const int pos = static_cast<int>(negated().size()) - 1;
    const auto sites = last_position_sites(tiny_model().config, pos);
    ASSERT_EQ(sites.size(), 156u);
    const auto edits = build_null_self_patch(tiny_model(), negated(), sites);
    ASSERT_EQ(edits.size(), 156u);
    for (const auto& e : edits) EXPECT_EQ(e.payload, PayloadKind::self_cache);
    EXPECT_LT(max_abs_diff(last_logits(edits), last_logits({})), 1e-6);
}

TEST(NullPatch, EarlierPositionsAreNeutralToo) {
    const std::vector<HookSite> sites{HookSite::attn_out(2, 0), HookSite::head_slice(7, 3, 1)};
    const auto edits = build_null_self_patch(tiny_model(), negated(), sites);
    EXPECT_LT(max_abs_diff(last_logits(edits), last_logits({})), 1e-6);
}

TEST(RandomHeads, DeterministicDistinctAndExcluding) {
    EXPECT_TRUE(sample_random_heads(0, HeadSet{}, 1).empty());
    EXPECT_EQ(sample_random_heads(144, HeadSet{}, 1).k(), 144u);
    const auto exclude = first_heads(8);
    const auto a = sample_random_heads(16, exclude, 99);
    const auto b = sample_random_heads(16, exclude, 99);
    EXPECT_EQ(a.heads(), b.heads());
    EXPECT_EQ(a.label(), HeadSetLabel::random_control);
    for (auto h : a.heads()) EXPECT_FALSE(exclude.contains(h));
    EXPECT_NE(sample_random_heads(16, exclude, 100).heads(), a.heads());
    EXPECT_EQ(sample_random_heads(136, exclude, 5).k(), 136u);
    EXPECT_THROW(sample_random_heads(137, exclude, 5), ArgumentError);
}

TEST(RandomHeads, RoughlyUniform) {
    std::map<HeadId, int> counts;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const auto drawn = sample_random_heads(9, HeadSet{}, seed);
        for (auto h : drawn.heads()) ++counts[h];
    }
    ASSERT_EQ(counts.size(), 144u);
    // Expected 125 per head; a binomial sd is about 10.8.
    for (const auto& [h, n] : counts) {
        EXPECT_GT(n, 70) << to_string(h);
        EXPECT_LT(n, 180) << to_string(h);
    }
}
