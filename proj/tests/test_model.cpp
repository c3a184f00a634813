#include "negascope/errors.hpp"
#include "negascope/model.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace negascope;
using negascope::testing::random_tensors;
using negascope::testing::TempDir;
using negascope::testing::tiny_config;

namespace {

// Straightforward double-precision GPT-2 written against the raw tensors, with
// the same two hook sites. Serves as the oracle for the optimised forward pass.
struct OracleEdit {
    HookSite site;
    std::vector<double> value;
};

struct Oracle {
    ModelConfig c;
    std::map<std::string, TensorData> t;

    const std::vector<float>& v(const std::string& name) const { return t.at(name).values; }

    static std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<float>& g,
                                          const std::vector<float>& b, double eps) {
        double mean = 0.0, var = 0.0;
        for (double a : x) mean += a;
        mean /= static_cast<double>(x.size());
        for (double a : x) var += (a - mean) * (a - mean);
        var /= static_cast<double>(x.size());
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            out[i] = (x[i] - mean) / std::sqrt(var + eps) * g[i] + b[i];
        }
        return out;
    }

    // y = x W + b with W stored input-major [in x out].
    static std::vector<double> linear(const std::vector<double>& x, const std::vector<float>& w,
                                      const std::vector<float>& b, std::size_t out) {
        std::vector<double> y(out);
        for (std::size_t j = 0; j < out; ++j) y[j] = b[j];
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = 0; j < out; ++j) y[j] += x[i] * w[i * out + j];
        }
        return y;
    }

    static double gelu(double x) {
        const double k = std::sqrt(2.0 / M_PI);
        return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
    }

    // Returns logits for every position; `z_out`/`attn_out` receive captures.
    std::vector<std::vector<double>> run(const std::vector<TokenId>& tokens,
                                         const std::vector<OracleEdit>& edits = {},
                                         std::map<HookSite, std::vector<double>>* captured = nullptr) const {
        const std::size_t n = tokens.size(), d = c.d_model, dh = c.d_head, H = c.n_heads;
        std::vector<std::vector<double>> x(n, std::vector<double>(d));
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t i = 0; i < d; ++i) {
                x[p][i] = v("wte.weight")[tokens[p] * d + i] + v("wpe.weight")[p * d + i];
            }
        }
        const double eps = c.layer_norm_eps;
        for (int L = 0; L < c.n_layers; ++L) {
            const std::string pre = "h." + std::to_string(L) + ".";
            std::vector<std::vector<double>> q(n), k(n), val(n);
            for (std::size_t p = 0; p < n; ++p) {
                const auto h = layer_norm(x[p], v(pre + "ln_1.weight"), v(pre + "ln_1.bias"), eps);
                const auto qkv = linear(h, v(pre + "attn.c_attn.weight"), v(pre + "attn.c_attn.bias"), 3 * d);
                q[p].assign(qkv.begin(), qkv.begin() + d);
                k[p].assign(qkv.begin() + d, qkv.begin() + 2 * d);
                val[p].assign(qkv.begin() + 2 * d, qkv.end());
            }
            std::vector<std::vector<double>> attn(n);
            for (std::size_t p = 0; p < n; ++p) {
                std::vector<double> z(d, 0.0);
                for (std::size_t hd = 0; hd < H; ++hd) {
                    std::vector<double> s(p + 1);
                    double mx = -1e300;
                    for (std::size_t j = 0; j <= p; ++j) {
                        double dot = 0.0;
                        for (std::size_t e = 0; e < dh; ++e) dot += q[p][hd * dh + e] * k[j][hd * dh + e];
                        s[j] = dot / std::sqrt(static_cast<double>(dh));
                        mx = std::max(mx, s[j]);
                    }
                    double sum = 0.0;
                    for (auto& a : s) sum += (a = std::exp(a - mx));
                    for (std::size_t j = 0; j <= p; ++j) {
                        for (std::size_t e = 0; e < dh; ++e) z[hd * dh + e] += s[j] / sum * val[j][hd * dh + e];
                    }
                    const auto site = HookSite::head_slice(L, static_cast<int>(hd), static_cast<int>(p));
                    for (const auto& ed : edits) {
                        if (ed.site == site) std::copy(ed.value.begin(), ed.value.end(), z.begin() + hd * dh);
                    }
                    if (captured) captured->insert_or_assign(site, std::vector<double>(z.begin() + hd * dh, z.begin() + (hd + 1) * dh));
                }
                attn[p] = linear(z, v(pre + "attn.c_proj.weight"), v(pre + "attn.c_proj.bias"), d);
                const auto site = HookSite::attn_out(L, static_cast<int>(p));
                for (const auto& ed : edits) {
                    if (ed.site == site) attn[p] = ed.value;
                }
                if (captured) captured->insert_or_assign(site, attn[p]);
            }
            for (std::size_t p = 0; p < n; ++p) {
                for (std::size_t i = 0; i < d; ++i) x[p][i] += attn[p][i];
                const auto h = layer_norm(x[p], v(pre + "ln_2.weight"), v(pre + "ln_2.bias"), eps);
                auto m = linear(h, v(pre + "mlp.c_fc.weight"), v(pre + "mlp.c_fc.bias"), c.d_mlp);
                for (auto& a : m) a = gelu(a);
                const auto o = linear(m, v(pre + "mlp.c_proj.weight"), v(pre + "mlp.c_proj.bias"), d);
                for (std::size_t i = 0; i < d; ++i) x[p][i] += o[i];
            }
        }
        std::vector<std::vector<double>> logits(n, std::vector<double>(c.vocab_size));
        for (std::size_t p = 0; p < n; ++p) {
            const auto h = layer_norm(x[p], v("ln_f.weight"), v("ln_f.bias"), eps);
            for (int tok = 0; tok < c.vocab_size; ++tok) {
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) dot += h[i] * v("wte.weight")[tok * d + i];
                logits[p][tok] = dot;
            }
        }
        return logits;
    }

    static double log_softmax(const std::vector<double>& row, std::size_t i) {
        double mx = -1e300;
        for (double a : row) mx = std::max(mx, a);
        double sum = 0.0;
        for (double a : row) sum += std::exp(a - mx);
        return row[i] - mx - std::log(sum);
    }
};

// The oracle is slow over 50k vocabulary rows, so it uses a small vocabulary.
constexpr int kSmallVocab = 300;

const Oracle& oracle() {
    static const Oracle o{tiny_config(kSmallVocab), random_tensors(tiny_config(kSmallVocab), 11)};
    return o;
}

const ModelWeights& small_model() {
    static const ModelWeights w = [] {
        TempDir dir;
        write_safetensors(dir / "m.safetensors", oracle().t);
        return load_weights(dir / "m.safetensors", tiny_config(kSmallVocab));
    }();
    return w;
}

double max_abs_diff(const Matrix& got, const std::vector<std::vector<double>>& want,
                    std::size_t first_row = 0) {
    double worst = 0.0;
    for (std::size_t r = 0; r < got.rows; ++r) {
        for (std::size_t j = 0; j < got.cols; ++j) {
            worst = std::max(worst, std::abs(got.at(r, j) - want[first_row + r][j]));
        }
    }
    return worst;
}

std::vector<float> ramp(std::size_t n, float scale) {
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = scale * (static_cast<float>(i % 7) - 3.0f);
    return v;
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

const std::vector<TokenId> kTokens{17, 250, 3, 99, 99, 120, 7};

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

} // namespace

TEST(ModelConfig, Validation) {
    EXPECT_NO_THROW(ModelConfig::gpt2_small().validate());
    auto c = ModelConfig::gpt2_small();
    c.d_head = 60;
    EXPECT_THROW(c.validate(), ArgumentError);
    c = ModelConfig::gpt2_small();
    c.n_layers = 0;
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(ModelConfig, ReadsHuggingFaceJson) {
    TempDir dir;
    negascope::testing::write_file(dir / "config.json",
        R"({"n_layer": 12, "n_head": 12, "n_embd": 768, "n_inner": null,
            "n_positions": 1024, "vocab_size": 50257, "layer_norm_epsilon": 1e-5})");
    EXPECT_EQ(ModelConfig::from_hf_json(dir / "config.json"), ModelConfig::gpt2_small());
}

TEST(LoadWeights, ParameterCountOfGpt2SmallShapes) {
    // Sum of the tensor element counts of the published 124M checkpoint.
    ModelWeights w;
    w.config = ModelConfig::gpt2_small();
    std::size_t expected = 50257 * 768 + 1024 * 768 + 2 * 768;
    expected += 12 * (4 * 768 + 768 * 2304 + 2304 + 768 * 768 + 768 + 768 * 3072 + 3072 +
                      3072 * 768 + 768);
    EXPECT_EQ(expected, 124439808u);
    const auto& tiny = small_model();
    std::size_t tiny_expected = 0;
    for (const auto& [name, t] : oracle().t) tiny_expected += t.values.size();
    EXPECT_EQ(tiny.parameter_count(), tiny_expected);
}

TEST(LoadWeights, RecordsFileHash) {
    TempDir dir;
    const auto path = negascope::testing::write_checkpoint(dir.path(), tiny_config(kSmallVocab), 3);
    const auto w = load_weights(path, tiny_config(kSmallVocab));
    EXPECT_EQ(w.checkpoint_sha256.size(), 64u);
}

TEST(LoadWeights, MissingFinalNormIsAnIntegrityError) {
    TempDir dir;
    auto t = oracle().t;
    t.erase("ln_f.weight");
    write_safetensors(dir / "m.safetensors", t);
    try {
        load_weights(dir / "m.safetensors", tiny_config(kSmallVocab));
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        EXPECT_NE(std::string(e.what()).find("ln_f.weight"), std::string::npos);
    }
}

TEST(LoadWeights, WrongShapeIsAShapeError) {
    TempDir dir;
    auto t = oracle().t;
    t["h.3.attn.c_proj.bias"].shape = {2, 24};
    write_safetensors(dir / "m.safetensors", t);
    EXPECT_THROW(load_weights(dir / "m.safetensors", tiny_config(kSmallVocab)), ShapeError);
}

TEST(LoadWeights, TruncatedFileIsAParseError) {
    TempDir dir;
    write_safetensors(dir / "m.safetensors", oracle().t);
    const auto bytes = negascope::testing::read_file(dir / "m.safetensors");
    negascope::testing::write_file(dir / "cut.safetensors", bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(load_weights(dir / "cut.safetensors", tiny_config(kSmallVocab)), ParseError);
    negascope::testing::write_file(dir / "tiny.safetensors", "abc");
    EXPECT_THROW(load_weights(dir / "tiny.safetensors", tiny_config(kSmallVocab)), ParseError);
}

TEST(LoadWeights, AcceptsTransformerPrefix) {
    TempDir dir;
    std::map<std::string, TensorData> prefixed;
    for (const auto& [name, t] : oracle().t) prefixed["transformer." + name] = t;
    write_safetensors(dir / "m.safetensors", prefixed);
    const auto w = load_weights(dir / "m.safetensors", tiny_config(kSmallVocab));
    EXPECT_TRUE(bitwise_equal(w.token_embedding, small_model().token_embedding));
}

TEST(LoadWeights, MissingFileIsAnIoError) {
    EXPECT_THROW(load_weights("/nonexistent/model.safetensors", tiny_config()), IoError);
}

TEST(Forward, MatchesDoublePrecisionOracle) {
    const auto want = oracle().run(kTokens);
    const auto got = forward(small_model(), kTokens);
    ASSERT_EQ(got.logits.rows, kTokens.size());
    ASSERT_EQ(got.logits.cols, static_cast<std::size_t>(kSmallVocab));
    EXPECT_LT(max_abs_diff(got.logits, want), 1e-4);
}

TEST(Forward, SingleTokenMatchesOracle) {
    const std::vector<TokenId> one{42};
    EXPECT_LT(max_abs_diff(forward(small_model(), one).logits, oracle().run(one)), 1e-4);
}

TEST(Forward, RowRangeSelectsLogitRows) {
    const auto want = oracle().run(kTokens);
    const auto got = forward(small_model(), kTokens, {}, {}, {4, 6});
    EXPECT_EQ(got.first_logit_row, 4u);
    EXPECT_EQ(got.logits.rows, 2u);
    EXPECT_LT(max_abs_diff(got.logits, want, 4), 1e-4);
}

TEST(Forward, CapturesMatchOracle) {
    std::map<HookSite, std::vector<double>> want;
    oracle().run(kTokens, {}, &want);
    const std::vector<HookSite> sites{HookSite::head_slice(0, 0, 0), HookSite::head_slice(5, 11, 6),
                                      HookSite::attn_out(4, 3), HookSite::attn_out(11, 6)};
    const auto got = forward(small_model(), kTokens, sites);
    ASSERT_EQ(got.captured.size(), sites.size());
    for (const auto& s : sites) {
        const auto& g = got.captured.at(s);
        const auto& w = want.at(s);
        ASSERT_EQ(g.size(), w.size()) << to_string(s);
        for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], w[i], 1e-5) << to_string(s);
    }
}

TEST(Forward, HeadSliceEditMatchesOracle) {
    const auto value = ramp(4, 0.3f);
    const auto site = HookSite::head_slice(3, 7, 5);
    const std::vector<InterventionSpec> edits{{site, PayloadKind::cached, value}};
    const auto got = forward(small_model(), kTokens, std::vector<HookSite>{site}, edits);
    const auto want = oracle().run(kTokens, {{site, widen(value)}});
    EXPECT_LT(max_abs_diff(got.logits, want), 1e-4);
    EXPECT_EQ(got.captured.at(site), value);
    // Rows before the edited position are untouched.
    const auto plain = forward(small_model(), kTokens);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t j = 0; j < plain.logits.cols; ++j) {
            EXPECT_EQ(got.logits.at(r, j), plain.logits.at(r, j));
        }
    }
}

TEST(Forward, AttnOutEditMatchesOracle) {
    const auto value = ramp(48, 0.1f);
    const auto site = HookSite::attn_out(6, 2);
    const std::vector<InterventionSpec> edits{{site, PayloadKind::cached, value}};
    const auto got = forward(small_model(), kTokens, std::vector<HookSite>{site}, edits);
    const auto want = oracle().run(kTokens, {{site, widen(value)}});
    EXPECT_LT(max_abs_diff(got.logits, want), 1e-4);
    EXPECT_EQ(got.captured.at(site), value);
}

TEST(Forward, LastWriterWins) {
    const auto site = HookSite::head_slice(2, 2, 3);
    const auto first = ramp(4, 1.0f), second = ramp(4, -0.2f);
    const std::vector<InterventionSpec> both{{site, PayloadKind::cached, first},
                                             {site, PayloadKind::zero, std::vector<float>(4, 0.0f)},
                                             {site, PayloadKind::cached, second}};
    const std::vector<InterventionSpec> last{{site, PayloadKind::cached, second}};
    EXPECT_TRUE(bitwise_equal(forward(small_model(), kTokens, {}, both).logits,
                              forward(small_model(), kTokens, {}, last).logits));
}

TEST(Forward, AttnOutAndHeadEditsAtOneSiteConflict) {
    const std::vector<InterventionSpec> edits{
        {HookSite::attn_out(4, 2), PayloadKind::cached, std::vector<float>(48, 0.0f)},
        {HookSite::head_slice(4, 1, 2), PayloadKind::zero, std::vector<float>(4, 0.0f)}};
    EXPECT_THROW(forward(small_model(), kTokens, {}, edits), ConflictError);
    // Different positions or layers do not conflict.
    const std::vector<InterventionSpec> apart{
        {HookSite::attn_out(4, 2), PayloadKind::cached, std::vector<float>(48, 0.0f)},
        {HookSite::head_slice(4, 1, 3), PayloadKind::zero, std::vector<float>(4, 0.0f)},
        {HookSite::head_slice(5, 1, 2), PayloadKind::zero, std::vector<float>(4, 0.0f)}};
    EXPECT_NO_THROW(forward(small_model(), kTokens, {}, apart));
}

TEST(Forward, SelfCacheEditsDoNotConflict) {
    const std::vector<HookSite> sites{HookSite::attn_out(4, 6), HookSite::head_slice(4, 1, 6)};
    const auto plain = forward(small_model(), kTokens, sites);
    const std::vector<InterventionSpec> edits{
        {sites[0], PayloadKind::self_cache, plain.captured.at(sites[0])},
        {sites[1], PayloadKind::self_cache, plain.captured.at(sites[1])}};
    EXPECT_NO_THROW(forward(small_model(), kTokens, {}, edits));
}

TEST(Forward, InvalidSitesAndInputs) {
    auto edit = [](HookSite s, std::size_t n) {
        return std::vector<InterventionSpec>{{s, PayloadKind::zero, std::vector<float>(n, 0.0f)}};
    };
    EXPECT_THROW(forward(small_model(), kTokens, {}, edit(HookSite::attn_out(12, 0), 48)), RangeError);
    EXPECT_THROW(forward(small_model(), kTokens, {}, edit(HookSite::attn_out(0, 7), 48)), RangeError);
    EXPECT_THROW(forward(small_model(), kTokens, {}, edit(HookSite::head_slice(0, 12, 0), 4)), RangeError);
    EXPECT_THROW(forward(small_model(), kTokens, {}, edit(HookSite::head_slice(0, 0, 0), 5)), ShapeError);
    const std::vector<HookSite> bad_capture{HookSite::attn_out(0, 9)};
    EXPECT_THROW(forward(small_model(), kTokens, bad_capture), RangeError);
    EXPECT_THROW(forward(small_model(), std::vector<TokenId>{}), ArgumentError);
    EXPECT_THROW(forward(small_model(), std::vector<TokenId>{kSmallVocab}), RangeError);
    EXPECT_THROW(forward(small_model(), std::vector<TokenId>(65, 1)), RangeError);
}

TEST(Forward, IsCausal) {
    auto changed = kTokens;
    changed[4] = 1;
    const auto a = forward(small_model(), kTokens), b = forward(small_model(), changed);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t j = 0; j < a.logits.cols; ++j) EXPECT_EQ(a.logits.at(r, j), b.logits.at(r, j));
    }
}

TEST(Forward, IsDeterministic) {
    const auto sites = std::vector<HookSite>{HookSite::attn_out(5, 6), HookSite::head_slice(5, 3, 6)};
    const auto a = forward(small_model(), kTokens, sites), b = forward(small_model(), kTokens, sites);
    EXPECT_TRUE(bitwise_equal(a.logits, b.logits));
    EXPECT_EQ(a.captured, b.captured);
}

TEST(LogSoftmax, NormalisesToOne) {
    const auto got = forward(small_model(), kTokens);
    for (std::size_t r = 0; r < got.logits.rows; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < got.logits.cols; ++j) {
            total += std::exp(log_softmax_at(got.logits.row(r), j));
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
    const std::vector<float> row{1.0f, 2.0f, 3.0f};
    EXPECT_NEAR(log_softmax_at(row, 2), 3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-12);
}

TEST(SpanLogprob, EqualsStepwiseOracle) {
    const std::vector<TokenId> prefix{17, 250, 3}, target{99, 120, 7};
    // Oracle: score each target token from a separate pass over the tokens before it.
    double want = 0.0;
    std::vector<TokenId> context = prefix;
    for (TokenId t : target) {
        const auto logits = oracle().run(context);
        want += Oracle::log_softmax(logits.back(), static_cast<std::size_t>(t));
        context.push_back(t);
    }
    EXPECT_NEAR(span_logprob(small_model(), prefix, target), want, 1e-4);
}

TEST(SpanLogprob, SingleTokenTarget) {
    const std::vector<TokenId> prefix{5, 6}, target{7};
    const auto logits = oracle().run(prefix);
    EXPECT_NEAR(span_logprob(small_model(), prefix, target),
                Oracle::log_softmax(logits.back(), 7), 1e-5);
}

TEST(SpanLogprob, EditsOutsidePrefixAreRejected) {
    const std::vector<TokenId> prefix{5, 6}, target{7, 8};
    const std::vector<InterventionSpec> edits{
        {HookSite::attn_out(0, 2), PayloadKind::zero, std::vector<float>(48, 0.0f)}};
    EXPECT_THROW(span_logprob(small_model(), prefix, target, edits), RangeError);
    EXPECT_THROW(span_logprob(small_model(), prefix, std::vector<TokenId>{}), ArgumentError);
    EXPECT_THROW(span_logprob(small_model(), std::vector<TokenId>{}, target), ArgumentError);
}

TEST(SpanLogprob, ScoreSpanAgreesAndCaptures) {
    const std::vector<TokenId> prefix{17, 250, 3}, target{99, 120};
    const std::vector<HookSite> sites{HookSite::attn_out(2, 2)};
    const auto scored = score_span(small_model(), prefix, target, sites, {});
    EXPECT_EQ(scored.logprob, span_logprob(small_model(), prefix, target));
    EXPECT_EQ(scored.captured.size(), 1u);
}

TEST(PassState, IncrementalPassIsBitwiseIdentical) {
    const auto& w = small_model();
    const auto state = record_pass(w, kTokens);
    const std::vector<HookSite> sites{HookSite::attn_out(3, 6), HookSite::head_slice(9, 9, 4)};
    const std::vector<std::vector<InterventionSpec>> cases{
        {},
        {{HookSite::head_slice(5, 11, 6), PayloadKind::zero, std::vector<float>(4, 0.0f)}},
        {{HookSite::attn_out(0, 0), PayloadKind::cached, ramp(48, 0.05f)}},
        {{HookSite::head_slice(7, 0, 3), PayloadKind::cached, ramp(4, 0.5f)},
         {HookSite::attn_out(2, 5), PayloadKind::cached, ramp(48, -0.05f)}},
    };
    for (const auto& edits : cases) {
        for (RowRange rows : {RowRange{}, RowRange{5, 7}}) {
            const auto full = forward(w, kTokens, sites, edits, rows);
            const auto fast = forward_edited(w, state, sites, edits, rows);
            EXPECT_EQ(full.first_logit_row, fast.first_logit_row);
            EXPECT_TRUE(bitwise_equal(full.logits, fast.logits)) << edits.size();
            EXPECT_EQ(full.captured, fast.captured);
        }
    }
}

TEST(PassState, RejectsUnrecordedState) {
    EXPECT_THROW(forward_edited(small_model(), PassState{}, {}, {}), ArgumentError);
}
