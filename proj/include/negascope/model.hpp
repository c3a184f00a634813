#pragma once

#include "negascope/tokenizer.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace negascope {

struct ModelConfig {
    int n_layers = 12;
    int n_heads = 12;
    int d_model = 768;
    int d_head = 64;
    int d_mlp = 3072;
    int n_ctx = 1024;
    int vocab_size = 50257;
    float layer_norm_eps = 1e-5f;

    static ModelConfig gpt2_small() { return {}; }

    /// Reads a Hugging Face style config.json (n_layer, n_head, n_embd, ...).
    static ModelConfig from_hf_json(const std::filesystem::path& path);

    /// Throws ArgumentError unless every dimension is positive and
    /// d_model == n_heads * d_head.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Row-major float32 matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

    std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    float& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    float at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct LayerWeights {
    std::vector<float> ln1_gain, ln1_bias;
    Matrix qkv_weight;  // [d_model x 3*d_model], input-major
    std::vector<float> qkv_bias;
    Matrix out_weight;  // W_O, [d_model x d_model]
    std::vector<float> out_bias;
    std::vector<float> ln2_gain, ln2_bias;
    Matrix fc_weight;   // [d_model x d_mlp]
    std::vector<float> fc_bias;
    Matrix proj_weight; // [d_mlp x d_model]
    std::vector<float> proj_bias;
};

/// Frozen GPT-2 parameters. The unembedding is tied to token_embedding.
struct ModelWeights {
    ModelConfig config;
    Matrix token_embedding;     // [vocab x d_model]
    Matrix position_embedding;  // [n_ctx x d_model]
    std::vector<LayerWeights> layers;
    std::vector<float> final_gain, final_bias;
    std::string checkpoint_sha256;

    std::size_t parameter_count() const;
};

/// Loads GPT-2 tensors from a safetensors checkpoint using the Hugging Face
/// naming scheme (`wte.weight`, `h.{i}.attn.c_attn.weight`, ...), with or
/// without a leading `transformer.` prefix.
ModelWeights load_weights(const std::filesystem::path& weights_file, const ModelConfig& config);

/// Tensor names load_weights requires, without any prefix.
std::vector<std::string> expected_tensor_names(const ModelConfig& config);

enum class SiteKind { attn_head_slice, attn_out };

/// A designated activation: a head's pre-W_O slice z (d_head) or the
/// post-W_O attention output (d_model), at one layer and token position.
struct HookSite {
    int layer = 0;
    SiteKind kind = SiteKind::attn_out;
    int head = -1;  // >= 0 iff kind == attn_head_slice
    int position = 0;

    static HookSite attn_out(int layer, int position) {
        return {layer, SiteKind::attn_out, -1, position};
    }
    static HookSite head_slice(int layer, int head, int position) {
        return {layer, SiteKind::attn_head_slice, head, position};
    }

    auto operator<=>(const HookSite&) const = default;
};

std::string to_string(const HookSite& site);

/// Where an edit's replacement vector came from.
enum class PayloadKind {
    cached,     // activation cached from another run (e.g. the affirmative prefix)
    zero,       // zero-ablation
    self_cache, // the edited run's own activation (null patch)
};

/// Replaces the activation at `site` with `value` during a forward pass.
struct InterventionSpec {
    HookSite site;
    PayloadKind payload = PayloadKind::cached;
    std::vector<float> value;
};

struct ForwardResult {
    Matrix logits;               // rows [first_logit_row, first_logit_row + logits.rows)
    std::size_t first_logit_row = 0;
    std::map<HookSite, std::vector<float>> captured;
};

/// Half-open range of positions whose logits are materialised.
struct RowRange {
    std::size_t begin = 0;
    std::size_t end = static_cast<std::size_t>(-1);  // clamped to the sequence length
};

/// Full GPT-2 forward pass with hook-site edits and captures.
///
/// Edits replace the designated activation before anything downstream reads
/// it; captures are taken after edits. Repeated edits of the same site resolve
/// last-writer-wins. An attn_out edit and a head-slice edit at the same
/// layer/position conflict (ConflictError) unless both are null self-patches.
ForwardResult forward(const ModelWeights& w, std::span<const TokenId> tokens,
                      std::span<const HookSite> capture = {},
                      std::span<const InterventionSpec> edits = {}, RowRange rows = {});

/// Residual-stream and key/value state of one unedited pass, used to rerun the
/// same tokens with edits while skipping work that edits cannot influence.
class PassState {
public:
    PassState() = default;

    std::size_t length() const noexcept { return tokens_.size(); }
    std::span<const TokenId> tokens() const noexcept { return tokens_; }

private:
    friend PassState record_pass(const ModelWeights&, std::span<const TokenId>);
    friend ForwardResult forward_edited(const ModelWeights&, const PassState&,
                                        std::span<const HookSite>,
                                        std::span<const InterventionSpec>, RowRange);

    std::vector<TokenId> tokens_;
    std::vector<Matrix> residual_in_;  // per layer, plus the final residual
    std::vector<Matrix> keys_;
    std::vector<Matrix> values_;
};

PassState record_pass(const ModelWeights& w, std::span<const TokenId> tokens);

/// Same result as forward(w, state.tokens(), capture, edits, rows), bit for
/// bit, but recomputes only positions >= the earliest edited position and
/// layers >= the earliest edited layer.
ForwardResult forward_edited(const ModelWeights& w, const PassState& state,
                             std::span<const HookSite> capture,
                             std::span<const InterventionSpec> edits, RowRange rows = {});

/// Log-probability (nats) of `target` after `prefix` with teacher forcing:
/// sum over j of log P(target_j | prefix, target_<j), from one forward pass
/// over the concatenation. Edits must address prefix positions.
double span_logprob(const ModelWeights& w, std::span<const TokenId> prefix,
                    std::span<const TokenId> target,
                    std::span<const InterventionSpec> edits = {});

/// span_logprob plus captures taken during the same pass.
struct ScoredSpan {
    double logprob = 0.0;
    std::map<HookSite, std::vector<float>> captured;
};

ScoredSpan score_span(const ModelWeights& w, std::span<const TokenId> prefix,
                      std::span<const TokenId> target, std::span<const HookSite> capture,
                      std::span<const InterventionSpec> edits);

/// Sum of target log-probabilities read from a result whose logits cover the
/// target rows of prefix ⊕ target.
double target_logprob(const ForwardResult& result, std::size_t prefix_len,
                      std::span<const TokenId> target);

/// log softmax(row)[index], reduced in double precision.
double log_softmax_at(std::span<const float> row, std::size_t index);

} // namespace negascope
