#include "negascope/model.hpp"

#include "negascope/errors.hpp"
#include "negascope/hash.hpp"
#include "negascope/safetensors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace negascope {

// ---------------------------------------------------------------------------
// Configuration and loading

ModelConfig ModelConfig::from_hf_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open model config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    ModelConfig c;
    c.n_layers = j.value("n_layer", c.n_layers);
    c.n_heads = j.value("n_head", c.n_heads);
    c.d_model = j.value("n_embd", c.d_model);
    c.n_ctx = j.value("n_positions", j.value("n_ctx", c.n_ctx));
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.layer_norm_eps = j.value("layer_norm_epsilon", c.layer_norm_eps);
    c.d_mlp = (j.contains("n_inner") && j["n_inner"].is_number_integer())
                  ? j["n_inner"].get<int>()
                  : 4 * c.d_model;
    c.d_head = c.n_heads > 0 ? c.d_model / c.n_heads : 0;
    c.validate();
    return c;
}

void ModelConfig::validate() const {
    if (n_layers <= 0 || n_heads <= 0 || d_model <= 0 || d_head <= 0 || d_mlp <= 0 ||
        n_ctx <= 0 || vocab_size <= 0 || !(layer_norm_eps > 0.0f)) {
        throw ArgumentError("model config dimensions must be positive");
    }
    if (d_model != n_heads * d_head) {
        throw ArgumentError("model config requires d_model == n_heads * d_head");
    }
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = token_embedding.data.size() + position_embedding.data.size() +
                    final_gain.size() + final_bias.size();
    for (const auto& l : layers) {
        n += l.ln1_gain.size() + l.ln1_bias.size() + l.qkv_weight.data.size() +
             l.qkv_bias.size() + l.out_weight.data.size() + l.out_bias.size() +
             l.ln2_gain.size() + l.ln2_bias.size() + l.fc_weight.data.size() + l.fc_bias.size() +
             l.proj_weight.data.size() + l.proj_bias.size();
    }
    return n;
}

std::vector<std::string> expected_tensor_names(const ModelConfig& c) {
    std::vector<std::string> names = {"wte.weight", "wpe.weight"};
    for (int i = 0; i < c.n_layers; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        for (const char* s : {"ln_1.weight", "ln_1.bias", "attn.c_attn.weight", "attn.c_attn.bias",
                              "attn.c_proj.weight", "attn.c_proj.bias", "ln_2.weight", "ln_2.bias",
                              "mlp.c_fc.weight", "mlp.c_fc.bias", "mlp.c_proj.weight",
                              "mlp.c_proj.bias"}) {
            names.push_back(p + s);
        }
    }
    names.emplace_back("ln_f.weight");
    names.emplace_back("ln_f.bias");
    return names;
}

namespace {

class TensorReader {
public:
    TensorReader(SafetensorsFile& file, std::string prefix)
        : file_(file), prefix_(std::move(prefix)) {}

    std::vector<float> vec(const std::string& name, std::int64_t n) {
        return read(name, {n});
    }

    Matrix mat(const std::string& name, std::int64_t rows, std::int64_t cols) {
        Matrix m;
        m.rows = static_cast<std::size_t>(rows);
        m.cols = static_cast<std::size_t>(cols);
        m.data = read(name, {rows, cols});
        return m;
    }

private:
    std::vector<float> read(const std::string& name, std::vector<std::int64_t> shape) {
        const std::string full = prefix_ + name;
        if (!file_.contains(full)) {
            throw IntegrityError("checkpoint is missing tensor '" + name + "'");
        }
        const auto& info = file_.info(full);
        if (info.shape != shape) {
            auto fmt = [](const std::vector<std::int64_t>& s) {
                std::string out = "[";
                for (std::size_t i = 0; i < s.size(); ++i) {
                    out += (i ? ", " : "") + std::to_string(s[i]);
                }
                return out + "]";
            };
            throw ShapeError("tensor '" + name + "' has shape " + fmt(info.shape) +
                             ", expected " + fmt(shape));
        }
        return file_.read_f32(full);
    }

    SafetensorsFile& file_;
    std::string prefix_;
};

} // namespace

ModelWeights load_weights(const std::filesystem::path& weights_file, const ModelConfig& config) {
    config.validate();
    SafetensorsFile file(weights_file);
    const std::string prefix =
        (!file.contains("wte.weight") && file.contains("transformer.wte.weight")) ? "transformer."
                                                                                   : "";
    TensorReader r(file, prefix);

    const std::int64_t d = config.d_model;
    ModelWeights w;
    w.config = config;
    w.token_embedding = r.mat("wte.weight", config.vocab_size, d);
    w.position_embedding = r.mat("wpe.weight", config.n_ctx, d);
    w.layers.resize(static_cast<std::size_t>(config.n_layers));
    for (int i = 0; i < config.n_layers; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        auto& l = w.layers[static_cast<std::size_t>(i)];
        l.ln1_gain = r.vec(p + "ln_1.weight", d);
        l.ln1_bias = r.vec(p + "ln_1.bias", d);
        l.qkv_weight = r.mat(p + "attn.c_attn.weight", d, 3 * d);
        l.qkv_bias = r.vec(p + "attn.c_attn.bias", 3 * d);
        l.out_weight = r.mat(p + "attn.c_proj.weight", d, d);
        l.out_bias = r.vec(p + "attn.c_proj.bias", d);
        l.ln2_gain = r.vec(p + "ln_2.weight", d);
        l.ln2_bias = r.vec(p + "ln_2.bias", d);
        l.fc_weight = r.mat(p + "mlp.c_fc.weight", d, config.d_mlp);
        l.fc_bias = r.vec(p + "mlp.c_fc.bias", config.d_mlp);
        l.proj_weight = r.mat(p + "mlp.c_proj.weight", config.d_mlp, d);
        l.proj_bias = r.vec(p + "mlp.c_proj.bias", d);
    }
    w.final_gain = r.vec("ln_f.weight", d);
    w.final_bias = r.vec("ln_f.bias", d);
    w.checkpoint_sha256 = sha256_file(weights_file);
    return w;
}

std::string to_string(const HookSite& site) {
    std::string s = "L" + std::to_string(site.layer);
    if (site.kind == SiteKind::attn_head_slice) {
        s += "H" + std::to_string(site.head);
    } else {
        s += ".attn_out";
    }
    return s + "@" + std::to_string(site.position);
}

// ---------------------------------------------------------------------------
// Numerical kernels. Every reduction runs in a fixed order so repeated runs
// are bitwise identical and each row's result is independent of its batch.

namespace {

float dot(const float* a, const float* b, std::size_t n) {
    float acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
    }
    float tail = 0.0f;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) +
           tail;
}

// out = in * W + bias, with W input-major. out[r][j] accumulates over i in
// ascending order.
Matrix linear(const Matrix& in, const Matrix& weight, const std::vector<float>& bias) {
    Matrix out(in.rows, weight.cols);
    for (std::size_t r = 0; r < in.rows; ++r) {
        std::copy(bias.begin(), bias.end(), out.row(r).begin());
    }
    constexpr std::size_t kBlock = 64;
    const std::size_t n = weight.cols;
    for (std::size_t i0 = 0; i0 < weight.rows; i0 += kBlock) {
        const std::size_t i1 = std::min(weight.rows, i0 + kBlock);
        for (std::size_t r = 0; r < in.rows; ++r) {
            float* __restrict o = out.row(r).data();
            const float* a = in.row(r).data();
            for (std::size_t i = i0; i < i1; ++i) {
                const float ai = a[i];
                const float* __restrict wi = weight.data.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) o[j] += ai * wi[j];
            }
        }
    }
    return out;
}

void layer_norm_row(std::span<const float> x, const std::vector<float>& gain,
                    const std::vector<float>& bias, float eps, std::span<float> out) {
    const std::size_t n = x.size();
    float mean = 0.0f;
    for (float v : x) mean += v;
    mean /= static_cast<float>(n);
    float var = 0.0f;
    for (float v : x) {
        const float d = v - mean;
        var += d * d;
    }
    var /= static_cast<float>(n);
    const float inv = 1.0f / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
    }
}

Matrix layer_norm(const Matrix& x, const std::vector<float>& gain, const std::vector<float>& bias,
                  float eps) {
    Matrix out(x.rows, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        layer_norm_row(x.row(r), gain, bias, eps, out.row(r));
    }
    return out;
}

float gelu(float x) {
    constexpr float kSqrt2OverPi = 0.7978845608028654f;
    return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x)));
}

// Validated, per-layer view of a list of edits. Later edits of the same site
// replace earlier ones.
struct EditPlan {
    struct LayerEdits {
        std::map<std::pair<int, int>, const std::vector<float>*> heads;  // (position, head)
        std::map<int, const std::vector<float>*> outs;                   // position
    };
    std::vector<LayerEdits> layers;
    int min_layer = std::numeric_limits<int>::max();
    int min_position = std::numeric_limits<int>::max();

    bool empty() const { return min_layer == std::numeric_limits<int>::max(); }
};

void check_site(const ModelConfig& c, const HookSite& s, std::size_t seq_len) {
    if (s.layer < 0 || s.layer >= c.n_layers) {
        throw RangeError("site " + to_string(s) + ": layer outside 0.." +
                         std::to_string(c.n_layers - 1));
    }
    if (s.kind == SiteKind::attn_head_slice) {
        if (s.head < 0 || s.head >= c.n_heads) {
            throw RangeError("site " + to_string(s) + ": head outside 0.." +
                             std::to_string(c.n_heads - 1));
        }
    } else if (s.head != -1) {
        throw ArgumentError("site " + to_string(s) + ": attn_out sites carry no head index");
    }
    if (s.position < 0 || static_cast<std::size_t>(s.position) >= seq_len) {
        throw RangeError("site " + to_string(s) + ": position outside sequence of length " +
                         std::to_string(seq_len));
    }
}

std::size_t site_width(const ModelConfig& c, const HookSite& s) {
    return static_cast<std::size_t>(s.kind == SiteKind::attn_out ? c.d_model : c.d_head);
}

EditPlan plan_edits(const ModelConfig& c, std::span<const InterventionSpec> edits,
                    std::size_t seq_len) {
    EditPlan plan;
    plan.layers.resize(static_cast<std::size_t>(c.n_layers));
    struct Mix {
        bool out = false;
        bool head = false;
        bool all_self = true;
    };
    std::map<std::pair<int, int>, Mix> mix;  // (layer, position)
    for (const auto& e : edits) {
        check_site(c, e.site, seq_len);
        if (e.value.size() != site_width(c, e.site)) {
            throw ShapeError("edit at " + to_string(e.site) + " carries " +
                             std::to_string(e.value.size()) + " values, expected " +
                             std::to_string(site_width(c, e.site)));
        }
        auto& m = mix[{e.site.layer, e.site.position}];
        (e.site.kind == SiteKind::attn_out ? m.out : m.head) = true;
        m.all_self = m.all_self && e.payload == PayloadKind::self_cache;
        if (m.out && m.head && !m.all_self) {
            throw ConflictError("attn_out and head-slice edits both target layer " +
                                std::to_string(e.site.layer) + " position " +
                                std::to_string(e.site.position));
        }
        auto& le = plan.layers[static_cast<std::size_t>(e.site.layer)];
        if (e.site.kind == SiteKind::attn_out) {
            le.outs[e.site.position] = &e.value;
        } else {
            le.heads[{e.site.position, e.site.head}] = &e.value;
        }
        plan.min_layer = std::min(plan.min_layer, e.site.layer);
        plan.min_position = std::min(plan.min_position, e.site.position);
    }
    return plan;
}

struct CaptureIndex {
    std::vector<std::vector<HookSite>> per_layer;
};

CaptureIndex index_captures(const ModelConfig& c, std::span<const HookSite> capture,
                            std::size_t seq_len) {
    CaptureIndex idx;
    idx.per_layer.resize(static_cast<std::size_t>(c.n_layers));
    for (const auto& s : capture) {
        check_site(c, s, seq_len);
        idx.per_layer[static_cast<std::size_t>(s.layer)].push_back(s);
    }
    return idx;
}

struct RunRequest {
    std::span<const TokenId> tokens;
    std::size_t first_row = 0;  // rows below this come from `prior`
    int first_layer = 0;
    Matrix residual;            // residual entering first_layer, rows [first_row, T)
    const std::vector<Matrix>* prior_keys = nullptr;
    const std::vector<Matrix>* prior_values = nullptr;
    const EditPlan* plan = nullptr;
    const CaptureIndex* captures = nullptr;
    RowRange rows;
};

// Runs the transformer stack on rows [first_row, T). When `record` is set the
// residual stream and keys/values of every layer are stored in it.
ForwardResult run_stack(const ModelWeights& w, RunRequest req, std::vector<Matrix>* record_resid,
                        std::vector<Matrix>* record_keys, std::vector<Matrix>* record_values) {
    const ModelConfig& c = w.config;
    const std::size_t seq_len = req.tokens.size();
    const std::size_t p0 = req.first_row;
    const std::size_t local = seq_len - p0;
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto dh = static_cast<std::size_t>(c.d_head);
    const float scale = 1.0f / std::sqrt(static_cast<float>(c.d_head));

    ForwardResult result;
    Matrix x = std::move(req.residual);
    std::vector<float> scores(seq_len);

    for (int layer = req.first_layer; layer < c.n_layers; ++layer) {
        const auto li = static_cast<std::size_t>(layer);
        const LayerWeights& lw = w.layers[li];
        if (record_resid) (*record_resid)[li] = x;

        const Matrix h = layer_norm(x, lw.ln1_gain, lw.ln1_bias, c.layer_norm_eps);
        const Matrix qkv = linear(h, lw.qkv_weight, lw.qkv_bias);

        Matrix keys(seq_len, d);
        Matrix values(seq_len, d);
        if (p0 > 0) {
            const Matrix& pk = (*req.prior_keys)[li];
            const Matrix& pv = (*req.prior_values)[li];
            std::copy_n(pk.data.begin(), p0 * d, keys.data.begin());
            std::copy_n(pv.data.begin(), p0 * d, values.data.begin());
        }
        for (std::size_t r = 0; r < local; ++r) {
            const auto src = qkv.row(r);
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(d), d, keys.row(p0 + r).begin());
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(2 * d), d,
                        values.row(p0 + r).begin());
        }
        if (record_keys) {
            (*record_keys)[li] = keys;
            (*record_values)[li] = values;
        }

        // z: per-head post-softmax weighted values, concatenated.
        Matrix z(local, d);
        for (std::size_t r = 0; r < local; ++r) {
            const std::size_t t = p0 + r;
            const float* q = qkv.row(r).data();
            for (std::size_t head = 0; head < static_cast<std::size_t>(c.n_heads); ++head) {
                const std::size_t off = head * dh;
                float max_score = -std::numeric_limits<float>::infinity();
                for (std::size_t u = 0; u <= t; ++u) {
                    scores[u] = dot(q + off, keys.row(u).data() + off, dh) * scale;
                    max_score = std::max(max_score, scores[u]);
                }
                float denom = 0.0f;
                for (std::size_t u = 0; u <= t; ++u) {
                    scores[u] = std::exp(scores[u] - max_score);
                    denom += scores[u];
                }
                float* zo = z.row(r).data() + off;
                for (std::size_t u = 0; u <= t; ++u) {
                    const float p = scores[u] / denom;
                    const float* vu = values.row(u).data() + off;
                    for (std::size_t k = 0; k < dh; ++k) zo[k] += p * vu[k];
                }
            }
        }

        const auto& le = req.plan->layers[li];
        for (const auto& [key, value] : le.heads) {
            const auto [pos, head] = key;
            std::copy(value->begin(), value->end(),
                      z.row(static_cast<std::size_t>(pos) - p0).begin() +
                          static_cast<std::ptrdiff_t>(static_cast<std::size_t>(head) * dh));
        }

        Matrix attn = linear(z, lw.out_weight, lw.out_bias);
        for (const auto& [pos, value] : le.outs) {
            std::copy(value->begin(), value->end(),
                      attn.row(static_cast<std::size_t>(pos) - p0).begin());
        }

        for (const auto& site : req.captures->per_layer[li]) {
            const std::size_t r = static_cast<std::size_t>(site.position) - p0;
            if (site.kind == SiteKind::attn_out) {
                const auto row = attn.row(r);
                result.captured[site] = std::vector<float>(row.begin(), row.end());
            } else {
                const auto row = z.row(r);
                const auto b = row.begin() + static_cast<std::ptrdiff_t>(
                                                 static_cast<std::size_t>(site.head) * dh);
                result.captured[site] = std::vector<float>(b, b + static_cast<std::ptrdiff_t>(dh));
            }
        }

        for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += attn.data[i];

        const Matrix h2 = layer_norm(x, lw.ln2_gain, lw.ln2_bias, c.layer_norm_eps);
        Matrix f = linear(h2, lw.fc_weight, lw.fc_bias);
        for (float& v : f.data) v = gelu(v);
        const Matrix m = linear(f, lw.proj_weight, lw.proj_bias);
        for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += m.data[i];
    }
    if (record_resid) (*record_resid)[static_cast<std::size_t>(c.n_layers)] = x;

    const std::size_t row_begin = std::max(req.rows.begin, p0);
    const std::size_t row_end = std::min(req.rows.end, seq_len);
    result.first_logit_row = row_begin;
    const auto vocab = static_cast<std::size_t>(c.vocab_size);
    result.logits = Matrix(row_end > row_begin ? row_end - row_begin : 0, vocab);
    std::vector<float> normed(d);
    for (std::size_t t = row_begin; t < row_end; ++t) {
        layer_norm_row(x.row(t - p0), w.final_gain, w.final_bias, c.layer_norm_eps, normed);
        float* out = result.logits.row(t - row_begin).data();
        for (std::size_t v = 0; v < vocab; ++v) {
            out[v] = dot(normed.data(), w.token_embedding.row(v).data(), d);
        }
    }
    return result;
}

void check_tokens(const ModelConfig& c, std::span<const TokenId> tokens) {
    if (tokens.empty()) {
        throw ArgumentError("forward pass needs at least one token");
    }
    if (tokens.size() > static_cast<std::size_t>(c.n_ctx)) {
        throw RangeError("sequence of " + std::to_string(tokens.size()) +
                         " tokens exceeds context of " + std::to_string(c.n_ctx));
    }
    for (TokenId t : tokens) {
        if (t < 0 || t >= c.vocab_size) {
            throw RangeError("token id " + std::to_string(t) + " outside vocabulary");
        }
    }
}

Matrix embed(const ModelWeights& w, std::span<const TokenId> tokens) {
    const auto d = static_cast<std::size_t>(w.config.d_model);
    Matrix x(tokens.size(), d);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto te = w.token_embedding.row(static_cast<std::size_t>(tokens[t]));
        const auto pe = w.position_embedding.row(t);
        auto out = x.row(t);
        for (std::size_t i = 0; i < d; ++i) out[i] = te[i] + pe[i];
    }
    return x;
}

} // namespace

ForwardResult forward(const ModelWeights& w, std::span<const TokenId> tokens,
                      std::span<const HookSite> capture, std::span<const InterventionSpec> edits,
                      RowRange rows) {
    check_tokens(w.config, tokens);
    const EditPlan plan = plan_edits(w.config, edits, tokens.size());
    const CaptureIndex captures = index_captures(w.config, capture, tokens.size());
    RunRequest req;
    req.tokens = tokens;
    req.residual = embed(w, tokens);
    req.plan = &plan;
    req.captures = &captures;
    req.rows = rows;
    return run_stack(w, std::move(req), nullptr, nullptr, nullptr);
}

PassState record_pass(const ModelWeights& w, std::span<const TokenId> tokens) {
    check_tokens(w.config, tokens);
    const EditPlan plan = plan_edits(w.config, {}, tokens.size());
    const CaptureIndex captures = index_captures(w.config, {}, tokens.size());
    PassState state;
    state.tokens_.assign(tokens.begin(), tokens.end());
    const auto n_layers = static_cast<std::size_t>(w.config.n_layers);
    state.residual_in_.resize(n_layers + 1);
    state.keys_.resize(n_layers);
    state.values_.resize(n_layers);
    RunRequest req;
    req.tokens = tokens;
    req.residual = embed(w, tokens);
    req.plan = &plan;
    req.captures = &captures;
    req.rows = {0, 0};
    run_stack(w, std::move(req), &state.residual_in_, &state.keys_, &state.values_);
    return state;
}

ForwardResult forward_edited(const ModelWeights& w, const PassState& state,
                             std::span<const HookSite> capture,
                             std::span<const InterventionSpec> edits, RowRange rows) {
    const auto tokens = state.tokens();
    const std::size_t seq_len = tokens.size();
    if (seq_len == 0 || state.residual_in_.size() != static_cast<std::size_t>(w.config.n_layers) + 1) {
        throw ArgumentError("pass state was not recorded for this model");
    }
    const EditPlan plan = plan_edits(w.config, edits, seq_len);
    const CaptureIndex captures = index_captures(w.config, capture, seq_len);

    std::size_t p0 = plan.empty() ? seq_len : static_cast<std::size_t>(plan.min_position);
    int l0 = plan.empty() ? w.config.n_layers : plan.min_layer;
    for (const auto& s : capture) {
        p0 = std::min(p0, static_cast<std::size_t>(s.position));
        l0 = std::min(l0, s.layer);
    }
    p0 = std::min(p0, std::min(rows.begin, seq_len));
    if (p0 >= seq_len) {
        // Nothing to materialise.
        ForwardResult empty;
        empty.first_logit_row = seq_len;
        empty.logits = Matrix(0, static_cast<std::size_t>(w.config.vocab_size));
        return empty;
    }

    const auto d = static_cast<std::size_t>(w.config.d_model);
    const Matrix& start = state.residual_in_[static_cast<std::size_t>(l0)];
    RunRequest req;
    req.tokens = tokens;
    req.first_row = p0;
    req.first_layer = l0;
    req.residual = Matrix(seq_len - p0, d);
    std::copy(start.data.begin() + static_cast<std::ptrdiff_t>(p0 * d), start.data.end(),
              req.residual.data.begin());
    req.prior_keys = &state.keys_;
    req.prior_values = &state.values_;
    req.plan = &plan;
    req.captures = &captures;
    req.rows = rows;
    return run_stack(w, std::move(req), nullptr, nullptr, nullptr);
}

double log_softmax_at(std::span<const float> row, std::size_t index) {
    float max_v = -std::numeric_limits<float>::infinity();
    for (float v : row) max_v = std::max(max_v, v);
    double sum = 0.0;
    for (float v : row) sum += std::exp(static_cast<double>(v) - max_v);
    return static_cast<double>(row[index]) - max_v - std::log(sum);
}

double target_logprob(const ForwardResult& result, std::size_t prefix_len,
                      std::span<const TokenId> target) {
    double total = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        const std::size_t row = prefix_len - 1 + j;
        if (row < result.first_logit_row ||
            row >= result.first_logit_row + result.logits.rows) {
            throw ArgumentError("forward result lacks logits for target row " +
                                std::to_string(row));
        }
        total += log_softmax_at(result.logits.row(row - result.first_logit_row),
                                static_cast<std::size_t>(target[j]));
    }
    return total;
}

namespace {

std::vector<TokenId> concat_checked(const ModelWeights& w, std::span<const TokenId> prefix,
                                    std::span<const TokenId> target,
                                    std::span<const InterventionSpec> edits) {
    if (target.empty()) {
        throw ArgumentError("span_logprob needs a non-empty target");
    }
    if (prefix.empty()) {
        throw ArgumentError("span_logprob needs a non-empty prefix");
    }
    if (prefix.size() + target.size() > static_cast<std::size_t>(w.config.n_ctx)) {
        throw RangeError("prefix plus target exceed the model context");
    }
    for (const auto& e : edits) {
        if (e.site.position < 0 || static_cast<std::size_t>(e.site.position) >= prefix.size()) {
            throw RangeError("edit at " + to_string(e.site) + " is outside the prefix of length " +
                             std::to_string(prefix.size()));
        }
    }
    std::vector<TokenId> tokens(prefix.begin(), prefix.end());
    tokens.insert(tokens.end(), target.begin(), target.end());
    return tokens;
}

} // namespace

ScoredSpan score_span(const ModelWeights& w, std::span<const TokenId> prefix,
                      std::span<const TokenId> target, std::span<const HookSite> capture,
                      std::span<const InterventionSpec> edits) {
    const auto tokens = concat_checked(w, prefix, target, edits);
    const RowRange rows{prefix.size() - 1, tokens.size() - 1};
    ForwardResult r = forward(w, tokens, capture, edits, rows);
    ScoredSpan out;
    out.logprob = target_logprob(r, prefix.size(), target);
    out.captured = std::move(r.captured);
    return out;
}

double span_logprob(const ModelWeights& w, std::span<const TokenId> prefix,
                    std::span<const TokenId> target, std::span<const InterventionSpec> edits) {
    return score_span(w, prefix, target, {}, edits).logprob;
}

} // namespace negascope
