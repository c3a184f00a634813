#include "support.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

namespace negascope::testing {

std::filesystem::path data_dir() { return NEGASCOPE_TEST_DATA_DIR; }

const Vocabulary& gpt2_vocab() {
    static const Vocabulary vocab =
        load_vocab(data_dir() / "gpt2" / "vocab.json", data_dir() / "gpt2" / "merges.txt");
    return vocab;
}

ModelConfig tiny_config(int vocab_size) {
    ModelConfig c;
    c.n_layers = 12;
    c.n_heads = 12;
    c.d_head = 4;
    c.d_model = 48;
    c.d_mlp = 96;
    c.n_ctx = 64;
    c.vocab_size = vocab_size;
    return c;
}

std::map<std::string, TensorData> random_tensors(const ModelConfig& c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    auto tensor = [&](std::vector<std::int64_t> shape, float std, float mean = 0.0f) {
        TensorData t;
        t.shape = shape;
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        t.values.resize(static_cast<std::size_t>(n));
        for (auto& v : t.values) v = mean + std * normal(rng);
        return t;
    };
    const std::int64_t d = c.d_model, m = c.d_mlp;
    std::map<std::string, TensorData> t;
    t["wte.weight"] = tensor({c.vocab_size, d}, 0.5f);
    t["wpe.weight"] = tensor({c.n_ctx, d}, 0.3f);
    t["ln_f.weight"] = tensor({d}, 0.1f, 1.0f);
    t["ln_f.bias"] = tensor({d}, 0.05f);
    for (int i = 0; i < c.n_layers; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        t[p + "ln_1.weight"] = tensor({d}, 0.1f, 1.0f);
        t[p + "ln_1.bias"] = tensor({d}, 0.05f);
        t[p + "attn.c_attn.weight"] = tensor({d, 3 * d}, 0.3f);
        t[p + "attn.c_attn.bias"] = tensor({3 * d}, 0.05f);
        t[p + "attn.c_proj.weight"] = tensor({d, d}, 0.2f);
        t[p + "attn.c_proj.bias"] = tensor({d}, 0.05f);
        t[p + "ln_2.weight"] = tensor({d}, 0.1f, 1.0f);
        t[p + "ln_2.bias"] = tensor({d}, 0.05f);
        t[p + "mlp.c_fc.weight"] = tensor({d, m}, 0.2f);
        t[p + "mlp.c_fc.bias"] = tensor({m}, 0.05f);
        t[p + "mlp.c_proj.weight"] = tensor({m, d}, 0.15f);
        t[p + "mlp.c_proj.bias"] = tensor({d}, 0.05f);
    }
    return t;
}

std::filesystem::path write_checkpoint(const std::filesystem::path& dir, const ModelConfig& c,
                                       std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.safetensors";
    write_safetensors(path, random_tensors(c, seed), {{"format", "pt"}});
    nlohmann::json j{{"n_layer", c.n_layers}, {"n_head", c.n_heads}, {"n_embd", c.d_model},
                     {"n_inner", c.d_mlp}, {"n_positions", c.n_ctx}, {"vocab_size", c.vocab_size},
                     {"layer_norm_epsilon", c.layer_norm_eps}};
    write_file(dir / "config.json", j.dump(1));
    return path;
}

const ModelWeights& tiny_model() {
    static const ModelWeights w = [] {
        TempDir dir;
        const auto path = write_checkpoint(dir.path(), tiny_config(), 7);
        return load_weights(path, tiny_config());
    }();
    return w;
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("negascope-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace negascope::testing
