#pragma once

#include "negascope/model.hpp"
#include "negascope/safetensors.hpp"
#include "negascope/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace negascope::testing {

std::filesystem::path data_dir();

/// The bundled GPT-2 vocabulary, loaded once.
const Vocabulary& gpt2_vocab();

/// 12 layers x 12 heads like GPT-2 Small, but d_head 4 and a short context so
/// sweeps run in milliseconds.
ModelConfig tiny_config(int vocab_size = kGpt2VocabSize);

/// Random weights under HF tensor names, scaled so attention is not uniform.
std::map<std::string, TensorData> random_tensors(const ModelConfig& config, std::uint64_t seed);

/// Writes model.safetensors and config.json into `dir`; returns the checkpoint path.
std::filesystem::path write_checkpoint(const std::filesystem::path& dir, const ModelConfig& config,
                                       std::uint64_t seed);

/// A tiny random model loaded through the normal checkpoint path, cached per process.
const ModelWeights& tiny_model();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

} // namespace negascope::testing
