#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace negascope {

struct TensorInfo {
    std::string dtype;  // "F32", "F16" or "BF16" are readable
    std::vector<std::int64_t> shape;
    std::uint64_t begin = 0;  // byte offsets relative to the data section
    std::uint64_t end = 0;

    std::int64_t numel() const;
};

/// Read-only view of a safetensors file: 8-byte little-endian header length,
/// a JSON header, then a flat data section.
class SafetensorsFile {
public:
    explicit SafetensorsFile(const std::filesystem::path& path);

    const std::map<std::string, TensorInfo>& tensors() const noexcept { return tensors_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
    bool contains(const std::string& name) const { return tensors_.contains(name); }
    const TensorInfo& info(const std::string& name) const;

    /// Reads a tensor and widens it to float32.
    std::vector<float> read_f32(const std::string& name);

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t data_offset_ = 0;
    std::map<std::string, TensorInfo> tensors_;
    std::map<std::string, std::string> metadata_;
};

struct TensorData {
    std::vector<std::int64_t> shape;
    std::vector<float> values;
};

/// Writes float32 tensors in safetensors layout (names sorted, tightly packed).
void write_safetensors(const std::filesystem::path& path,
                       const std::map<std::string, TensorData>& tensors,
                       const std::map<std::string, std::string>& metadata = {});

} // namespace negascope
