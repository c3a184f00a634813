#include "negascope/safetensors.hpp"

#include "negascope/errors.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>

namespace negascope {

namespace {

static_assert(std::endian::native == std::endian::little,
              "safetensors reader assumes a little-endian host");

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "F32") return 4;
    if (dtype == "F16" || dtype == "BF16") return 2;
    return 0;
}

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
    std::uint32_t exp = (h >> 10) & 0x1F;
    std::uint32_t mant = h & 0x3FF;
    std::uint32_t bits = 0;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            exp = 127 - 15 + 1;
            while ((mant & 0x400) == 0) {
                mant <<= 1;
                --exp;
            }
            mant &= 0x3FF;
            bits = sign | (exp << 23) | (mant << 13);
        }
    } else if (exp == 0x1F) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

} // namespace

std::int64_t TensorInfo::numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

SafetensorsFile::SafetensorsFile(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
    if (!in_) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    std::error_code ec;
    const auto file_size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw IoError("cannot stat checkpoint " + path.string());
    }
    std::uint64_t header_len = 0;
    if (file_size < 8 || !in_.read(reinterpret_cast<char*>(&header_len), 8)) {
        throw ParseError(path.string() + ": file too short for a safetensors header");
    }
    if (header_len > file_size - 8) {
        throw ParseError(path.string() + ": header length " + std::to_string(header_len) +
                         " exceeds file size");
    }
    std::string header(header_len, '\0');
    in_.read(header.data(), static_cast<std::streamsize>(header_len));
    data_offset_ = 8 + header_len;

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": bad header JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw ParseError(path.string() + ": header is not a JSON object");
    }
    const std::uint64_t data_size = file_size - data_offset_;
    for (const auto& [name, val] : j.items()) {
        if (name == "__metadata__") {
            if (val.is_object()) {
                for (const auto& [k, v] : val.items()) {
                    if (v.is_string()) metadata_[k] = v.get<std::string>();
                }
            }
            continue;
        }
        try {
            TensorInfo t;
            t.dtype = val.at("dtype").get<std::string>();
            t.shape = val.at("shape").get<std::vector<std::int64_t>>();
            const auto offs = val.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (offs.size() != 2 || offs[0] > offs[1]) {
                throw ParseError(path.string() + ": tensor '" + name + "' has bad data_offsets");
            }
            t.begin = offs[0];
            t.end = offs[1];
            if (t.end > data_size) {
                throw ParseError(path.string() + ": tensor '" + name +
                                 "' extends past end of file (truncated?)");
            }
            const auto width = dtype_size(t.dtype);
            if (width != 0 && static_cast<std::uint64_t>(t.numel()) * width != t.end - t.begin) {
                throw ParseError(path.string() + ": tensor '" + name +
                                 "' byte range does not match its shape");
            }
            tensors_.emplace(name, std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": tensor '" + name + "': " + e.what());
        }
    }
}

const TensorInfo& SafetensorsFile::info(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw IntegrityError(path_.string() + ": missing tensor '" + name + "'");
    }
    return it->second;
}

std::vector<float> SafetensorsFile::read_f32(const std::string& name) {
    const TensorInfo& t = info(name);
    const auto width = dtype_size(t.dtype);
    if (width == 0) {
        throw IntegrityError(path_.string() + ": tensor '" + name + "' has unsupported dtype " +
                             t.dtype);
    }
    const auto n = static_cast<std::size_t>(t.numel());
    std::vector<float> out(n);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(data_offset_ + t.begin));
    if (t.dtype == "F32") {
        in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n * 4));
    } else {
        std::vector<std::uint16_t> raw(n);
        in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = t.dtype == "F16"
                         ? half_to_float(raw[i])
                         : std::bit_cast<float>(static_cast<std::uint32_t>(raw[i]) << 16);
        }
    }
    if (!in_) {
        throw ParseError(path_.string() + ": short read for tensor '" + name + "'");
    }
    return out;
}

void write_safetensors(const std::filesystem::path& path,
                       const std::map<std::string, TensorData>& tensors,
                       const std::map<std::string, std::string>& metadata) {
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    if (!metadata.empty()) {
        header["__metadata__"] = metadata;
    }
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        std::int64_t n = 1;
        for (auto d : t.shape) n *= d;
        if (static_cast<std::size_t>(n) != t.values.size()) {
            throw ShapeError("tensor '" + name + "' shape does not match its value count");
        }
        const std::uint64_t bytes = t.values.size() * sizeof(float);
        header[name] = {{"dtype", "F32"}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string hdr = header.dump();
    while (hdr.size() % 8 != 0) hdr.push_back(' ');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const std::uint64_t len = hdr.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const auto& [name, t] : tensors) {
        out.write(reinterpret_cast<const char*>(t.values.data()),
                  static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace negascope
