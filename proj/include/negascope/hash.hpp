#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace negascope {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

} // namespace negascope
