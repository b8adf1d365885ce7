#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace colt {

using json = nlohmann::json;

/// Calls `fn(line_number, object)` for every non-blank line of a JSONL file.
/// Parse failures raise DataError with the 1-based line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

/// Fetches a required string field, raising DataError naming the line.
std::string require_string(const json& obj, const char* field, std::size_t line);

}  // namespace colt
