#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace amod {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string file_sha256_hex(const std::filesystem::path& path);

/// Reads a whole file into memory; throws amod::Error when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes `content` to a sibling temp file and renames it over `path`.
/// On failure the temp file is removed and nothing is left at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// ISO-8601 UTC timestamp with second precision, e.g. 2026-01-31T12:00:00Z.
std::string utc_timestamp();

}  // namespace amod
