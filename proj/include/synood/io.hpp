#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synood {

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// Content hash of a file (FNV-1a), as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace synood
