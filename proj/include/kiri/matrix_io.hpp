#pragma once

#include <filesystem>
#include <string>

#include "kiri/grid.hpp"

namespace kiri {

// Plain-text matrix: one row per line, space-separated, 17 significant digits.
std::string format_matrix(const Field& f);
Field parse_matrix(const std::string& text);

void write_matrix(const Field& f, const std::filesystem::path& path);
Field read_matrix(const std::filesystem::path& path);

// Writes `contents` verbatim, throwing IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

}  // namespace kiri
