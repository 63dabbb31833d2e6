#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace countlab {

// Writes to a sibling temporary file and renames it over `path`, creating
// parent directories as needed. Readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Shortest round-trip decimal representation of a double ("%.17g" fallback).
std::string format_double(double v);

}  // namespace countlab
