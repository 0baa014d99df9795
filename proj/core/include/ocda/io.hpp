#pragma once

#include <filesystem>
#include <vector>
#include <string>
#include <string_view>

namespace ocda::io {

// Writes to a sibling temporary file, then renames over the target so
// readers never observe a partial file. Parent directories are created.
void write_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_file(const std::filesystem::path& path);

// %.6g, the single float format used for every metrics file.
std::string format_float(double value);

}  // namespace ocda::io
