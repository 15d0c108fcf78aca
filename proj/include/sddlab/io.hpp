#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sddlab {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it into place, creating parent
// directories as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace sddlab
