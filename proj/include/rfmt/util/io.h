#pragma once

#include <string>
#include <vector>

namespace rfmt {

std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);

// Writes to "<path>.tmp" and renames over `path`, so readers never observe a
// partially written file.
void write_file_atomic(const std::string& path, const std::string& content);
void write_lines_atomic(const std::string& path, const std::vector<std::string>& lines);

// FNV-1a 64-bit, hex encoded. Used for content addressing, not security.
std::string content_hash(const std::string& data);

}  // namespace rfmt
