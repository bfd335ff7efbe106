#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace chromcc::csv {

// Comma-split rows, blank lines skipped. None of the project's file
// formats use quoting. A leading header row is kept; callers that expect
// one use skip_header.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path);

bool looks_like_header(const std::vector<std::string>& row);

double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

std::string format_double(double value);  // shortest round-trip representation

}  // namespace chromcc::csv
