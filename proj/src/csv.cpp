#include "chromcc/csv.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "chromcc/error.hpp"

namespace chromcc::csv {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::file_not_found, path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

bool looks_like_header(const std::vector<std::string>& row) {
    if (row.empty()) return false;
    // Numeric columns in every format start at index 1; a header has
    // alphabetic text there.
    for (std::size_t i = 1; i < row.size(); ++i) {
        for (char c : row[i]) {
            if (std::isalpha(static_cast<unsigned char>(c)) && c != 'e' && c != 'E' &&
                c != 'n' && c != 'a' && c != 'N' && c != 'A') {
                return true;
            }
        }
    }
    return false;
}

double parse_double(const std::string& field, const std::string& context) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first != last && *first == ' ') ++first;
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc() || result.ptr != last) {
        throw Error(Errc::io_failure, "bad numeric field '" + field + "' in " + context);
    }
    return value;
}

long parse_long(const std::string& field, const std::string& context) {
    long value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first != last && *first == ' ') ++first;
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc() || result.ptr != last) {
        throw Error(Errc::io_failure, "bad integer field '" + field + "' in " + context);
    }
    return value;
}

std::string format_double(double value) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        double parsed = 0.0;
        std::sscanf(buf, "%lf", &parsed);
        if (parsed == value) break;
    }
    return buf;
}

}  // namespace chromcc::csv
