#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace blfuse::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws ValidationError naming the column if absent.
    std::size_t column(const std::string& name) const;
};

/// Comma-separated, no quoting, first line is the header. Blank lines are
/// skipped; every row must have as many fields as the header.
Table parse(std::istream& in, const std::string& origin);
Table read(const std::filesystem::path& path);

/// Shortest text that round-trips the double exactly (17 significant digits).
std::string format_double(double v);

/// Throws ValidationError mentioning `what` on malformed input.
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

/// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace blfuse::csv
