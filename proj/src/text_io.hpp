#pragma once

// Internal helpers for the CSV and text formats.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bikeaccess::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

struct CsvRow {
  std::size_t line = 0;  // 1-based line in the file
  std::vector<std::string> fields;
};

// Parses a header-first CSV. Fields may be double-quoted; the header must
// equal `expected` exactly. Blank lines are skipped.
std::vector<CsvRow> read_csv(const std::filesystem::path& path,
                             const std::vector<std::string_view>& expected);
std::vector<CsvRow> parse_csv(std::string_view text, std::string_view name,
                              const std::vector<std::string_view>& expected);

double parse_double(std::string_view text, std::string_view file, std::size_t line,
                    std::string_view field);
long long parse_int(std::string_view text, std::string_view file, std::size_t line,
                    std::string_view field);

// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(std::string_view value);

}  // namespace bikeaccess::io
