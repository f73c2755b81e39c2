#include "text_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"

namespace bikeaccess::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_line(std::string_view line, std::string_view name, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(std::string(name), lineno, "unterminated quoted field");
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", path.string()));
}

std::vector<CsvRow> parse_csv(std::string_view text, std::string_view name,
                              const std::vector<std::string_view>& expected) {
  std::vector<CsvRow> rows;
  bool header_seen = false;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (trim(line).empty()) {
      if (nl == text.size()) break;
      continue;
    }
    auto fields = split_line(line, name, lineno);
    if (!header_seen) {
      if (lineno == 1 && !fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        fields[0].erase(0, 3);
      }
      bool ok = fields.size() == expected.size();
      for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = fields[i] == expected[i];
      if (!ok) {
        std::string want;
        for (std::size_t i = 0; i < expected.size(); ++i) {
          if (i) want += ',';
          want += expected[i];
        }
        throw ParseError(std::string(name), lineno, fmt::format("expected header '{}'", want));
      }
      header_seen = true;
    } else {
      if (fields.size() != expected.size()) {
        throw ParseError(std::string(name), lineno,
                         fmt::format("expected {} fields, got {}", expected.size(), fields.size()));
      }
      rows.push_back(CsvRow{lineno, std::move(fields)});
    }
    if (nl == text.size()) break;
  }
  if (!header_seen) throw ParseError(std::string(name), 0, "missing header");
  return rows;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path,
                             const std::vector<std::string_view>& expected) {
  return parse_csv(read_file(path), path.string(), expected);
}

double parse_double(std::string_view text, std::string_view file, std::size_t line,
                    std::string_view field) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError(std::string(file), line, fmt::format("field '{}': not a finite number: '{}'", field, text));
  }
  return value;
}

long long parse_int(std::string_view text, std::string_view file, std::size_t line,
                    std::string_view field) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(std::string(file), line, fmt::format("field '{}': not an integer: '{}'", field, text));
  }
  return value;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace bikeaccess::io
