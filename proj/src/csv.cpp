#include "ghostcde/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace ghostcde::csv {

std::vector<std::string> split_line(std::string_view line)
{
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

Reader::Reader(std::istream& in)
  : in_(in)
{
  std::string line;
  if (!read_logical_line(line)) {
    throw std::runtime_error("csv: missing header row");
  }
  header_ = split_line(line);
  for (std::size_t i = 0; i < header_.size(); ++i) {
    index_.emplace(header_[i], i);
  }
}

std::optional<std::size_t> Reader::column(std::string_view name) const
{
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

bool Reader::read_logical_line(std::string& out)
{
  out.clear();
  std::string piece;
  bool any = false;
  // a quoted field may span physical lines
  while (std::getline(in_, piece)) {
    ++line_;
    any = true;
    if (!out.empty()) {
      out.push_back('\n');
    }
    out += piece;
    std::size_t quotes = 0;
    for (char c : out) {
      quotes += (c == '"');
    }
    if (quotes % 2 == 0) {
      return true;
    }
  }
  return any;
}

bool Reader::next(Record& record)
{
  std::string line;
  while (read_logical_line(line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    record.line = line_;
    record.fields = split_line(line);
    return true;
  }
  return false;
}

std::string escape(std::string_view field)
{
  if (field.find_first_of(",\"\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out.push_back('"');
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double value)
{
  return fmt::format("{}", value);
}

std::optional<double> parse_double(std::string_view text)
{
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty() || text == "NA" || text == "NaN" || text == "nan") {
    return std::nullopt;
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

std::optional<long long> parse_int(std::string_view text)
{
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) {
    return std::nullopt;
  }
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec == std::errc() && ptr == text.data() + text.size()) {
    return value;
  }
  // ids sometimes arrive as "2539.0"
  auto as_double = parse_double(text);
  if (as_double && *as_double == static_cast<double>(static_cast<long long>(*as_double))) {
    return static_cast<long long>(*as_double);
  }
  return std::nullopt;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields)
{
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) {
      out << ',';
    }
    out << escape(fields[i]);
  }
  out << '\n';
}

} // namespace ghostcde::csv
