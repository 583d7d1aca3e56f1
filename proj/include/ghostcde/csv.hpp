#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ghostcde::csv {

//! A parsed comma-separated record with its 1-based source line number.
struct Record
{
  std::size_t line = 0;
  std::vector<std::string> fields;
};

//! Header-aware reader. Handles double-quoted fields with embedded commas,
//! escaped quotes and CRLF line endings.
class Reader
{
public:
  explicit Reader(std::istream& in);

  const std::vector<std::string>& header() const { return header_; }

  //! Column position by name, or nullopt if the header lacks it.
  std::optional<std::size_t> column(std::string_view name) const;

  //! Reads the next record. Returns false at end of input.
  bool next(Record& record);

private:
  bool read_logical_line(std::string& out);

  std::istream& in_;
  std::size_t line_ = 0;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::string> split_line(std::string_view line);

//! Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

//! Shortest round-trip decimal representation.
std::string format_double(double value);

//! Parses a full-string double; "NA", "" and trailing junk yield nullopt.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

} // namespace ghostcde::csv
