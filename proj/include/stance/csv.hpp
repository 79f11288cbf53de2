#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stance::csv {

/// Parse failure; carries the 1-based physical line where the offending
/// record starts.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// RFC-4180 reader: double-quote escaping by doubling, quoted fields may span
/// lines, LF or CRLF terminators. A leading UTF-8 BOM is skipped.
std::vector<Record> parse(std::string_view text, const std::string& source = "<memory>");
std::vector<Record> read_file(const std::string& path);

/// Reads a file and checks the header row against `expected` (exact names,
/// extra trailing columns allowed). Returns the data rows.
std::vector<Record> read_table(const std::string& path, const std::vector<std::string>& expected,
                               std::vector<std::string>* header_out = nullptr);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string slurp(const std::string& path);

}  // namespace stance::csv
