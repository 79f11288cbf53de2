#include "stance/csv.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace stance::csv {

ParseError::ParseError(std::string source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Record> parse(std::string_view text, const std::string& source) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<Record> records;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();

  while (i < n) {
    Record rec;
    rec.line = line;
    std::string field;
    bool record_done = false;
    const bool starts_quoted = i < n && text[i] == '"';
    while (!record_done) {
      field.clear();
      if (i < n && text[i] == '"') {
        ++i;
        const std::size_t open_line = line;
        bool closed = false;
        while (i < n) {
          char c = text[i];
          if (c == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        if (!closed) throw ParseError(source, open_line, "unterminated quoted field");
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
          throw ParseError(source, line, "unexpected character after closing quote");
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') throw ParseError(source, line, "quote inside unquoted field");
          field.push_back(text[i]);
          ++i;
        }
      }
      rec.fields.push_back(std::move(field));
      if (i >= n) {
        record_done = true;
      } else if (text[i] == ',') {
        ++i;
      } else {
        if (text[i] == '\r') {
          ++i;
          if (i < n && text[i] != '\n') throw ParseError(source, line, "bare carriage return");
        }
        if (i < n && text[i] == '\n') ++i;
        ++line;
        record_done = true;
      }
    }
    // Blank lines carry no record.
    if (rec.fields.size() == 1 && rec.fields[0].empty() && !starts_quoted) continue;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Record> read_file(const std::string& path) { return parse(slurp(path), path); }

std::vector<Record> read_table(const std::string& path, const std::vector<std::string>& expected,
                               std::vector<std::string>* header_out) {
  auto rows = read_file(path);
  if (rows.empty()) throw ParseError(path, 1, "missing header row");
  const auto& header = rows.front().fields;
  if (header.size() < expected.size())
    throw ParseError(path, 1, "header has " + std::to_string(header.size()) + " columns, expected " +
                                  std::to_string(expected.size()));
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (header[c] != expected[c])
      throw ParseError(path, 1, "header column " + std::to_string(c + 1) + " is '" + header[c] +
                                    "', expected '" + expected[c] + "'");
  }
  if (header_out) *header_out = header;
  const std::size_t width = header.size();
  std::vector<Record> data(std::make_move_iterator(rows.begin() + 1),
                           std::make_move_iterator(rows.end()));
  for (const auto& r : data) {
    if (r.fields.size() != width)
      throw ParseError(path, r.line, "expected " + std::to_string(width) + " fields, found " +
                                         std::to_string(r.fields.size()));
  }
  return data;
}

std::string escape(std::string_view field) {
  bool quote = field.empty() ? false : field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!quote && !field.empty() && (field.front() == ' ' || field.back() == ' ')) quote = true;
  if (!quote) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  // A lone empty field would otherwise read back as a blank line.
  if (fields.size() == 1 && fields[0].empty()) {
    out << "\"\"\n";
    return;
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace stance::csv
