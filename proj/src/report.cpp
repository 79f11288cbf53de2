#include "stance/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "stance/csv.hpp"

namespace stance {

namespace {

constexpr std::array<const char*, 6> kColumns = {"fnc", "f1m", "agr", "dsg", "dsc", "unr"};
constexpr const char* kSdSuffix = " (sd)";

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw csv::ParseError("<report>", line, "bad number '" + s + "'");
  }
  return v;
}

std::string display_name(const ReportRow& r) { return r.flagged ? r.name + "*" : r.name; }

std::string render_csv(const ReportTable& t) {
  std::ostringstream os;
  for (const auto& [k, v] : t.meta) os << "# " << k << "=" << v << "\n";
  os << "name,fnc,f1m,agr,dsg,dsc,unr\n";
  auto row = [&](const std::string& name, const ReportCells& c) {
    std::vector<std::string> fields = {name};
    for (double v : c) fields.push_back(shortest(v));
    csv::write_row(os, fields);
  };
  for (const auto& r : t.rows) {
    row(display_name(r), r.values);
    if (r.stdev) row(r.name + kSdSuffix, *r.stdev);
  }
  return os.str();
}

std::string render_text(const ReportTable& t) {
  std::size_t width = 4;
  for (const auto& r : t.rows) width = std::max(width, display_name(r).size() + 5);
  std::ostringstream os;
  for (const auto& [k, v] : t.meta) os << "# " << k << "=" << v << "\n";
  char buf[32];
  os << std::string("name").append(width - 4, ' ');
  for (const char* c : {"FNC", "F1m", "AGR", "DSG", "DSC", "UNR"}) {
    std::snprintf(buf, sizeof buf, "  %6s", c);
    os << buf;
  }
  os << "\n";
  auto line = [&](const std::string& name, const ReportCells& c) {
    os << name << std::string(width - name.size(), ' ');
    for (double v : c) {
      std::snprintf(buf, sizeof buf, "  %6.3f", v);
      os << buf;
    }
    os << "\n";
  };
  for (const auto& r : t.rows) {
    line(display_name(r), r.values);
    if (r.stdev) line(r.name + kSdSuffix, *r.stdev);
  }
  return os.str();
}

std::string render_jsonl(const ReportTable& t) {
  std::ostringstream os;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.meta) meta[k] = v;
  os << nlohmann::ordered_json{{"meta", meta}}.dump() << "\n";
  for (const auto& r : t.rows) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["flagged"] = r.flagged;
    for (std::size_t i = 0; i < kColumns.size(); ++i) j[kColumns[i]] = r.values[i];
    if (r.stdev) {
      nlohmann::ordered_json sd;
      for (std::size_t i = 0; i < kColumns.size(); ++i) sd[kColumns[i]] = (*r.stdev)[i];
      j["sd"] = sd;
    }
    os << j.dump() << "\n";
  }
  return os.str();
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "text" || s == "txt") return ReportFormat::Text;
  if (s == "jsonl" || s == "json-lines") return ReportFormat::JsonLines;
  throw std::invalid_argument("unknown report format: " + s);
}

ReportCells cells_of(const eval::EvaluationReport& r) {
  return {r.fnc.normalized, r.f1.macro, r.f1.per_class[0], r.f1.per_class[1], r.f1.per_class[2], r.f1.per_class[3]};
}

ReportRow aggregate_row(const std::string& name, const std::vector<eval::EvaluationReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_row: no reports");
  ReportRow row;
  row.name = name;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    const auto c = cells_of(r);
    for (std::size_t i = 0; i < c.size(); ++i) row.values[i] += c[i] / n;
  }
  if (reports.size() >= 2) {
    ReportCells sd{};
    for (const auto& r : reports) {
      const auto c = cells_of(r);
      for (std::size_t i = 0; i < c.size(); ++i) sd[i] += (c[i] - row.values[i]) * (c[i] - row.values[i]) / n;
    }
    for (double& v : sd) v = std::sqrt(v);
    row.stdev = sd;
  }
  return row;
}

std::string render_report(const ReportTable& table, ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv:
      return render_csv(table);
    case ReportFormat::Text:
      return render_text(table);
    case ReportFormat::JsonLines:
      return render_jsonl(table);
  }
  return {};
}

void emit_report(const ReportTable& table, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report " + path);
  out << render_report(table, format);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

ReportTable parse_report_csv(const std::string& text) {
  ReportTable t;
  // Comment lines precede the header.
  std::size_t pos = 0;
  std::size_t comments = 0;
  while (pos < text.size() && text[pos] == '#') {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++comments;
    const auto body = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw csv::ParseError("<report>", comments, "comment without '='");
    t.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    pos = nl + 1;
  }
  const auto records = csv::parse(std::string_view(text).substr(std::min(pos, text.size())), "<report>");
  if (records.empty() ||
      records[0].fields != std::vector<std::string>{"name", "fnc", "f1m", "agr", "dsg", "dsc", "unr"}) {
    throw csv::ParseError("<report>", comments + 1, "missing or unexpected header");
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& fields = records[r].fields;
    const std::size_t lineno = records[r].line + comments;
    if (fields.size() != 7) throw csv::ParseError("<report>", lineno, "expected 7 fields");
    ReportCells cells{};
    for (std::size_t i = 0; i < 6; ++i) cells[i] = parse_double(fields[i + 1], lineno);
    const std::string& name = fields[0];
    const std::string suffix = kSdSuffix;
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      if (t.rows.empty() || t.rows.back().stdev ||
          t.rows.back().name != name.substr(0, name.size() - suffix.size())) {
        throw csv::ParseError("<report>", lineno, "stdev row without its mean row");
      }
      t.rows.back().stdev = cells;
      continue;
    }
    ReportRow row;
    row.values = cells;
    if (!name.empty() && name.back() == '*') {
      row.flagged = true;
      row.name = name.substr(0, name.size() - 1);
    } else {
      row.name = name;
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace stance
