#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stance/eval.hpp"

namespace stance {

/// Cells in the fixed order FNC, F1m, AGR, DSG, DSC, UNR.
using ReportCells = std::array<double, 6>;

struct ReportRow {
  std::string name;
  ReportCells values{};
  std::optional<ReportCells> stdev;
  /// Marked with a trailing '*' in every format.
  bool flagged = false;
};

struct ReportTable {
  /// Key/value pairs written as comment lines (config hash, seeds, ...).
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<ReportRow> rows;
};

enum class ReportFormat { Csv, Text, JsonLines };

ReportFormat parse_report_format(const std::string& s);
ReportCells cells_of(const eval::EvaluationReport& report);
/// Mean row; stdev (population) is attached when there are two or more reports.
ReportRow aggregate_row(const std::string& name, const std::vector<eval::EvaluationReport>& reports);

std::string render_report(const ReportTable& table, ReportFormat format);
/// Throws when the file cannot be written.
void emit_report(const ReportTable& table, ReportFormat format, const std::string& path);
/// Reads the CSV rendering back.
ReportTable parse_report_csv(const std::string& text);

}  // namespace stance
