#include "factorlab/csv.hpp"

#include "factorlab/errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace factorlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" ||
         cell == "null" || cell == "NULL" || cell == ".";
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end != begin + cell.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool numeric_or_missing(const std::string& cell) {
  return is_missing(cell) || parse_number(cell).has_value();
}

}  // namespace

PanelData parse_panel_csv(std::istream& in, const CsvReadOptions& options,
                          const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) throw InvalidInput(source + ": no data");

  bool header = false;
  if (options.header) {
    header = *options.header;
  } else {
    for (std::size_t c = 0; c < rows[0].size(); ++c) {
      if (!numeric_or_missing(rows[0][c])) header = true;
    }
  }
  const std::size_t first_data = header ? 1 : 0;
  if (rows.size() <= first_data) throw InvalidInput(source + ": header but no data rows");

  bool dates = false;
  if (options.date_column) {
    dates = *options.date_column;
  } else {
    for (std::size_t r = first_data; r < rows.size() && !dates; ++r) {
      if (!rows[r].empty() && !numeric_or_missing(rows[r][0])) dates = true;
    }
  }

  const std::size_t width = rows[first_data].size();
  const std::size_t offset = dates ? 1 : 0;
  if (width <= offset) throw InvalidInput(source + ": no series columns");
  const Index n = static_cast<Index>(width - offset);
  const Index T = static_cast<Index>(rows.size() - first_data);

  PanelData panel;
  if (header) {
    if (rows[0].size() != width) {
      throw InvalidInput(source + ": header has " + std::to_string(rows[0].size()) +
                         " cells, data rows have " + std::to_string(width));
    }
    panel.series_names.assign(rows[0].begin() + static_cast<long>(offset), rows[0].end());
  }

  Eigen::MatrixXd values(T, n);
  std::vector<bool> incomplete(static_cast<std::size_t>(n), false);
  for (Index t = 0; t < T; ++t) {
    const auto& row = rows[first_data + static_cast<std::size_t>(t)];
    const std::size_t line_no = first_data + static_cast<std::size_t>(t) + 1;
    if (row.size() != width) {
      throw InvalidInput(source + ": row " + std::to_string(line_no) + " has " +
                         std::to_string(row.size()) + " cells, expected " + std::to_string(width));
    }
    if (dates) panel.time_labels.push_back(row[0]);
    for (Index i = 0; i < n; ++i) {
      const std::string& cell = row[offset + static_cast<std::size_t>(i)];
      if (is_missing(cell)) {
        if (!options.drop_incomplete) {
          throw InvalidInput(source + ": missing value at row " + std::to_string(line_no) +
                             ", column " + std::to_string(offset + static_cast<std::size_t>(i) + 1) +
                             " (use --drop-incomplete-series to drop such series)");
        }
        incomplete[static_cast<std::size_t>(i)] = true;
        values(t, i) = 0.0;
        continue;
      }
      const auto v = parse_number(cell);
      if (!v) {
        throw InvalidInput(source + ": cannot parse '" + cell + "' at row " +
                           std::to_string(line_no));
      }
      values(t, i) = *v;
    }
  }

  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i) {
    if (!incomplete[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  if (keep.empty()) throw InvalidInput(source + ": every series has missing values");
  if (static_cast<Index>(keep.size()) == n) {
    panel.values = std::move(values);
  } else {
    panel.values.resize(T, static_cast<Index>(keep.size()));
    std::vector<std::string> names;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      panel.values.col(static_cast<Index>(k)) = values.col(keep[k]);
      if (!panel.series_names.empty()) {
        names.push_back(panel.series_names[static_cast<std::size_t>(keep[k])]);
      }
    }
    panel.series_names = std::move(names);
  }
  return options.prices ? prices_to_log_returns(panel) : panel;
}

PanelData read_panel_csv(const std::string& path, const CsvReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_panel_csv(in, options, path);
}

PanelData prices_to_log_returns(const PanelData& prices) {
  const Eigen::MatrixXd& p = prices.values;
  if (p.rows() < 2) throw InvalidInput("need at least two price rows");
  if ((p.array() <= 0.0).any()) throw InvalidInput("prices must be positive for log returns");
  PanelData out;
  out.series_names = prices.series_names;
  const Eigen::MatrixXd logs = p.array().log().matrix();
  out.values = logs.bottomRows(p.rows() - 1) - logs.topRows(p.rows() - 1);
  if (!prices.time_labels.empty()) {
    out.time_labels.assign(prices.time_labels.begin() + 1, prices.time_labels.end());
  }
  return out;
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header,
                      const std::vector<std::string>& row_labels) {
  const bool labels = !row_labels.empty();
  if (labels && static_cast<Index>(row_labels.size()) != m.rows()) {
    throw InvalidInput("row label count does not match the matrix");
  }
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  for (Index t = 0; t < m.rows(); ++t) {
    if (labels) out << row_labels[static_cast<std::size_t>(t)] << ',';
    for (Index i = 0; i < m.cols(); ++i) out << (i ? "," : "") << format_double(m(t, i));
    out << '\n';
  }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header,
                      const std::vector<std::string>& row_labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_matrix_csv(out, m, header, row_labels);
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace factorlab
