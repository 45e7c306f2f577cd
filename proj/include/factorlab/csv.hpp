#pragma once

#include "factorlab/panel.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace factorlab {

struct CsvReadOptions {
  std::optional<bool> header;       // nullopt: detect from the first row
  std::optional<bool> date_column;  // nullopt: detect from the first column
  bool prices = false;              // convert to log returns
  bool drop_incomplete = false;     // drop series with missing cells
};

/// Comma-separated panel, one row per period. Empty cells and NA/NaN/null
/// count as missing; they are rejected unless drop_incomplete is set, in
/// which case the affected series are removed. Throws IoError when the file
/// cannot be opened and InvalidInput on malformed content.
PanelData read_panel_csv(const std::string& path, const CsvReadOptions& options = {});
PanelData parse_panel_csv(std::istream& in, const CsvReadOptions& options,
                          const std::string& source = "<stream>");

/// r_t = ln p_t - ln p_{t-1}; the first label is dropped. Prices must be > 0.
PanelData prices_to_log_returns(const PanelData& prices);

/// %.17g, which round-trips every finite double.
std::string format_double(double value);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {},
                      const std::vector<std::string>& row_labels = {});
/// Throws IoError when the file cannot be written.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {},
                      const std::vector<std::string>& row_labels = {});

/// Writes text to a file, throwing IoError on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace factorlab
