#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace factorlab {

using Index = Eigen::Index;

/// A T x n panel: row t holds the cross-section x_t, column i the series i.
struct PanelData {
  Eigen::MatrixXd values;
  std::vector<std::string> series_names;  // empty or length n
  std::vector<std::string> time_labels;   // empty or length T

  Index periods() const { return values.rows(); }
  Index series() const { return values.cols(); }
};

/// 0, 1, ..., count-1.
std::vector<Index> iota_indices(Index count);

}  // namespace factorlab
