#pragma once

#include <vector>

#include "tripletnet/common.hpp"

namespace tripletnet {

struct PcaResult {
  int rows = 0;
  int dims = 0;
  std::vector<double> coords;      // rows x dims, row-major
  std::vector<double> explained;   // fraction of total variance per component
  std::vector<double> components;  // dims x d directions, row-major
};

/// Projects row vectors onto their top principal directions: center
/// the columns, eigendecompose the covariance (via the Gram matrix
/// when rows < columns), order components by decreasing variance, and
/// fix each component's sign so its largest-magnitude loading is
/// positive. Zero-variance data projects to zeros with zero explained
/// variance.
PcaResult pca_project(const std::vector<double>& data, int rows, int cols, int dims = 2);

}  // namespace tripletnet
