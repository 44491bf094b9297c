#pragma once

#include <vector>

#include "cstg/errors.hpp"

namespace cstg {

// Plain row-major dense matrix for data handling (no graph attached).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::vector<double> row(int r) const {
    return std::vector<double>(data.begin() + static_cast<std::size_t>(r) * cols,
                               data.begin() + static_cast<std::size_t>(r + 1) * cols);
  }

  Matrix take_rows(const std::vector<int>& idx) const {
    Matrix out(static_cast<int>(idx.size()), cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int c = 0; c < cols; ++c) out.at(static_cast<int>(i), c) = at(idx[i], c);
    return out;
  }

  // Column-wise concatenation [a | b]; row counts must agree.
  static Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) {
      throw DimensionError("hcat: row counts disagree: " + std::to_string(a.rows) + " vs " +
                           std::to_string(b.rows));
    }
    Matrix out(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
      for (int c = 0; c < a.cols; ++c) out.at(r, c) = a.at(r, c);
      for (int c = 0; c < b.cols; ++c) out.at(r, a.cols + c) = b.at(r, c);
    }
    return out;
  }
};

}  // namespace cstg
