#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace graphood {

// Dense row-major matrix of 64-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols, 0.0); }
  static Matrix ones(int rows, int cols) { return Matrix(rows, cols, 1.0); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  long size() const { return static_cast<long>(rows_) * cols_; }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void set_zero();
  std::string shape_str() const;  // e.g. "3x4"

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Square sparse matrix in CSR layout. Entries are plain constants and never
// receive gradients.
struct SparseMatrix {
  int n = 0;
  std::vector<int> row_offsets;  // size n + 1, monotone, back() == nnz
  std::vector<int> col_indices;  // sorted within each row, no duplicates
  std::vector<double> values;

  static SparseMatrix identity(int n);
  // Builds from (row, col, value) triplets; sorts per row and rejects
  // duplicate coordinates.
  static SparseMatrix from_coo(int n, std::vector<std::tuple<int, int, double>> entries);

  int nnz() const { return static_cast<int>(col_indices.size()); }
  Matrix to_dense() const;
  SparseMatrix transposed() const;
  void validate() const;  // checks the CSR invariants above
};

}  // namespace graphood
