#include "graphood/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "graphood/errors.hpp"

namespace graphood {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) {
    throw NumericError("matrix dimensions must be nonnegative, got " + shape_str());
  }
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Matrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

SparseMatrix SparseMatrix::identity(int n) {
  SparseMatrix s;
  s.n = n;
  s.row_offsets.resize(n + 1);
  s.col_indices.resize(n);
  s.values.assign(n, 1.0);
  for (int i = 0; i <= n; ++i) s.row_offsets[i] = i;
  for (int i = 0; i < n; ++i) s.col_indices[i] = i;
  return s;
}

SparseMatrix SparseMatrix::from_coo(int n, std::vector<std::tuple<int, int, double>> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  SparseMatrix s;
  s.n = n;
  s.row_offsets.assign(n + 1, 0);
  s.col_indices.reserve(entries.size());
  s.values.reserve(entries.size());
  int prev_r = -1, prev_c = -1;
  for (const auto& [r, c, v] : entries) {
    if (r < 0 || r >= n || c < 0 || c >= n) {
      throw NumericError("sparse entry (" + std::to_string(r) + "," + std::to_string(c) +
                         ") outside " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (r == prev_r && c == prev_c) {
      throw NumericError("duplicate sparse entry (" + std::to_string(r) + "," +
                         std::to_string(c) + ")");
    }
    s.row_offsets[r + 1]++;
    s.col_indices.push_back(c);
    s.values.push_back(v);
    prev_r = r;
    prev_c = c;
  }
  for (int i = 0; i < n; ++i) s.row_offsets[i + 1] += s.row_offsets[i];
  return s;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      d(i, col_indices[k]) = values[k];
    }
  }
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(values.size());
  for (int i = 0; i < n; ++i) {
    for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      entries.emplace_back(col_indices[k], i, values[k]);
    }
  }
  return from_coo(n, std::move(entries));
}

void SparseMatrix::validate() const {
  if (static_cast<int>(row_offsets.size()) != n + 1) {
    throw NumericError("CSR row_offsets size mismatch");
  }
  if (row_offsets.front() != 0 || row_offsets.back() != nnz()) {
    throw NumericError("CSR offsets must start at 0 and end at nnz");
  }
  for (int i = 0; i < n; ++i) {
    if (row_offsets[i] > row_offsets[i + 1]) {
      throw NumericError("CSR offsets not monotone at row " + std::to_string(i));
    }
    for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      if (col_indices[k] < 0 || col_indices[k] >= n) {
        throw NumericError("CSR column out of range at row " + std::to_string(i));
      }
      if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) {
        throw NumericError("CSR columns not strictly increasing at row " + std::to_string(i));
      }
    }
  }
  if (values.size() != col_indices.size()) {
    throw NumericError("CSR values/columns size mismatch");
  }
}

}  // namespace graphood
