#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace trajkit {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Rows are the sequence axis throughout
/// trajkit: a clip of n embeddings of width d is an n×d Matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vec>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// a·b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a·bᵀ
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// aᵀ·b
Matrix matmul_at(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Row vector times matrix: x·W, x of length W.rows().
Vec vec_mat(std::span<const double> x, const Matrix& w);

void add_row_bias(Matrix& m, std::span<const double> bias);
Vec column_mean(const Matrix& m);
Vec column_sum(const Matrix& m);

Vec to_double(std::span<const float> v);

}  // namespace trajkit
