#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xmodal {

using Vector = std::vector<double>;

/// Norms below this are treated as an all-zero embedding.
inline constexpr double kDegenerateNorm = 1e-12;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Left-to-right sequential dot product.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Throws DegenerateVectorError when the norm is below kDegenerateNorm.
Vector l2_normalize(std::span<const double> v);

/// Normalizes every row; `norms` (if given) receives the pre-normalization norms.
Matrix l2_normalize_rows(const Matrix& m, Vector* norms = nullptr);

/// Backpropagates through y = x / |x| for one row: returns (g - y (y.g)) / |x|.
void normalize_backward(std::span<const double> unit, double input_norm,
                        std::span<const double> grad_unit, std::span<double> grad_in);

/// (i, j) = dot(A_i, B_j). Rows are expected to be unit-norm already.
Matrix cosine_matrix(const Matrix& a, const Matrix& b);

Vector log_softmax(std::span<const double> row);
Vector log_softmax_row(const Matrix& m, std::size_t row);

/// Numerically stable log(1 + exp(x)).
double softplus(double x);
double sigmoid(double x);

/// Projects mean-centered rows onto the top two principal directions.
/// Each direction is sign-fixed so its first nonzero loading is positive;
/// directions with (numerically) zero variance are zero vectors.
Matrix pca_project_2d(const Matrix& x);

bool all_finite(std::span<const double> v);

}  // namespace xmodal
