#include "xmodal/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "xmodal/error.hpp"

namespace xmodal {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("matrix value count " + std::to_string(values_.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw ShapeError("ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector l2_normalize(std::span<const double> v) {
  const double n = norm(v);
  if (!(n >= kDegenerateNorm)) {
    throw DegenerateVectorError("vector norm " + std::to_string(n) +
                                " is below the degenerate threshold");
  }
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

Matrix l2_normalize_rows(const Matrix& m, Vector* norms) {
  Matrix out(m.rows(), m.cols());
  if (norms) norms->assign(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm(m.row(r));
    if (!(n >= kDegenerateNorm)) {
      throw DegenerateVectorError("row " + std::to_string(r) +
                                  " has zero norm");
    }
    auto src = m.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c] / n;
    if (norms) (*norms)[r] = n;
  }
  return out;
}

void normalize_backward(std::span<const double> unit, double input_norm,
                        std::span<const double> grad_unit, std::span<double> grad_in) {
  const double proj = dot(unit, grad_unit);
  for (std::size_t i = 0; i < unit.size(); ++i) {
    grad_in[i] += (grad_unit[i] - unit[i] * proj) / input_norm;
  }
}

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("cosine_matrix: dimension " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Vector log_softmax(std::span<const double> row) {
  if (row.empty()) return {};
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double x : row) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  Vector out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lse;
  return out;
}

Vector log_softmax_row(const Matrix& m, std::size_t row) {
  if (row >= m.rows()) {
    throw ShapeError("row " + std::to_string(row) + " out of bounds for " +
                     std::to_string(m.rows()) + " rows");
  }
  return log_softmax(m.row(row));
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Matrix pca_project_2d(const Matrix& x) {
  if (x.rows() < 2) {
    throw InsufficientDataError("pca_project_2d needs at least 2 rows, got " +
                                std::to_string(x.rows()));
  }
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  Eigen::MatrixXd centered(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      centered(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  const Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;

  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const double scale = std::max(1.0, std::abs(evals(d - 1)));

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 2);
  for (int comp = 0; comp < 2 && comp < d; ++comp) {
    const Eigen::Index idx = d - 1 - comp;
    if (evals(idx) <= 1e-12 * scale) continue;
    Eigen::VectorXd v = solver.eigenvectors().col(idx);
    for (Eigen::Index k = 0; k < d; ++k) {
      if (std::abs(v(k)) > 1e-12) {
        if (v(k) < 0) v = -v;
        break;
      }
    }
    basis.col(comp) = v;
  }

  const Eigen::MatrixXd proj = centered * basis;
  Matrix out(x.rows(), 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    out(static_cast<std::size_t>(r), 0) = proj(r, 0);
    out(static_cast<std::size_t>(r), 1) = proj(r, 1);
  }
  return out;
}

}  // namespace xmodal
