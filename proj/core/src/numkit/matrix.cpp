#include "sig/numkit/matrix.hpp"

#include <cmath>

namespace sig::numkit {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data.size()) +
                     " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double Matrix::scalar_value() const {
  if (!is_scalar()) throw ShapeError("scalar_value: matrix is " + shape_str(*this));
  return data[0];
}

bool Matrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

void require_shape(const Matrix& m, std::size_t r, std::size_t c, const char* what) {
  if (m.rows != r || m.cols != c) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(r) + "x" +
                     std::to_string(c) + ", got " + shape_str(m));
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.all_finite()) {
    throw NumericError(std::string(what) + ": non-finite entries in " + shape_str(m) +
                       " input");
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: inner dims " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix c(a.rows, b.cols);
  // ikj order: streams rows of b, autovectorizes.
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = &c.data[i * c.cols];
    for (std::size_t t = 0; t < a.cols; ++t) {
      const double av = a.data[i * a.cols + t];
      if (av == 0.0) continue;
      const double* brow = &b.data[t * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

Matrix col_mean(const Matrix& a) {
  if (a.rows == 0) throw ShapeError("col_mean: empty matrix");
  Matrix m(1, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) m.data[j] += a(i, j);
  for (double& v : m.data) v /= static_cast<double>(a.rows);
  return m;
}

Matrix col_var(const Matrix& a) {
  Matrix mu = col_mean(a);
  Matrix v(1, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double d = a(i, j) - mu.data[j];
      v.data[j] += d * d;
    }
  for (double& x : v.data) x /= static_cast<double>(a.rows);
  return v;
}

double sum_all(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return s;
}

double mean_all(const Matrix& a) {
  if (a.size() == 0) throw ShapeError("mean_all: empty matrix");
  return sum_all(a) / static_cast<double>(a.size());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace sig::numkit
