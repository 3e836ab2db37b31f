#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sig::numkit {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of 64-bit floats. A 1x1 matrix doubles as a scalar.
struct Matrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  double scalar_value() const;

  bool all_finite() const;
};

std::string shape_str(const Matrix& m);
void require_shape(const Matrix& m, std::size_t r, std::size_t c, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);
void require_finite(const Matrix& m, const char* what);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

Matrix col_mean(const Matrix& a);
Matrix col_var(const Matrix& a);  // biased (divide by N)
double sum_all(const Matrix& a);
double mean_all(const Matrix& a);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace sig::numkit
