#pragma once

#include "sig/numkit/matrix.hpp"

namespace sig::numkit {

struct Svd {
  Matrix u;                    // m x n, orthonormal columns
  std::vector<double> sigma;   // n singular values, descending
  Matrix v;                    // n x n orthogonal
};

/// One-sided Jacobi (Hestenes) SVD for small dense matrices (m >= n).
Svd svd(const Matrix& a);

std::vector<double> singular_values(const Matrix& a);
double min_singular_value(const Matrix& a);

/// max sigma / min sigma; infinity when the matrix is numerically singular.
double condition_number(const Matrix& a);

/// Solves A x = b (square A) by Gaussian elimination with partial pivoting.
/// Throws NumericError on a numerically singular pivot.
Matrix solve(const Matrix& a, const Matrix& b);

/// Minimum-norm least-squares solution via the SVD pseudo-inverse.
Matrix lstsq(const Matrix& a, const Matrix& b);

}  // namespace sig::numkit
