#include "sig/numkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sig::numkit {

Svd svd(const Matrix& a) {
  if (a.rows < a.cols) {
    // Work on the transpose and swap factors back.
    Svd t = svd(transpose(a));
    return Svd{t.v, t.sigma, t.u};
  }
  const std::size_t m = a.rows, n = a.cols;
  Matrix u = a;
  Matrix v = Matrix::identity(n);

  // Hestenes one-sided Jacobi: rotate column pairs until all are orthogonal.
  const double eps = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = u(i, p), y = u(i, q);
          app += x * x;
          aqq += y * y;
          apq += x * y;
        }
        if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
        converged = false;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = u(i, p), y = u(i, q);
          u(i, p) = c * x - s * y;
          u(i, q) = s * x + c * y;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double x = v(i, p), y = v(i, q);
          v(i, p) = c * x - s * y;
          v(i, q) = s * x + c * y;
        }
      }
    }
    if (converged) break;
  }

  std::vector<double> sigma(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) norm += u(i, j) * u(i, j);
    sigma[j] = std::sqrt(norm);
    if (sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, j) /= sigma[j];
    }
  }

  // Sort descending, permuting u and v columns in step.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });
  Svd out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.sigma[j] = sigma[order[j]];
    for (std::size_t i = 0; i < m; ++i) out.u(i, j) = u(i, order[j]);
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = v(i, order[j]);
  }
  return out;
}

std::vector<double> singular_values(const Matrix& a) { return svd(a).sigma; }

double min_singular_value(const Matrix& a) {
  const std::vector<double> s = singular_values(a);
  return s.empty() ? 0.0 : s.back();
}

double condition_number(const Matrix& a) {
  const std::vector<double> s = singular_values(a);
  if (s.empty() || s.back() <= 0.0) return std::numeric_limits<double>::infinity();
  return s.front() / s.back();
}

Matrix solve(const Matrix& a, const Matrix& b) {
  if (a.rows != a.cols) throw ShapeError("solve: non-square A " + shape_str(a));
  if (b.rows != a.rows) throw ShapeError("solve: b rows " + shape_str(b));
  const std::size_t n = a.rows, k = b.cols;
  Matrix lu = a;
  Matrix x = b;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(lu(i, col)) > std::abs(lu(piv, col))) piv = i;
    if (std::abs(lu(piv, col)) < 1e-300) {
      throw NumericError("solve: singular system at column " + std::to_string(col));
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(col, j), lu(piv, j));
      for (std::size_t j = 0; j < k; ++j) std::swap(x(col, j), x(piv, j));
    }
    for (std::size_t i = col + 1; i < n; ++i) {
      const double f = lu(i, col) / lu(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) lu(i, j) -= f * lu(col, j);
      for (std::size_t j = 0; j < k; ++j) x(i, j) -= f * x(col, j);
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = x(col, j);
      for (std::size_t t = col + 1; t < n; ++t) s -= lu(col, t) * x(t, j);
      x(col, j) = s / lu(col, col);
    }
  }
  return x;
}

Matrix lstsq(const Matrix& a, const Matrix& b) {
  if (b.rows != a.rows) throw ShapeError("lstsq: b rows " + shape_str(b));
  const Svd f = svd(a);
  const double cutoff = (f.sigma.empty() ? 0.0 : f.sigma.front()) * 1e-12;
  // x = V diag(1/sigma) U^T b with small sigmas dropped.
  Matrix utb = matmul(transpose(f.u), b);
  for (std::size_t i = 0; i < f.sigma.size(); ++i) {
    const double inv = f.sigma[i] > cutoff ? 1.0 / f.sigma[i] : 0.0;
    for (std::size_t j = 0; j < utb.cols; ++j) utb(i, j) *= inv;
  }
  return matmul(f.v, utb);
}

}  // namespace sig::numkit
