#include "sig/identmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sig::identmetrics {

namespace {

// Average-tie ranks of one column.
std::vector<double> ranks(const numkit::Matrix& m, std::size_t col) {
  const std::size_t n = m.rows;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m(a, col) < m(b, col); });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && m(order[j + 1], col) == m(order[i], col)) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double abs_corr(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  const double r = std::abs(sxy / std::sqrt(sxx * syy));
  return std::min(r, 1.0);
}

// Cost-minimizing augmenting-path assignment (Jonker-Volgenant style) for the
// d > 8 regime.
std::vector<std::size_t> hungarian_min(const numkit::Matrix& cost) {
  const std::size_t n = cost.rows;
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(n, 0);
  for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
  return match;
}

}  // namespace

numkit::Matrix abs_pearson(const numkit::Matrix& a, const numkit::Matrix& b,
                           CorrKind kind) {
  if (a.rows != b.rows) throw numkit::ShapeError("abs_pearson: row count mismatch");
  if (a.rows < 2) throw numkit::ShapeError("abs_pearson: needs at least 2 rows");

  std::vector<std::vector<double>> ca(a.cols), cb(b.cols);
  for (std::size_t j = 0; j < a.cols; ++j) {
    if (kind == CorrKind::Spearman) {
      ca[j] = ranks(a, j);
    } else {
      ca[j].resize(a.rows);
      for (std::size_t i = 0; i < a.rows; ++i) ca[j][i] = a(i, j);
    }
  }
  for (std::size_t j = 0; j < b.cols; ++j) {
    if (kind == CorrKind::Spearman) {
      cb[j] = ranks(b, j);
    } else {
      cb[j].resize(b.rows);
      for (std::size_t i = 0; i < b.rows; ++i) cb[j][i] = b(i, j);
    }
  }

  numkit::Matrix out(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) out(i, j) = abs_corr(ca[i], cb[j]);
  return out;
}

Assignment best_assignment(const numkit::Matrix& score) {
  if (score.rows != score.cols) {
    throw numkit::ShapeError("best_assignment: matrix must be square");
  }
  require_finite(score, "best_assignment");
  const std::size_t d = score.rows;
  Assignment best;
  if (d == 0) return best;

  if (d <= 8) {
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    best.perm = perm;
    best.total = -std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (std::size_t i = 0; i < d; ++i) total += score(i, perm[i]);
      // Strict improvement keeps the lexicographically smallest tie.
      if (total > best.total) {
        best.total = total;
        best.perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  double max_entry = 0.0;
  for (double v : score.data) max_entry = std::max(max_entry, std::abs(v));
  numkit::Matrix cost(d, d);
  for (std::size_t i = 0; i < d * d; ++i) cost.data[i] = max_entry - score.data[i];
  best.perm = hungarian_min(cost);
  best.total = 0.0;
  for (std::size_t i = 0; i < d; ++i) best.total += score(i, best.perm[i]);
  return best;
}

double mcc(const numkit::Matrix& z_true, const numkit::Matrix& z_est, CorrKind kind) {
  if (z_true.cols != z_est.cols || z_true.rows != z_est.rows) {
    throw numkit::ShapeError("mcc: dimension mismatch " + numkit::shape_str(z_true) +
                             " vs " + numkit::shape_str(z_est));
  }
  const numkit::Matrix corr = abs_pearson(z_true, z_est, kind);
  const Assignment a = best_assignment(corr);
  return a.total / static_cast<double>(z_true.cols);
}

double accuracy(const std::vector<std::size_t>& pred,
                const std::vector<std::size_t>& truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw numkit::ShapeError("accuracy: needs equal-length non-empty sequences");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

void ProbeConfig::validate() const {
  if (hidden_width == 0 || layers == 0 || epochs == 0 || lr <= 0.0) {
    throw numkit::ShapeError("ProbeConfig: values must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw numkit::ShapeError("ProbeConfig: momentum must be in [0, 1)");
  }
}

}  // namespace sig::identmetrics
