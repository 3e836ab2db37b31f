#include "sig/numkit/tape.hpp"

#include <algorithm>
#include <cmath>

namespace sig::numkit {

namespace {

// Sum g down to (rows, cols), reversing a broadcast.
Matrix reduce_to(const Matrix& g, std::size_t rows, std::size_t cols) {
  if (g.rows == rows && g.cols == cols) return g;
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < g.rows; ++i) {
    const std::size_t oi = rows == g.rows ? i : 0;
    for (std::size_t j = 0; j < g.cols; ++j) {
      const std::size_t oj = cols == g.cols ? j : 0;
      out(oi, oj) += g(i, j);
    }
  }
  return out;
}

void check_broadcast(const Matrix& a, const Matrix& b, const char* what) {
  const bool rows_ok = a.rows == b.rows || a.rows == 1 || b.rows == 1;
  const bool cols_ok = a.cols == b.cols || a.cols == 1 || b.cols == 1;
  if (!rows_ok || !cols_ok) {
    throw ShapeError(std::string(what) + ": cannot broadcast " + shape_str(a) +
                     " with " + shape_str(b));
  }
}

}  // namespace

ValueId Tape::push(Matrix v, bool requires_grad,
                   std::function<void(Tape&, ValueId)> back) {
  nodes_.push_back(Node{std::move(v), Matrix{}, requires_grad, std::move(back)});
  return nodes_.size() - 1;
}

ValueId Tape::constant(Matrix v) { return push(std::move(v), false, nullptr); }

ValueId Tape::param(Matrix v) { return push(std::move(v), true, nullptr); }

Matrix& Tape::grad_ref(ValueId id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

const Matrix& Tape::grad(ValueId id) {
  return grad_ref(id);
}

void Tape::accum(ValueId id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  Matrix& acc = grad_ref(id);
  require_same_shape(acc, g, "Tape::accum");
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

double* Tape::grad_data(ValueId id) { return grad_ref(id).data.data(); }

void Tape::reset() { nodes_.clear(); }

void Tape::backward(ValueId loss) {
  if (!value(loss).is_scalar()) {
    throw ShapeError("Tape::backward: loss must be scalar, got " +
                     shape_str(value(loss)));
  }
  grad_ref(loss).data[0] = 1.0;
  for (std::size_t id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.back) continue;
    n.back(*this, id);
  }
}

ValueId Tape::binary(BinKind kind, ValueId a, ValueId b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  check_broadcast(va, vb, "Tape::binary");
  const std::size_t R = std::max(va.rows, vb.rows);
  const std::size_t C = std::max(va.cols, vb.cols);
  Matrix out(R, C);
  for (std::size_t i = 0; i < R; ++i) {
    const std::size_t ia = va.rows == R ? i : 0;
    const std::size_t ib = vb.rows == R ? i : 0;
    for (std::size_t j = 0; j < C; ++j) {
      const std::size_t ja = va.cols == C ? j : 0;
      const std::size_t jb = vb.cols == C ? j : 0;
      const double x = va(ia, ja), y = vb(ib, jb);
      double r = 0.0;
      switch (kind) {
        case BinKind::Add: r = x + y; break;
        case BinKind::Sub: r = x - y; break;
        case BinKind::Mul: r = x * y; break;
        case BinKind::Div: r = x / y; break;
      }
      out(i, j) = r;
    }
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [kind, a, b](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& va = t.value(a);
    const Matrix& vb = t.value(b);
    const std::size_t R = g.rows, C = g.cols;
    if (t.requires_grad(a)) {
      Matrix ga(R, C);
      for (std::size_t i = 0; i < R; ++i) {
        const std::size_t ib = vb.rows == R ? i : 0;
        for (std::size_t j = 0; j < C; ++j) {
          const std::size_t jb = vb.cols == C ? j : 0;
          const double y = vb(ib, jb);
          switch (kind) {
            case BinKind::Add:
            case BinKind::Sub: ga(i, j) = g(i, j); break;
            case BinKind::Mul: ga(i, j) = g(i, j) * y; break;
            case BinKind::Div: ga(i, j) = g(i, j) / y; break;
          }
        }
      }
      t.accum(a, reduce_to(ga, va.rows, va.cols));
    }
    if (t.requires_grad(b)) {
      Matrix gb(R, C);
      for (std::size_t i = 0; i < R; ++i) {
        const std::size_t ia = va.rows == R ? i : 0;
        const std::size_t ib = vb.rows == R ? i : 0;
        for (std::size_t j = 0; j < C; ++j) {
          const std::size_t ja = va.cols == C ? j : 0;
          const std::size_t jb = vb.cols == C ? j : 0;
          const double x = va(ia, ja), y = vb(ib, jb);
          switch (kind) {
            case BinKind::Add: gb(i, j) = g(i, j); break;
            case BinKind::Sub: gb(i, j) = -g(i, j); break;
            case BinKind::Mul: gb(i, j) = g(i, j) * x; break;
            case BinKind::Div: gb(i, j) = -g(i, j) * x / (y * y); break;
          }
        }
      }
      t.accum(b, reduce_to(gb, vb.rows, vb.cols));
    }
  });
}

ValueId Tape::add(ValueId a, ValueId b) { return binary(BinKind::Add, a, b); }
ValueId Tape::sub(ValueId a, ValueId b) { return binary(BinKind::Sub, a, b); }
ValueId Tape::mul(ValueId a, ValueId b) { return binary(BinKind::Mul, a, b); }
ValueId Tape::div(ValueId a, ValueId b) { return binary(BinKind::Div, a, b); }

ValueId Tape::matmul(ValueId a, ValueId b) {
  Matrix out = numkit::matmul(value(a), value(b));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.requires_grad(a)) t.accum(a, numkit::matmul(g, numkit::transpose(t.value(b))));
    if (t.requires_grad(b)) t.accum(b, numkit::matmul(numkit::transpose(t.value(a)), g));
  });
}

ValueId Tape::transpose(ValueId a) {
  return push(numkit::transpose(value(a)), requires_grad(a),
              [a](Tape& t, ValueId self) {
                t.accum(a, numkit::transpose(t.nodes_[self].grad));
              });
}

// Unary elementwise ops; bwd may use x (input), y (output), g (upstream).
#define SIG_UNARY(name, fwd, bwd)                                                   \
  ValueId Tape::name(ValueId a) {                                                   \
    const Matrix& va = value(a);                                                    \
    Matrix out = va;                                                                \
    for (double& v : out.data) v = (fwd);                                           \
    return push(std::move(out), requires_grad(a), [a](Tape& t, ValueId self) {      \
      if (!t.requires_grad(a)) return;                                              \
      const Matrix& g = t.nodes_[self].grad;                                        \
      const Matrix& x = t.value(a);                                                 \
      const Matrix& y = t.value(self);                                              \
      (void)x;                                                                      \
      (void)y;                                                                      \
      Matrix ga(g.rows, g.cols);                                                    \
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] = (bwd);           \
      t.accum(a, ga);                                                               \
    });                                                                             \
  }

SIG_UNARY(neg, -v, -g.data[i])
SIG_UNARY(exp, std::exp(v), g.data[i] * y.data[i])
SIG_UNARY(log, std::log(v), g.data[i] / x.data[i])
SIG_UNARY(sqrt, std::sqrt(v), g.data[i] / (2.0 * std::max(y.data[i], 1e-12)))
SIG_UNARY(square, v * v, g.data[i] * 2.0 * x.data[i])
SIG_UNARY(relu, v > 0.0 ? v : 0.0, x.data[i] > 0.0 ? g.data[i] : 0.0)
SIG_UNARY(tanh, std::tanh(v), g.data[i] * (1.0 - y.data[i] * y.data[i]))
SIG_UNARY(sigmoid, 1.0 / (1.0 + std::exp(-v)),
          g.data[i] * y.data[i] * (1.0 - y.data[i]))

#undef SIG_UNARY

ValueId Tape::scale(ValueId a, double s) {
  Matrix out = numkit::scale(value(a), s);
  return push(std::move(out), requires_grad(a), [a, s](Tape& t, ValueId self) {
    t.accum(a, numkit::scale(t.nodes_[self].grad, s));
  });
}

ValueId Tape::add_const(ValueId a, double c) {
  Matrix out = value(a);
  for (double& v : out.data) v += c;
  return push(std::move(out), requires_grad(a), [a](Tape& t, ValueId self) {
    t.accum(a, t.nodes_[self].grad);
  });
}

ValueId Tape::sum_all(ValueId a) {
  Matrix out = Matrix::scalar(numkit::sum_all(value(a)));
  return push(std::move(out), requires_grad(a), [a](Tape& t, ValueId self) {
    const double g = t.nodes_[self].grad.data[0];
    const Matrix& x = t.value(a);
    t.accum(a, Matrix(x.rows, x.cols, g));
  });
}

ValueId Tape::mean_all(ValueId a) {
  const double n = static_cast<double>(value(a).size());
  Matrix out = Matrix::scalar(numkit::sum_all(value(a)) / n);
  return push(std::move(out), requires_grad(a), [a, n](Tape& t, ValueId self) {
    const double g = t.nodes_[self].grad.data[0] / n;
    const Matrix& x = t.value(a);
    t.accum(a, Matrix(x.rows, x.cols, g));
  });
}

ValueId Tape::row_sum(ValueId a) {
  const Matrix& va = value(a);
  Matrix out(va.rows, 1);
  for (std::size_t i = 0; i < va.rows; ++i)
    for (std::size_t j = 0; j < va.cols; ++j) out(i, 0) += va(i, j);
  return push(std::move(out), requires_grad(a), [a](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.value(a);
    Matrix ga(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) ga(i, j) = g(i, 0);
    t.accum(a, ga);
  });
}

ValueId Tape::col_sum(ValueId a) {
  const Matrix& va = value(a);
  Matrix out(1, va.cols);
  for (std::size_t i = 0; i < va.rows; ++i)
    for (std::size_t j = 0; j < va.cols; ++j) out(0, j) += va(i, j);
  return push(std::move(out), requires_grad(a), [a](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.value(a);
    Matrix ga(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) ga(i, j) = g(0, j);
    t.accum(a, ga);
  });
}

ValueId Tape::col_mean(ValueId a) {
  const double n = static_cast<double>(value(a).rows);
  return scale(col_sum(a), 1.0 / n);
}

ValueId Tape::slice_cols(ValueId a, std::size_t c0, std::size_t c1) {
  const Matrix& va = value(a);
  if (c0 > c1 || c1 > va.cols) {
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") on " + shape_str(va));
  }
  Matrix out(va.rows, c1 - c0);
  for (std::size_t i = 0; i < va.rows; ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = va(i, j);
  return push(std::move(out), requires_grad(a), [a, c0, c1](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.value(a);
    Matrix ga(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = c0; j < c1; ++j) ga(i, j) = g(i, j - c0);
    t.accum(a, ga);
  });
}

ValueId Tape::concat_cols(std::span<const ValueId> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  std::size_t rows = value(parts[0]).rows;
  std::size_t cols = 0;
  bool rg = false;
  for (ValueId p : parts) {
    if (value(p).rows != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(value(p)));
    }
    cols += value(p).cols;
    rg = rg || requires_grad(p);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (ValueId p : parts) {
    const Matrix& vp = value(p);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < vp.cols; ++j) out(i, off + j) = vp(i, j);
    off += vp.cols;
  }
  std::vector<ValueId> ps(parts.begin(), parts.end());
  return push(std::move(out), rg, [ps](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (ValueId p : ps) {
      const Matrix& vp = t.value(p);
      if (t.requires_grad(p)) {
        Matrix gp(vp.rows, vp.cols);
        for (std::size_t i = 0; i < vp.rows; ++i)
          for (std::size_t j = 0; j < vp.cols; ++j) gp(i, j) = g(i, off + j);
        t.accum(p, gp);
      }
      off += vp.cols;
    }
  });
}

ValueId Tape::gather_rows(ValueId a, std::vector<std::size_t> idx) {
  const Matrix& va = value(a);
  Matrix out(idx.size(), va.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= va.rows) throw ShapeError("gather_rows: index out of range");
    for (std::size_t j = 0; j < va.cols; ++j) out(i, j) = va(idx[i], j);
  }
  return push(std::move(out), requires_grad(a),
              [a, idx = std::move(idx)](Tape& t, ValueId self) {
                const Matrix& g = t.nodes_[self].grad;
                const Matrix& x = t.value(a);
                Matrix ga(x.rows, x.cols);
                for (std::size_t i = 0; i < idx.size(); ++i)
                  for (std::size_t j = 0; j < x.cols; ++j) ga(idx[i], j) += g(i, j);
                t.accum(a, ga);
              });
}

namespace {
// Row-wise softmax with the log-sum-exp shift.
Matrix softmax_value(const Matrix& a) {
  Matrix p(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double mx = a(i, 0);
    for (std::size_t j = 1; j < a.cols; ++j) mx = std::max(mx, a(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      p(i, j) = std::exp(a(i, j) - mx);
      z += p(i, j);
    }
    for (std::size_t j = 0; j < a.cols; ++j) p(i, j) /= z;
  }
  return p;
}
}  // namespace

ValueId Tape::softmax_rows(ValueId a) {
  return push(softmax_value(value(a)), requires_grad(a), [a](Tape& t, ValueId self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& p = t.value(self);
    Matrix ga(p.rows, p.cols);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < p.cols; ++j) dot += g(i, j) * p(i, j);
      for (std::size_t j = 0; j < p.cols; ++j) ga(i, j) = p(i, j) * (g(i, j) - dot);
    }
    t.accum(a, ga);
  });
}

ValueId Tape::log_softmax_rows(ValueId a) {
  const Matrix& va = value(a);
  Matrix p = softmax_value(va);
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < va.rows; ++i) {
    double mx = va(i, 0);
    for (std::size_t j = 1; j < va.cols; ++j) mx = std::max(mx, va(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < va.cols; ++j) z += std::exp(va(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < va.cols; ++j) out(i, j) = va(i, j) - lse;
  }
  return push(std::move(out), requires_grad(a),
              [a, p = std::move(p)](Tape& t, ValueId self) {
                const Matrix& g = t.nodes_[self].grad;
                Matrix ga(p.rows, p.cols);
                for (std::size_t i = 0; i < p.rows; ++i) {
                  double rs = 0.0;
                  for (std::size_t j = 0; j < p.cols; ++j) rs += g(i, j);
                  for (std::size_t j = 0; j < p.cols; ++j)
                    ga(i, j) = g(i, j) - p(i, j) * rs;
                }
                t.accum(a, ga);
              });
}

ValueId Tape::cross_entropy_mean(ValueId logits, std::vector<std::size_t> labels) {
  const Matrix& va = value(logits);
  if (labels.size() != va.rows) {
    throw ShapeError("cross_entropy_mean: " + std::to_string(labels.size()) +
                     " labels for " + shape_str(va));
  }
  for (std::size_t y : labels) {
    if (y >= va.cols) throw ShapeError("cross_entropy_mean: label out of range");
  }
  Matrix p = softmax_value(va);
  double loss = 0.0;
  for (std::size_t i = 0; i < va.rows; ++i) {
    double mx = va(i, 0);
    for (std::size_t j = 1; j < va.cols; ++j) mx = std::max(mx, va(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < va.cols; ++j) z += std::exp(va(i, j) - mx);
    loss += mx + std::log(z) - va(i, labels[i]);
  }
  loss /= static_cast<double>(va.rows);
  return push(Matrix::scalar(loss), requires_grad(logits),
              [logits, labels = std::move(labels), p = std::move(p)](Tape& t,
                                                                     ValueId self) {
                const double g = t.nodes_[self].grad.data[0];
                const double n = static_cast<double>(p.rows);
                Matrix ga = p;
                for (std::size_t i = 0; i < p.rows; ++i) ga(i, labels[i]) -= 1.0;
                for (double& v : ga.data) v *= g / n;
                t.accum(logits, ga);
              });
}

ValueId Tape::kl_diag_gaussian(ValueId mu, ValueId logvar) {
  const Matrix& vm = value(mu);
  const Matrix& vl = value(logvar);
  require_same_shape(vm, vl, "kl_diag_gaussian");
  double kl = 0.0;
  for (std::size_t i = 0; i < vm.data.size(); ++i) {
    const double m = vm.data[i], lv = vl.data[i];
    kl += 0.5 * (m * m + std::exp(lv) - lv - 1.0);
  }
  kl /= static_cast<double>(vm.rows);
  const bool rg = requires_grad(mu) || requires_grad(logvar);
  return push(Matrix::scalar(kl), rg, [mu, logvar](Tape& t, ValueId self) {
    const double g = t.nodes_[self].grad.data[0];
    const Matrix& vm = t.value(mu);
    const Matrix& vl = t.value(logvar);
    const double n = static_cast<double>(vm.rows);
    if (t.requires_grad(mu)) {
      Matrix gm(vm.rows, vm.cols);
      for (std::size_t i = 0; i < vm.data.size(); ++i)
        gm.data[i] = g * vm.data[i] / n;
      t.accum(mu, gm);
    }
    if (t.requires_grad(logvar)) {
      Matrix gl(vl.rows, vl.cols);
      for (std::size_t i = 0; i < vl.data.size(); ++i)
        gl.data[i] = g * 0.5 * (std::exp(vl.data[i]) - 1.0) / n;
      t.accum(logvar, gl);
    }
  });
}

ValueId Tape::dropout_train(ValueId a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ShapeError("dropout_train: rate must be in [0, 1)");
  }
  const Matrix& va = value(a);
  Matrix mask(va.rows, va.cols);
  const double keep = 1.0 - rate;
  for (double& v : mask.data) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Matrix out = numkit::hadamard(va, mask);
  return push(std::move(out), requires_grad(a),
              [a, mask = std::move(mask)](Tape& t, ValueId self) {
                t.accum(a, numkit::hadamard(t.nodes_[self].grad, mask));
              });
}

ValueId Tape::batchnorm_train(ValueId x, ValueId gamma, ValueId beta,
                              BatchNormState& state) {
  const Matrix& vx = value(x);
  const std::size_t n = vx.rows, d = vx.cols;
  if (n < 2) throw ShapeError("batchnorm_train: needs at least 2 rows");
  require_shape(value(gamma), 1, d, "batchnorm gamma");
  require_shape(value(beta), 1, d, "batchnorm beta");
  require_shape(state.running_mean, 1, d, "batchnorm running_mean");

  Matrix mu = numkit::col_mean(vx);
  Matrix var = numkit::col_var(vx);

  Matrix inv_std(1, d);
  for (std::size_t j = 0; j < d; ++j) inv_std.data[j] = 1.0 / std::sqrt(var.data[j] + state.eps);

  Matrix xhat(n, d);
  Matrix out(n, d);
  const Matrix& g = value(gamma);
  const Matrix& b = value(beta);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (vx(i, j) - mu.data[j]) * inv_std.data[j];
      out(i, j) = g.data[j] * xhat(i, j) + b.data[j];
    }

  for (std::size_t j = 0; j < d; ++j) {
    state.running_mean.data[j] =
        state.decay * state.running_mean.data[j] + (1.0 - state.decay) * mu.data[j];
    state.running_var.data[j] =
        state.decay * state.running_var.data[j] + (1.0 - state.decay) * var.data[j];
  }

  const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  return push(std::move(out), rg,
              [x, gamma, beta, xhat = std::move(xhat),
               inv_std = std::move(inv_std)](Tape& t, ValueId self) {
                const Matrix& gout = t.nodes_[self].grad;
                const std::size_t n = gout.rows, d = gout.cols;
                const Matrix& gm = t.value(gamma);
                if (t.requires_grad(beta)) {
                  Matrix gb(1, d);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gb.data[j] += gout(i, j);
                  t.accum(beta, gb);
                }
                if (t.requires_grad(gamma)) {
                  Matrix gg(1, d);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                      gg.data[j] += gout(i, j) * xhat(i, j);
                  t.accum(gamma, gg);
                }
                if (t.requires_grad(x)) {
                  // Standard batchnorm backward through batch mean/var.
                  Matrix sum_dxhat(1, d), sum_dxhat_xhat(1, d);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dxh = gout(i, j) * gm.data[j];
                      sum_dxhat.data[j] += dxh;
                      sum_dxhat_xhat.data[j] += dxh * xhat(i, j);
                    }
                  Matrix gx(n, d);
                  const double nn = static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dxh = gout(i, j) * gm.data[j];
                      gx(i, j) = inv_std.data[j] / nn *
                                 (nn * dxh - sum_dxhat.data[j] -
                                  xhat(i, j) * sum_dxhat_xhat.data[j]);
                    }
                  t.accum(x, gx);
                }
              });
}

ValueId Tape::batchnorm_eval(ValueId x, ValueId gamma, ValueId beta,
                             const BatchNormState& state) {
  const Matrix& vx = value(x);
  const std::size_t n = vx.rows, d = vx.cols;
  require_shape(value(gamma), 1, d, "batchnorm gamma");
  require_shape(value(beta), 1, d, "batchnorm beta");
  require_shape(state.running_mean, 1, d, "batchnorm running_mean");

  Matrix inv_std(1, d);
  for (std::size_t j = 0; j < d; ++j)
    inv_std.data[j] = 1.0 / std::sqrt(state.running_var.data[j] + state.eps);

  Matrix xhat(n, d);
  Matrix out(n, d);
  const Matrix& g = value(gamma);
  const Matrix& b = value(beta);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (vx(i, j) - state.running_mean.data[j]) * inv_std.data[j];
      out(i, j) = g.data[j] * xhat(i, j) + b.data[j];
    }
  const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  return push(std::move(out), rg,
              [x, gamma, beta, xhat = std::move(xhat),
               inv_std = std::move(inv_std)](Tape& t, ValueId self) {
                const Matrix& gout = t.nodes_[self].grad;
                const std::size_t n = gout.rows, d = gout.cols;
                const Matrix& gm = t.value(gamma);
                if (t.requires_grad(beta)) {
                  Matrix gb(1, d);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gb.data[j] += gout(i, j);
                  t.accum(beta, gb);
                }
                if (t.requires_grad(gamma)) {
                  Matrix gg(1, d);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                      gg.data[j] += gout(i, j) * xhat(i, j);
                  t.accum(gamma, gg);
                }
                if (t.requires_grad(x)) {
                  Matrix gx(n, d);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                      gx(i, j) = gout(i, j) * gm.data[j] * inv_std.data[j];
                  t.accum(x, gx);
                }
              });
}

ValueId Tape::embed_rows(ValueId table, std::vector<std::size_t> idx) {
  return gather_rows(table, std::move(idx));
}

}  // namespace sig::numkit
