#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sig/numkit/matrix.hpp"
#include "sig/numkit/rng.hpp"

namespace sig::numkit {

using ValueId = std::size_t;

/// Running batch statistics owned by a batchnorm layer, updated on every
/// train-mode forward and read by eval-mode forwards.
struct BatchNormState {
  Matrix running_mean;  // 1 x d
  Matrix running_var;   // 1 x d, biased
  double decay{0.9};
  double eps{1e-5};

  explicit BatchNormState(std::size_t d = 0, double decay_ = 0.9, double eps_ = 1e-5)
      : running_mean(1, d, 0.0), running_var(1, d, 1.0), decay(decay_), eps(eps_) {}
};

/// Reverse-mode tape over a fixed primitive set. Nodes are appended in
/// topological order; backward() walks them once in reverse. The tape is
/// rebuilt per minibatch; reset() keeps buffer capacity.
class Tape {
 public:
  ValueId constant(Matrix v);
  ValueId param(Matrix v);

  const Matrix& value(ValueId id) const { return nodes_[id].value; }
  /// Zero matrix for parameters the loss never touched.
  const Matrix& grad(ValueId id);
  bool requires_grad(ValueId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Elementwise binary ops with limited broadcasting: shapes must be equal or
  // one operand may be 1x1, 1xd, or Nx1 against an Nxd operand.
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId div(ValueId a, ValueId b);

  ValueId matmul(ValueId a, ValueId b);
  ValueId transpose(ValueId a);

  ValueId neg(ValueId a);
  ValueId exp(ValueId a);
  ValueId log(ValueId a);
  ValueId sqrt(ValueId a);
  ValueId square(ValueId a);
  ValueId relu(ValueId a);
  ValueId tanh(ValueId a);
  ValueId sigmoid(ValueId a);
  ValueId scale(ValueId a, double s);
  ValueId add_const(ValueId a, double c);

  ValueId sum_all(ValueId a);   // -> 1x1
  ValueId mean_all(ValueId a);  // -> 1x1
  ValueId row_sum(ValueId a);   // Nxd -> Nx1
  ValueId col_sum(ValueId a);   // Nxd -> 1xd
  ValueId col_mean(ValueId a);  // Nxd -> 1xd

  ValueId slice_cols(ValueId a, std::size_t c0, std::size_t c1);  // [c0, c1)
  ValueId concat_cols(std::span<const ValueId> parts);
  ValueId gather_rows(ValueId a, std::vector<std::size_t> idx);

  ValueId softmax_rows(ValueId a);
  ValueId log_softmax_rows(ValueId a);
  /// Mean over rows of -log softmax(logits)[label].
  ValueId cross_entropy_mean(ValueId logits, std::vector<std::size_t> labels);
  /// Mean over batch rows of sum_d 0.5 (mu^2 + e^logvar - logvar - 1).
  ValueId kl_diag_gaussian(ValueId mu, ValueId logvar);

  ValueId dropout_train(ValueId a, double rate, Rng& rng);
  ValueId batchnorm_train(ValueId x, ValueId gamma, ValueId beta, BatchNormState& state);
  ValueId batchnorm_eval(ValueId x, ValueId gamma, ValueId beta,
                         const BatchNormState& state);
  /// Rows of a U x d embedding table selected by index; grads scatter-add.
  ValueId embed_rows(ValueId table, std::vector<std::size_t> idx);

  void backward(ValueId loss);
  void reset();

  // Used by backward closures.
  void accum(ValueId id, const Matrix& g);
  double* grad_data(ValueId id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched
    bool requires_grad{false};
    std::function<void(Tape&, ValueId)> back;
  };

  ValueId push(Matrix v, bool requires_grad, std::function<void(Tape&, ValueId)> back);
  Matrix& grad_ref(ValueId id);

  enum class BinKind { Add, Sub, Mul, Div };
  ValueId binary(BinKind kind, ValueId a, ValueId b);

  std::vector<Node> nodes_;
  Matrix zero_;
};

}  // namespace sig::numkit
