#pragma once

#include <optional>

#include "sig/numkit/tape.hpp"

namespace sig::numkit {

enum class LayerKind { Affine, Relu, Tanh, Sigmoid, Softmax, BatchNorm, Dropout };
enum class Mode { Train, Eval };

/// One network layer: parameters plus any running state. Parameter-free kinds
/// hold empty matrices.
struct Layer {
  LayerKind kind{LayerKind::Relu};
  Matrix weight;  // affine: in x out
  Matrix bias;    // affine: 1 x out
  Matrix gamma;   // batchnorm: 1 x d
  Matrix beta;    // batchnorm: 1 x d
  BatchNormState bn_state;
  double dropout_rate{0.1};

  /// weight_std <= 0 picks He init, sqrt(2 / in).
  static Layer affine(std::size_t in, std::size_t out, Rng& rng, double weight_std = -1.0);
  static Layer activation(LayerKind kind);
  static Layer batchnorm(std::size_t d, double decay = 0.9, double eps = 1e-5);
  static Layer dropout(double rate);

  std::vector<Matrix*> parameters();
};

/// Tape ids of a layer's parameters for one forward/backward pass.
struct LayerVars {
  std::vector<ValueId> ids;
};

LayerVars bind_layer_params(Tape& tape, Layer& layer);

/// Standard layer semantics on the tape. Batchnorm uses batch statistics in
/// train mode (and updates the running state) and running statistics in eval
/// mode; dropout is identity in eval mode and needs an rng in train mode.
ValueId layer_forward(Tape& tape, Layer& layer, const LayerVars& vars, ValueId input,
                      Mode mode, Rng* rng = nullptr);

/// Momentum SGD state: velocity buffers mirroring parameter shapes.
/// Update: v <- momentum * v + g; p <- p - lr * v.
class OptimState {
 public:
  OptimState(double lr, double momentum);

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);

 private:
  double lr_;
  double momentum_;
  std::vector<Matrix> velocity_;
};

void sgd_momentum_step(const std::vector<Matrix*>& params,
                       const std::vector<const Matrix*>& grads, OptimState& state);

}  // namespace sig::numkit
