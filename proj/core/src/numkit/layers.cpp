#include "sig/numkit/layers.hpp"

#include <cmath>

namespace sig::numkit {

Layer Layer::affine(std::size_t in, std::size_t out, Rng& rng, double weight_std) {
  Layer l;
  l.kind = LayerKind::Affine;
  const double std_dev = weight_std > 0.0 ? weight_std : std::sqrt(2.0 / static_cast<double>(in));
  l.weight = rng.gaussian_matrix(in, out, std_dev);
  l.bias = Matrix(1, out, 0.0);
  return l;
}

Layer Layer::activation(LayerKind kind) {
  Layer l;
  l.kind = kind;
  return l;
}

Layer Layer::batchnorm(std::size_t d, double decay, double eps) {
  Layer l;
  l.kind = LayerKind::BatchNorm;
  l.gamma = Matrix(1, d, 1.0);
  l.beta = Matrix(1, d, 0.0);
  l.bn_state = BatchNormState(d, decay, eps);
  return l;
}

Layer Layer::dropout(double rate) {
  Layer l;
  l.kind = LayerKind::Dropout;
  l.dropout_rate = rate;
  return l;
}

std::vector<Matrix*> Layer::parameters() {
  switch (kind) {
    case LayerKind::Affine: return {&weight, &bias};
    case LayerKind::BatchNorm: return {&gamma, &beta};
    default: return {};
  }
}

LayerVars bind_layer_params(Tape& tape, Layer& layer) {
  LayerVars v;
  for (Matrix* m : layer.parameters()) v.ids.push_back(tape.param(*m));
  return v;
}

ValueId layer_forward(Tape& tape, Layer& layer, const LayerVars& vars, ValueId input,
                      Mode mode, Rng* rng) {
  require_finite(tape.value(input), "layer_forward input");
  switch (layer.kind) {
    case LayerKind::Affine:
      return tape.add(tape.matmul(input, vars.ids.at(0)), vars.ids.at(1));
    case LayerKind::Relu:
      return tape.relu(input);
    case LayerKind::Tanh:
      return tape.tanh(input);
    case LayerKind::Sigmoid:
      return tape.sigmoid(input);
    case LayerKind::Softmax:
      return tape.softmax_rows(input);
    case LayerKind::BatchNorm:
      if (mode == Mode::Train) {
        return tape.batchnorm_train(input, vars.ids.at(0), vars.ids.at(1),
                                    layer.bn_state);
      }
      return tape.batchnorm_eval(input, vars.ids.at(0), vars.ids.at(1), layer.bn_state);
    case LayerKind::Dropout:
      if (mode == Mode::Eval) return input;
      if (rng == nullptr) {
        throw ShapeError("layer_forward: dropout needs an rng in train mode");
      }
      return tape.dropout_train(input, layer.dropout_rate, *rng);
  }
  throw ShapeError("layer_forward: unknown layer kind");
}

OptimState::OptimState(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (lr <= 0.0) throw ShapeError("OptimState: lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ShapeError("OptimState: momentum must be in [0, 1)");
  }
}

void OptimState::step(const std::vector<Matrix*>& params,
                      const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("OptimState::step: param/grad count mismatch");
  }
  if (velocity_.empty()) {
    for (const Matrix* p : params) velocity_.emplace_back(p->rows, p->cols);
  }
  if (velocity_.size() != params.size()) {
    throw ShapeError("OptimState::step: parameter count changed between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    Matrix& v = velocity_[k];
    require_same_shape(p, g, "OptimState::step grad");
    require_same_shape(p, v, "OptimState::step velocity");
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      v.data[i] = momentum_ * v.data[i] + g.data[i];
      p.data[i] -= lr_ * v.data[i];
    }
  }
}

void sgd_momentum_step(const std::vector<Matrix*>& params,
                       const std::vector<const Matrix*>& grads, OptimState& state) {
  state.step(params, grads);
}

}  // namespace sig::numkit
