#include "sig/sigmodel/model.hpp"

#include <cmath>

namespace sig::sigmodel {

using numkit::Layer;
using numkit::LayerKind;
using numkit::LayerVars;
using numkit::Matrix;
using numkit::Mode;
using numkit::Rng;
using numkit::Tape;
using numkit::ValueId;

void PartitionDims::validate() const {
  if (n2 + n3 < 1) {
    throw numkit::ShapeError("PartitionDims: n2 + n3 must be >= 1");
  }
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw numkit::ShapeError("TrainConfig: lr must be > 0");
  if (alpha < 0.0 || beta < 0.0) {
    throw numkit::ShapeError("TrainConfig: alpha and beta must be >= 0");
  }
  if (batch_size < 2) {
    throw numkit::ShapeError("TrainConfig: batch_size must be >= 2 (batchnorm)");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw numkit::ShapeError("TrainConfig: momentum must be in [0, 1)");
  }
  if (kl_weight < 0.0) throw numkit::ShapeError("TrainConfig: kl_weight must be >= 0");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw numkit::ShapeError("TrainConfig: dropout_rate must be in [0, 1)");
  }
}

namespace {

std::vector<Layer> make_mlp_stack(std::size_t in_dim, const TrainConfig& cfg,
                                  Rng& rng) {
  std::vector<Layer> stack;
  std::size_t d = in_dim;
  for (std::size_t l = 0; l < cfg.hidden_layers; ++l) {
    stack.push_back(Layer::affine(d, cfg.hidden_width, rng));
    stack.push_back(Layer::activation(LayerKind::Relu));
    stack.push_back(Layer::batchnorm(cfg.hidden_width, cfg.bn_decay, cfg.bn_eps));
    stack.push_back(Layer::dropout(cfg.dropout_rate));
    d = cfg.hidden_width;
  }
  return stack;
}

ValueId run_stack(Tape& tape, std::vector<Layer>& stack, std::vector<LayerVars>& vars,
                  ValueId h, Mode mode, Rng* rng) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    h = layer_forward(tape, stack[i], vars[i], h, mode, rng);
  }
  return h;
}

}  // namespace

SigModel SigModel::init(std::size_t input_dim, std::size_t num_domains,
                        std::size_t num_classes, const PartitionDims& part,
                        const TrainConfig& cfg) {
  part.validate();
  cfg.validate();
  if (input_dim == 0 || num_domains == 0 || num_classes < 2) {
    throw numkit::ShapeError("SigModel::init: bad dimensions");
  }
  SigModel m;
  m.input_dim_ = input_dim;
  m.num_domains_ = num_domains;
  m.num_classes_ = num_classes;
  m.part_ = part;
  m.cfg_ = cfg;

  const std::size_t n = part.total();
  Rng rng(cfg.seed, 42);

  m.enc_stack_ = make_mlp_stack(input_dim, cfg, rng);
  const std::size_t enc_out = cfg.hidden_layers > 0 ? cfg.hidden_width : input_dim;
  m.f_mu_ = Layer::affine(enc_out, n, rng, std::sqrt(1.0 / static_cast<double>(enc_out)));
  m.f_logvar_ =
      Layer::affine(enc_out, n, rng, std::sqrt(1.0 / static_cast<double>(enc_out)));
  // Start near-deterministic so early classification is not noise-bound.
  for (double& v : m.f_logvar_.bias.data) v = -4.0;

  m.dec_stack_ = make_mlp_stack(n, cfg, rng);
  const std::size_t dec_out = cfg.hidden_layers > 0 ? cfg.hidden_width : n;
  m.dec_stack_.push_back(
      Layer::affine(dec_out, input_dim, rng, std::sqrt(1.0 / static_cast<double>(dec_out))));

  const std::size_t clf_in = part.n2 + part.n3 + cfg.embed_dim;
  m.clf_stack_.push_back(Layer::affine(clf_in, cfg.clf_hidden, rng));
  m.clf_stack_.push_back(Layer::activation(LayerKind::Relu));
  m.clf_stack_.push_back(Layer::affine(
      cfg.clf_hidden, num_classes, rng, std::sqrt(1.0 / static_cast<double>(cfg.clf_hidden))));

  m.embedding_ = rng.gaussian_matrix(num_domains, cfg.embed_dim,
                                     1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
  return m;
}

std::vector<Matrix*> SigModel::parameters() {
  std::vector<Matrix*> out;
  auto collect = [&out](std::vector<Layer>& stack) {
    for (Layer& l : stack)
      for (Matrix* p : l.parameters()) out.push_back(p);
  };
  collect(enc_stack_);
  for (Matrix* p : f_mu_.parameters()) out.push_back(p);
  for (Matrix* p : f_logvar_.parameters()) out.push_back(p);
  collect(dec_stack_);
  collect(clf_stack_);
  out.push_back(&embedding_);
  return out;
}

SigModel::Pass SigModel::bind(Tape& tape) {
  Pass pass;
  auto bind_stack = [&](std::vector<Layer>& stack, std::vector<LayerVars>& vars) {
    for (Layer& l : stack) {
      vars.push_back(bind_layer_params(tape, l));
      for (ValueId id : vars.back().ids) pass.param_ids.push_back(id);
    }
  };
  bind_stack(enc_stack_, pass.enc_vars);
  pass.mu_vars = bind_layer_params(tape, f_mu_);
  for (ValueId id : pass.mu_vars.ids) pass.param_ids.push_back(id);
  pass.logvar_vars = bind_layer_params(tape, f_logvar_);
  for (ValueId id : pass.logvar_vars.ids) pass.param_ids.push_back(id);
  bind_stack(dec_stack_, pass.dec_vars);
  bind_stack(clf_stack_, pass.clf_vars);
  pass.embedding = tape.param(embedding_);
  pass.param_ids.push_back(pass.embedding);
  return pass;
}

std::pair<ValueId, ValueId> SigModel::encode(Tape& tape, Pass& pass, ValueId x,
                                             Mode mode, Rng* rng) {
  if (tape.value(x).cols != input_dim_) {
    throw numkit::ShapeError("SigModel::encode: input cols " +
                             numkit::shape_str(tape.value(x)) + " vs input dim " +
                             std::to_string(input_dim_));
  }
  ValueId h = run_stack(tape, enc_stack_, pass.enc_vars, x, mode, rng);
  ValueId mu = layer_forward(tape, f_mu_, pass.mu_vars, h, mode, rng);
  ValueId logvar = layer_forward(tape, f_logvar_, pass.logvar_vars, h, mode, rng);
  return {mu, logvar};
}

ValueId SigModel::reparameterize(Tape& tape, ValueId mu, ValueId logvar,
                                 const Matrix& eps) {
  numkit::require_same_shape(tape.value(mu), eps, "reparameterize eps");
  const ValueId std_dev = tape.exp(tape.scale(logvar, 0.5));
  return tape.add(mu, tape.mul(std_dev, tape.constant(eps)));
}

std::array<ValueId, 4> SigModel::partition(Tape& tape, ValueId z) const {
  const std::size_t n = part_.total();
  if (tape.value(z).cols != n) {
    throw numkit::ShapeError("SigModel::partition: z cols " +
                             numkit::shape_str(tape.value(z)) + " vs n " +
                             std::to_string(n));
  }
  const std::size_t o1 = part_.n1;
  const std::size_t o2 = o1 + part_.n2;
  const std::size_t o3 = o2 + part_.n3;
  return {tape.slice_cols(z, 0, o1), tape.slice_cols(z, o1, o2),
          tape.slice_cols(z, o2, o3), tape.slice_cols(z, o3, n)};
}

ValueId SigModel::decode(Tape& tape, Pass& pass, ValueId z, Mode mode, Rng* rng) {
  return run_stack(tape, dec_stack_, pass.dec_vars, z, mode, rng);
}

ValueId SigModel::classify(Tape& tape, Pass& pass, ValueId z2, ValueId z3,
                           const std::vector<std::size_t>& u_idx) {
  for (std::size_t u : u_idx) {
    if (u >= num_domains_) {
      throw numkit::ShapeError("SigModel::classify: unknown domain index " +
                               std::to_string(u));
    }
  }
  const ValueId emb = tape.embed_rows(pass.embedding, u_idx);
  const std::array<ValueId, 3> parts{z2, z3, emb};
  ValueId h = tape.concat_cols(parts);
  for (std::size_t i = 0; i < clf_stack_.size(); ++i) {
    h = layer_forward(tape, clf_stack_[i], pass.clf_vars[i], h, Mode::Eval, nullptr);
  }
  return h;
}

Matrix SigModel::infer_latents(const Matrix& x) {
  Tape tape;
  Pass pass = bind(tape);
  const ValueId xid = tape.constant(x);
  auto [mu, logvar] = encode(tape, pass, xid, Mode::Eval, nullptr);
  (void)logvar;
  return tape.value(mu);
}

SigModel::Prediction SigModel::predict(const Matrix& x,
                                       const std::vector<std::size_t>& u_idx) {
  if (u_idx.size() != x.rows) {
    throw numkit::ShapeError("SigModel::predict: one domain index per row required");
  }
  Tape tape;
  Pass pass = bind(tape);
  const ValueId xid = tape.constant(x);
  auto [mu, logvar] = encode(tape, pass, xid, Mode::Eval, nullptr);
  (void)logvar;
  const auto z = partition(tape, mu);
  const ValueId logits = classify(tape, pass, z[1], z[2], u_idx);
  const ValueId probs = tape.softmax_rows(logits);

  Prediction pred;
  pred.probabilities = tape.value(probs);
  pred.labels.resize(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < num_classes_; ++c) {
      // Strict > keeps the lowest class index on ties.
      if (pred.probabilities(i, c) > pred.probabilities(i, best)) best = c;
    }
    pred.labels[i] = best;
  }
  return pred;
}

SigModel::Prediction SigModel::predict_target(const Matrix& x, std::size_t u_target) {
  return predict(x, std::vector<std::size_t>(x.rows, u_target));
}

ValueId loss_vae(Tape& tape, ValueId x_hat, ValueId x, ValueId mu, ValueId logvar,
                 double kl_weight, ValueId* recon_out, ValueId* kl_out) {
  const double n = static_cast<double>(tape.value(x).rows);
  const ValueId recon =
      tape.scale(tape.sum_all(tape.square(tape.sub(x_hat, x))), 1.0 / n);
  const ValueId kl = tape.kl_diag_gaussian(mu, logvar);
  if (recon_out != nullptr) *recon_out = recon;
  if (kl_out != nullptr) *kl_out = kl;
  return tape.add(recon, tape.scale(kl, kl_weight));
}

ValueId class_confusion_penalty(Tape& tape, ValueId logits, double temperature) {
  const std::size_t n = tape.value(logits).rows;
  const std::size_t c = tape.value(logits).cols;
  const ValueId probs = tape.softmax_rows(tape.scale(logits, 1.0 / temperature));
  // Certainty weights from per-row prediction entropy, normalized to sum to N.
  const ValueId ent =
      tape.neg(tape.row_sum(tape.mul(probs, tape.log(tape.add_const(probs, 1e-12)))));
  const ValueId cert = tape.add_const(tape.exp(tape.neg(ent)), 1.0);  // N x 1
  const ValueId weights =
      tape.div(tape.scale(cert, static_cast<double>(n)), tape.sum_all(cert));
  const ValueId weighted = tape.mul(probs, weights);
  const ValueId confusion = tape.matmul(tape.transpose(probs), weighted);  // C x C
  const ValueId normalized = tape.div(confusion, tape.row_sum(confusion));
  const ValueId diag_mass =
      tape.sum_all(tape.mul(normalized, tape.constant(Matrix::identity(c))));
  const ValueId off_diag = tape.sub(tape.sum_all(normalized), diag_mass);
  return tape.scale(off_diag, 1.0 / static_cast<double>(c));
}

ValueId loss_y(Tape& tape, ValueId logits, const std::vector<std::size_t>& labels,
               bool mcc_confusion_enabled) {
  const ValueId ce = tape.cross_entropy_mean(logits, labels);
  if (!mcc_confusion_enabled) return ce;
  return tape.add(ce, class_confusion_penalty(tape, logits));
}

}  // namespace sig::sigmodel
