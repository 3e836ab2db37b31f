#pragma once

#include <array>
#include <string>
#include <vector>

#include "sig/numkit/layers.hpp"
#include "sig/numkit/tape.hpp"

namespace sig::sigmodel {

struct PartitionDims {
  std::size_t n1{0}, n2{2}, n3{2}, n4{0};

  std::size_t total() const { return n1 + n2 + n3 + n4; }
  void validate() const;
};

enum class AlignBlock { Z3, Z2 };

struct TrainConfig {
  double lr{0.0035};
  double momentum{0.9};
  std::size_t epochs{50};
  std::size_t batch_size{768};
  double alpha{1e-5};        // alignment weight
  double beta{0.1};          // vae weight
  double kl_weight{1.0};
  std::uint64_t seed{0};
  AlignBlock align_block{AlignBlock::Z3};
  double centroid_decay{0.9};
  bool mcc_confusion_enabled{false};

  // architecture
  std::size_t hidden_width{200};
  std::size_t hidden_layers{1};
  std::size_t clf_hidden{64};
  std::size_t embed_dim{4};
  double dropout_rate{0.1};
  double bn_decay{0.9};
  double bn_eps{1e-5};

  void validate() const;
};

/// Encoder (bottleneck stack + mu/logvar heads), decoder, classifier over
/// [z2 | z3 | e_u], and the domain embedding table.
class SigModel {
 public:
  static SigModel init(std::size_t input_dim, std::size_t num_domains,
                       std::size_t num_classes, const PartitionDims& part,
                       const TrainConfig& cfg);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_domains() const { return num_domains_; }
  std::size_t num_classes() const { return num_classes_; }
  const PartitionDims& partition_dims() const { return part_; }
  const TrainConfig& config() const { return cfg_; }

  std::vector<numkit::Matrix*> parameters();

  /// Tape ids for one forward/backward pass, aligned with parameters().
  struct Pass {
    std::vector<numkit::LayerVars> enc_vars;
    numkit::LayerVars mu_vars, logvar_vars;
    std::vector<numkit::LayerVars> dec_vars;
    std::vector<numkit::LayerVars> clf_vars;
    numkit::ValueId embedding{0};
    std::vector<numkit::ValueId> param_ids;
  };

  Pass bind(numkit::Tape& tape);

  /// (mu, logvar), both N x n.
  std::pair<numkit::ValueId, numkit::ValueId> encode(numkit::Tape& tape, Pass& pass,
                                                     numkit::ValueId x,
                                                     numkit::Mode mode,
                                                     numkit::Rng* rng = nullptr);
  /// z = mu + exp(0.5 logvar) * eps with eps a constant N(0,1) draw.
  numkit::ValueId reparameterize(numkit::Tape& tape, numkit::ValueId mu,
                                 numkit::ValueId logvar, const numkit::Matrix& eps);
  std::array<numkit::ValueId, 4> partition(numkit::Tape& tape, numkit::ValueId z) const;
  numkit::ValueId decode(numkit::Tape& tape, Pass& pass, numkit::ValueId z,
                         numkit::Mode mode, numkit::Rng* rng = nullptr);
  numkit::ValueId classify(numkit::Tape& tape, Pass& pass, numkit::ValueId z2,
                           numkit::ValueId z3, const std::vector<std::size_t>& u_idx);

  // Eval-mode conveniences (deterministic, no sampling).
  numkit::Matrix infer_latents(const numkit::Matrix& x);
  struct Prediction {
    std::vector<std::size_t> labels;
    numkit::Matrix probabilities;  // N x C
  };
  Prediction predict(const numkit::Matrix& x, const std::vector<std::size_t>& u_idx);
  Prediction predict_target(const numkit::Matrix& x, std::size_t u_target);

  // Checkpoint round trip (versioned JSON, exact doubles).
  std::string to_json() const;
  static SigModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static SigModel load(const std::string& path);

 private:
  SigModel() = default;

  std::size_t input_dim_{0};
  std::size_t num_domains_{0};
  std::size_t num_classes_{0};
  PartitionDims part_;
  TrainConfig cfg_;

  std::vector<numkit::Layer> enc_stack_;
  numkit::Layer f_mu_, f_logvar_;
  std::vector<numkit::Layer> dec_stack_;
  std::vector<numkit::Layer> clf_stack_;
  numkit::Matrix embedding_;  // U x embed_dim

  friend struct CheckpointCodec;
};

/// Mean squared reconstruction error (feature-summed, batch-averaged) plus
/// kl_weight times the diagonal-Gaussian KL.
numkit::ValueId loss_vae(numkit::Tape& tape, numkit::ValueId x_hat, numkit::ValueId x,
                         numkit::ValueId mu, numkit::ValueId logvar, double kl_weight,
                         numkit::ValueId* recon_out = nullptr,
                         numkit::ValueId* kl_out = nullptr);

/// Mean cross-entropy; optionally adds the class-confusion penalty
/// (temperature 2.5, weight 1).
numkit::ValueId loss_y(numkit::Tape& tape, numkit::ValueId logits,
                       const std::vector<std::size_t>& labels,
                       bool mcc_confusion_enabled);

/// The class-confusion penalty alone: temperature-scaled probabilities,
/// certainty-weighted confusion matrix, row-normalized, off-diagonal mass / C.
numkit::ValueId class_confusion_penalty(numkit::Tape& tape, numkit::ValueId logits,
                                        double temperature = 2.5);

}  // namespace sig::sigmodel
