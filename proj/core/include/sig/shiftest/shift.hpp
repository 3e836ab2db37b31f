#pragma once

#include <optional>
#include <vector>

#include "sig/numkit/matrix.hpp"

namespace sig::shiftest {

/// C x C joint empirical distribution over (predicted, true) labels on source
/// validation data; entries sum to 1.
struct ConfusionJoint {
  numkit::Matrix joint;  // [i][j] = P(pred = i, true = j)
  std::size_t sample_count{0};

  std::size_t num_classes() const { return joint.rows; }
  /// Source label marginal, the column sums.
  std::vector<double> true_marginal() const;
};

ConfusionJoint confusion_joint(const std::vector<std::size_t>& pred_labels,
                               const std::vector<std::size_t>& true_labels,
                               std::size_t num_classes);

/// Estimated target label distribution.
struct TargetLabelDist {
  std::vector<double> q;
  double condition_number{0.0};
  /// Set when the clipped linear solution was all zero and q fell back to the
  /// raw target prediction frequencies.
  bool fallback{false};
};

/// Black-box shift estimation: converts the joint confusion to the
/// class-conditional matrix, solves for the target label distribution against
/// the target prediction frequencies mu_hat, clips negatives and renormalizes.
/// Ill-conditioned systems (cond > cond_threshold) use the least-squares
/// pseudo-solution.
TargetLabelDist bbse(const ConfusionJoint& cj, const std::vector<double>& mu_hat,
                     double cond_threshold = 1e6);

/// w = 1 + exp(-H(p)) for the mean predicted probability vector of one class.
double entropy_weight(const std::vector<double>& mean_probs);

struct AlignWeights {
  std::vector<double> w;
};

/// Per-class weights; classes with no pseudo-labeled target samples get w = 1.
AlignWeights align_weights(
    const std::vector<std::optional<std::vector<double>>>& mean_probs_per_class);

/// EMA class centroids over the aligned latent block.
struct ClassCentroids {
  numkit::Matrix centroids;         // C x d
  std::vector<std::size_t> counts;  // observations folded in per class
  double decay{0.9};

  ClassCentroids(std::size_t num_classes, std::size_t dim, double decay_ = 0.9)
      : centroids(num_classes, dim), counts(num_classes, 0), decay(decay_) {}

  bool present(std::size_t c) const { return counts[c] > 0; }
};

/// For each class present in the batch: c <- decay * c + (1 - decay) * mean;
/// a class's first observation initializes its centroid directly.
void update_centroids(ClassCentroids& cent, const numkit::Matrix& z_block,
                      const std::vector<std::size_t>& labels);

/// (1/C) sum over classes present on both sides of w_i * q_i * ||c_S - c_T||_2.
double class_aware_alignment(const ClassCentroids& cent_s, const ClassCentroids& cent_t,
                             const TargetLabelDist& q, const AlignWeights& w);

}  // namespace sig::shiftest
