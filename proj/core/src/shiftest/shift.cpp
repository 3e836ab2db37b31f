#include "sig/shiftest/shift.hpp"

#include <cmath>

#include "sig/numkit/linalg.hpp"

namespace sig::shiftest {

std::vector<double> ConfusionJoint::true_marginal() const {
  std::vector<double> p(joint.cols, 0.0);
  for (std::size_t i = 0; i < joint.rows; ++i)
    for (std::size_t j = 0; j < joint.cols; ++j) p[j] += joint(i, j);
  return p;
}

ConfusionJoint confusion_joint(const std::vector<std::size_t>& pred_labels,
                               const std::vector<std::size_t>& true_labels,
                               std::size_t num_classes) {
  if (pred_labels.empty() || pred_labels.size() != true_labels.size()) {
    throw numkit::ShapeError("confusion_joint: needs equal-length non-empty sequences");
  }
  ConfusionJoint cj;
  cj.joint = numkit::Matrix(num_classes, num_classes);
  cj.sample_count = pred_labels.size();
  for (std::size_t k = 0; k < pred_labels.size(); ++k) {
    if (pred_labels[k] >= num_classes || true_labels[k] >= num_classes) {
      throw numkit::ShapeError("confusion_joint: label out of range");
    }
    cj.joint(pred_labels[k], true_labels[k]) += 1.0;
  }
  for (double& v : cj.joint.data) v /= static_cast<double>(cj.sample_count);
  return cj;
}

TargetLabelDist bbse(const ConfusionJoint& cj, const std::vector<double>& mu_hat,
                     double cond_threshold) {
  const std::size_t C = cj.num_classes();
  if (mu_hat.size() != C) throw numkit::ShapeError("bbse: mu_hat length mismatch");

  // Class-conditional confusion M[i][j] = P(pred = i | true = j). Solving
  // M q = mu_hat yields the target label distribution directly.
  const std::vector<double> p_src = cj.true_marginal();
  numkit::Matrix m(C, C);
  for (std::size_t j = 0; j < C; ++j) {
    if (p_src[j] <= 0.0) continue;  // absent class: column stays zero
    for (std::size_t i = 0; i < C; ++i) m(i, j) = cj.joint(i, j) / p_src[j];
  }

  TargetLabelDist out;
  out.condition_number = numkit::condition_number(m);

  numkit::Matrix rhs(C, 1);
  for (std::size_t i = 0; i < C; ++i) rhs(i, 0) = mu_hat[i];

  numkit::Matrix sol;
  if (std::isfinite(out.condition_number) && out.condition_number <= cond_threshold) {
    sol = numkit::solve(m, rhs);
  } else {
    sol = numkit::lstsq(m, rhs);
  }

  out.q.assign(C, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    out.q[i] = std::max(0.0, sol(i, 0));
    total += out.q[i];
  }
  if (total <= 0.0) {
    out.q = mu_hat;
    out.fallback = true;
    return out;
  }
  for (double& v : out.q) v /= total;
  return out;
}

double entropy_weight(const std::vector<double>& mean_probs) {
  double h = 0.0;
  for (double p : mean_probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return 1.0 + std::exp(-h);
}

AlignWeights align_weights(
    const std::vector<std::optional<std::vector<double>>>& mean_probs_per_class) {
  AlignWeights aw;
  aw.w.reserve(mean_probs_per_class.size());
  for (const auto& mp : mean_probs_per_class) {
    aw.w.push_back(mp.has_value() ? entropy_weight(*mp) : 1.0);
  }
  return aw;
}

void update_centroids(ClassCentroids& cent, const numkit::Matrix& z_block,
                      const std::vector<std::size_t>& labels) {
  if (labels.size() != z_block.rows) {
    throw numkit::ShapeError("update_centroids: label count vs rows");
  }
  const std::size_t C = cent.counts.size();
  const std::size_t d = cent.centroids.cols;
  if (z_block.cols != d) throw numkit::ShapeError("update_centroids: block dim");

  std::vector<std::size_t> n(C, 0);
  numkit::Matrix mean(C, d);
  for (std::size_t i = 0; i < z_block.rows; ++i) {
    const std::size_t c = labels[i];
    if (c >= C) throw numkit::ShapeError("update_centroids: label out of range");
    ++n[c];
    for (std::size_t j = 0; j < d; ++j) mean(c, j) += z_block(i, j);
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (n[c] == 0) continue;
    for (std::size_t j = 0; j < d; ++j) mean(c, j) /= static_cast<double>(n[c]);
    if (cent.counts[c] == 0) {
      for (std::size_t j = 0; j < d; ++j) cent.centroids(c, j) = mean(c, j);
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        cent.centroids(c, j) =
            cent.decay * cent.centroids(c, j) + (1.0 - cent.decay) * mean(c, j);
      }
    }
    cent.counts[c] += n[c];
  }
}

double class_aware_alignment(const ClassCentroids& cent_s, const ClassCentroids& cent_t,
                             const TargetLabelDist& q, const AlignWeights& w) {
  const std::size_t C = cent_s.counts.size();
  if (cent_t.counts.size() != C || q.q.size() != C || w.w.size() != C) {
    throw numkit::ShapeError("class_aware_alignment: class count mismatch");
  }
  if (cent_s.centroids.cols != cent_t.centroids.cols) {
    throw numkit::ShapeError("class_aware_alignment: block dim mismatch");
  }
  double loss = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    if (!cent_s.present(c) || !cent_t.present(c)) continue;
    double dist2 = 0.0;
    for (std::size_t j = 0; j < cent_s.centroids.cols; ++j) {
      const double d = cent_s.centroids(c, j) - cent_t.centroids(c, j);
      dist2 += d * d;
    }
    loss += w.w[c] * q.q[c] * std::sqrt(dist2);
  }
  return loss / static_cast<double>(C);
}

}  // namespace sig::shiftest
