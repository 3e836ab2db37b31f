#pragma once

#include <optional>
#include <vector>

#include "sig/numkit/matrix.hpp"

namespace sig::identmetrics {

enum class CorrKind { Pearson, Spearman };

/// d_true x d_est matrix of absolute correlations; zero-variance columns give 0.
numkit::Matrix abs_pearson(const numkit::Matrix& a, const numkit::Matrix& b,
                           CorrKind kind = CorrKind::Pearson);

struct Assignment {
  std::vector<std::size_t> perm;  // perm[i] = matched column for row i
  double total{0.0};
};

/// Exact maximum-score assignment: exhaustive enumeration for d <= 8 (ties
/// resolved to the lexicographically smallest permutation), augmenting-path
/// assignment above that.
Assignment best_assignment(const numkit::Matrix& score);

/// Mean of matched absolute correlations under the best assignment.
double mcc(const numkit::Matrix& z_true, const numkit::Matrix& z_est,
           CorrKind kind = CorrKind::Pearson);

double accuracy(const std::vector<std::size_t>& pred,
                const std::vector<std::size_t>& truth);

struct ProbeConfig {
  std::size_t hidden_width{64};
  std::size_t layers{2};
  double lr{0.01};
  double momentum{0.9};
  std::size_t epochs{200};
  std::uint64_t seed{0};

  void validate() const;
};

struct SubspaceRmse {
  double mean_rmse{0.0};
  std::vector<double> per_dim;
};

/// Trains one regression probe per ground-truth dimension on the validation
/// pair and reports the mean test-set RMSE. Deterministic given cfg.seed.
SubspaceRmse subspace_rmse(const numkit::Matrix& z_est_val,
                           const numkit::Matrix& z_true_val,
                           const numkit::Matrix& z_est_test,
                           const numkit::Matrix& z_true_test, const ProbeConfig& cfg);

/// One evaluation run's outputs. mcc/rmse are absent when the dataset carries
/// no ground-truth latents.
struct MetricsReport {
  double acc{0.0};
  std::optional<double> mcc;
  std::optional<double> rmse;
  std::vector<double> per_dim_correlations;
  std::vector<double> per_dim_rmse;
  std::vector<double> q_estimate;
  std::vector<double> loss_history_tail;  // final-epoch l_total, l_y, l_vae, l_align
};

}  // namespace sig::identmetrics
