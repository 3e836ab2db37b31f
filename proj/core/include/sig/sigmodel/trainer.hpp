#pragma once

#include "sig/datagen/dataset.hpp"
#include "sig/identmetrics/metrics.hpp"
#include "sig/shiftest/shift.hpp"
#include "sig/sigmodel/model.hpp"

namespace sig::sigmodel {

/// Composition: l_total = l_y + beta * l_vae + alpha * l_align,
/// with l_vae = l_recon + kl_weight * l_kl.
struct LossBreakdown {
  double l_total{0.0};
  double l_y{0.0};
  double l_vae{0.0};
  double l_recon{0.0};
  double l_kl{0.0};
  double l_align{0.0};
};

/// One domain's slice of a dataset: train rows feed SGD, val rows feed the
/// BBSE confusion estimate.
struct DomainView {
  const datagen::SyntheticDataset* ds{nullptr};
  std::size_t domain{0};
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;

  static DomainView of(const datagen::SyntheticDataset& ds, std::size_t domain);
};

struct TrainResult {
  std::vector<LossBreakdown> history;                 // per-epoch means
  std::vector<shiftest::TargetLabelDist> q_history;   // per-epoch BBSE estimates
  std::vector<shiftest::AlignWeights> w_history;      // per-epoch entropy weights
  shiftest::TargetLabelDist final_q;
};

/// Minibatch SGD on the total loss: shuffles per epoch, refreshes the BBSE
/// target-label estimate, entropy weights, and target pseudo-labels once per
/// epoch, and maintains EMA class centroids for the alignment term. Throws
/// NumericError naming epoch and batch if the loss goes non-finite.
TrainResult train_fit(SigModel& model, const std::vector<DomainView>& sources,
                      const DomainView& target, const TrainConfig& cfg);

/// Target-domain accuracy on the test split plus MCC and subspace RMSE over
/// the test/validation splits of the participating domains. MCC and RMSE are
/// omitted when the dataset has no ground-truth latents.
identmetrics::MetricsReport evaluate(SigModel& model,
                                     const datagen::SyntheticDataset& ds,
                                     const std::vector<std::size_t>& domains,
                                     std::size_t target_domain,
                                     const identmetrics::ProbeConfig& probe_cfg,
                                     const TrainResult* train_result = nullptr);

}  // namespace sig::sigmodel
