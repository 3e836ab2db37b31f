#include "sig/sigmodel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sig::sigmodel {

using numkit::Matrix;
using numkit::Mode;
using numkit::Rng;
using numkit::Tape;
using numkit::ValueId;

namespace {

Matrix gather_matrix_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(rows[i], j);
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(v[r]);
  return out;
}

struct EpochEstimates {
  shiftest::TargetLabelDist q;
  shiftest::AlignWeights w;
  std::vector<std::size_t> target_pseudo;  // frozen for the epoch
};

EpochEstimates refresh_estimates(SigModel& model,
                                 const std::vector<DomainView>& sources,
                                 const DomainView& target, const Matrix& x_target) {
  const std::size_t C = model.num_classes();

  std::vector<std::size_t> preds, trues;
  for (const DomainView& s : sources) {
    if (s.val_rows.empty()) continue;
    const Matrix xv = gather_matrix_rows(s.ds->X, s.val_rows);
    const auto p = model.predict(xv, std::vector<std::size_t>(xv.rows, s.domain));
    preds.insert(preds.end(), p.labels.begin(), p.labels.end());
    const auto yv = gather(s.ds->y, s.val_rows);
    trues.insert(trues.end(), yv.begin(), yv.end());
  }
  const shiftest::ConfusionJoint cj = shiftest::confusion_joint(preds, trues, C);

  const auto tp = model.predict_target(x_target, target.domain);

  std::vector<double> mu_hat(C, 0.0);
  for (std::size_t y : tp.labels) mu_hat[y] += 1.0;
  for (double& v : mu_hat) v /= static_cast<double>(tp.labels.size());

  EpochEstimates est;
  est.q = shiftest::bbse(cj, mu_hat);
  est.target_pseudo = tp.labels;

  // Mean predicted probability vector per pseudo-class.
  std::vector<std::optional<std::vector<double>>> mean_probs(C);
  std::vector<std::size_t> counts(C, 0);
  std::vector<std::vector<double>> sums(C, std::vector<double>(C, 0.0));
  for (std::size_t i = 0; i < tp.labels.size(); ++i) {
    const std::size_t c = tp.labels[i];
    ++counts[c];
    for (std::size_t k = 0; k < C; ++k) sums[c][k] += tp.probabilities(i, k);
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (counts[c] == 0) continue;
    for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
    mean_probs[c] = sums[c];
  }
  est.w = shiftest::align_weights(mean_probs);
  return est;
}

// Per-class rows within a batch.
std::vector<std::vector<std::size_t>> rows_by_class(const std::vector<std::size_t>& labels,
                                                    std::size_t C) {
  std::vector<std::vector<std::size_t>> out(C);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

}  // namespace

DomainView DomainView::of(const datagen::SyntheticDataset& ds, std::size_t domain) {
  DomainView v;
  v.ds = &ds;
  v.domain = domain;
  v.train_rows = ds.rows_of(domain, datagen::Split::Train);
  v.val_rows = ds.rows_of(domain, datagen::Split::Val);
  return v;
}

TrainResult train_fit(SigModel& model, const std::vector<DomainView>& sources,
                      const DomainView& target, const TrainConfig& cfg) {
  cfg.validate();
  if (sources.empty()) throw numkit::ShapeError("train_fit: no source domains");
  for (const DomainView& s : sources) {
    if (s.ds->feature_dim() != model.input_dim()) {
      throw numkit::ShapeError("train_fit: source feature dim mismatch");
    }
  }
  if (target.ds->feature_dim() != model.input_dim()) {
    throw numkit::ShapeError("train_fit: target feature dim mismatch");
  }

  const std::size_t C = model.num_classes();
  const std::size_t n = model.partition_dims().total();
  const PartitionDims& part = model.partition_dims();
  const bool align_z3 = cfg.align_block == AlignBlock::Z3;
  const std::size_t align_dim = align_z3 ? part.n3 : part.n2;

  struct Ref {
    std::size_t view;
    std::size_t row;
  };
  std::vector<Ref> src_refs;
  for (std::size_t v = 0; v < sources.size(); ++v) {
    for (std::size_t r : sources[v].train_rows) src_refs.push_back({v, r});
  }
  if (src_refs.empty()) throw numkit::ShapeError("train_fit: no source training rows");
  if (target.train_rows.empty()) {
    throw numkit::ShapeError("train_fit: no target training rows");
  }

  const Matrix x_target_train = gather_matrix_rows(target.ds->X, target.train_rows);

  Rng master(cfg.seed, 987654321);
  numkit::OptimState opt(cfg.lr, cfg.momentum);
  shiftest::ClassCentroids cent_s(C, align_dim, cfg.centroid_decay);
  shiftest::ClassCentroids cent_t(C, align_dim, cfg.centroid_decay);

  TrainResult result;
  const std::size_t steps =
      (src_refs.size() + cfg.batch_size - 1) / cfg.batch_size;

  std::vector<std::size_t> src_order(src_refs.size());
  std::iota(src_order.begin(), src_order.end(), 0);
  std::vector<std::size_t> tgt_order(target.train_rows.size());
  std::iota(tgt_order.begin(), tgt_order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochEstimates est =
        refresh_estimates(model, sources, target, x_target_train);
    result.q_history.push_back(est.q);
    result.w_history.push_back(est.w);

    Rng shuffle_rng = master.split(2 * epoch);
    shuffle_rng.shuffle(src_order);
    shuffle_rng.shuffle(tgt_order);
    Rng noise_rng = master.split(2 * epoch + 1);

    LossBreakdown epoch_sum;
    std::size_t epoch_batches = 0;
    std::size_t tgt_cursor = 0;

    for (std::size_t b = 0; b < steps; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(lo + cfg.batch_size, src_refs.size());
      const std::size_t ns = hi - lo;
      if (ns < 2) continue;  // batchnorm needs at least 2 rows

      // Assemble source rows then an equally sized cycled target slice.
      Matrix xb(ns + ns, model.input_dim());
      std::vector<std::size_t> y_src(ns), u_src(ns);
      for (std::size_t k = 0; k < ns; ++k) {
        const Ref& ref = src_refs[src_order[lo + k]];
        const datagen::SyntheticDataset& d = *sources[ref.view].ds;
        for (std::size_t j = 0; j < d.X.cols; ++j) xb(k, j) = d.X(ref.row, j);
        y_src[k] = d.y[ref.row];
        u_src[k] = sources[ref.view].domain;
      }
      std::vector<std::size_t> tgt_pseudo(ns);
      for (std::size_t k = 0; k < ns; ++k) {
        const std::size_t ti = tgt_order[(tgt_cursor + k) % tgt_order.size()];
        const std::size_t row = target.train_rows[ti];
        for (std::size_t j = 0; j < target.ds->X.cols; ++j)
          xb(ns + k, j) = target.ds->X(row, j);
        tgt_pseudo[k] = est.target_pseudo[ti];
      }
      tgt_cursor = (tgt_cursor + ns) % tgt_order.size();
      const std::size_t total_rows = 2 * ns;

      Tape tape;
      SigModel::Pass pass = model.bind(tape);
      const ValueId x = tape.constant(xb);
      auto [mu, logvar] = model.encode(tape, pass, x, Mode::Train, &noise_rng);
      const Matrix eps = noise_rng.gaussian_matrix(total_rows, n);
      const ValueId z = model.reparameterize(tape, mu, logvar, eps);
      const auto zp = model.partition(tape, z);
      const ValueId x_hat = model.decode(tape, pass, z, Mode::Train, &noise_rng);

      ValueId recon = 0, kl = 0;
      const ValueId l_vae =
          loss_vae(tape, x_hat, x, mu, logvar, cfg.kl_weight, &recon, &kl);

      std::vector<std::size_t> src_idx(ns), tgt_idx(ns);
      std::iota(src_idx.begin(), src_idx.end(), 0);
      std::iota(tgt_idx.begin(), tgt_idx.end(), ns);
      const ValueId z2_src = tape.gather_rows(zp[1], src_idx);
      const ValueId z3_src = tape.gather_rows(zp[2], src_idx);
      const ValueId logits_src = model.classify(tape, pass, z2_src, z3_src, u_src);
      const ValueId l_y = loss_y(tape, logits_src, y_src, cfg.mcc_confusion_enabled);

      // Class-aware alignment on EMA centroids; history enters as constants,
      // only this batch's class means carry gradient.
      const ValueId za = align_z3 ? zp[2] : zp[1];
      const ValueId za_src = tape.gather_rows(za, src_idx);
      const ValueId za_tgt = tape.gather_rows(za, tgt_idx);
      const auto src_classes = rows_by_class(y_src, C);
      const auto tgt_classes = rows_by_class(tgt_pseudo, C);

      auto centroid_node = [&](const shiftest::ClassCentroids& cent, ValueId block,
                               const std::vector<std::size_t>& rows,
                               std::size_t c) -> std::optional<ValueId> {
        const bool have_history = cent.present(c);
        if (rows.empty() && !have_history) return std::nullopt;
        if (rows.empty()) {
          Matrix old(1, align_dim);
          for (std::size_t j = 0; j < align_dim; ++j) old(0, j) = cent.centroids(c, j);
          return tape.constant(std::move(old));
        }
        const ValueId mean = tape.col_mean(tape.gather_rows(block, rows));
        if (!have_history) return mean;
        Matrix old(1, align_dim);
        for (std::size_t j = 0; j < align_dim; ++j) old(0, j) = cent.centroids(c, j);
        return tape.add(tape.scale(tape.constant(std::move(old)), cent.decay),
                        tape.scale(mean, 1.0 - cent.decay));
      };

      ValueId l_align = tape.constant(Matrix::scalar(0.0));
      if (align_dim > 0) {
        for (std::size_t c = 0; c < C; ++c) {
          const auto cs = centroid_node(cent_s, za_src, src_classes[c], c);
          const auto ct = centroid_node(cent_t, za_tgt, tgt_classes[c], c);
          if (!cs.has_value() || !ct.has_value()) continue;
          const ValueId dist =
              tape.sqrt(tape.sum_all(tape.square(tape.sub(*cs, *ct))));
          l_align = tape.add(l_align, tape.scale(dist, est.w.w[c] * est.q.q[c]));
        }
        l_align = tape.scale(l_align, 1.0 / static_cast<double>(C));
      }

      const ValueId l_total =
          tape.add(l_y, tape.add(tape.scale(l_vae, cfg.beta),
                                 tape.scale(l_align, cfg.alpha)));

      LossBreakdown lb;
      lb.l_total = tape.value(l_total).scalar_value();
      lb.l_y = tape.value(l_y).scalar_value();
      lb.l_vae = tape.value(l_vae).scalar_value();
      lb.l_recon = tape.value(recon).scalar_value();
      lb.l_kl = tape.value(kl).scalar_value();
      lb.l_align = tape.value(l_align).scalar_value();
      if (!std::isfinite(lb.l_total)) {
        throw numkit::NumericError("train_fit: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(b));
      }

      tape.backward(l_total);
      std::vector<Matrix*> params = model.parameters();
      std::vector<const Matrix*> grads;
      grads.reserve(pass.param_ids.size());
      for (ValueId id : pass.param_ids) grads.push_back(&tape.grad(id));
      opt.step(params, grads);

      // Fold this batch into the EMA centroids (values only).
      shiftest::update_centroids(cent_s, tape.value(za_src), y_src);
      shiftest::update_centroids(cent_t, tape.value(za_tgt), tgt_pseudo);

      epoch_sum.l_total += lb.l_total;
      epoch_sum.l_y += lb.l_y;
      epoch_sum.l_vae += lb.l_vae;
      epoch_sum.l_recon += lb.l_recon;
      epoch_sum.l_kl += lb.l_kl;
      epoch_sum.l_align += lb.l_align;
      ++epoch_batches;
    }

    if (epoch_batches == 0) {
      throw numkit::ShapeError("train_fit: no usable batches (batch_size too large?)");
    }
    const double nb = static_cast<double>(epoch_batches);
    result.history.push_back(LossBreakdown{epoch_sum.l_total / nb, epoch_sum.l_y / nb,
                                           epoch_sum.l_vae / nb, epoch_sum.l_recon / nb,
                                           epoch_sum.l_kl / nb, epoch_sum.l_align / nb});
  }

  result.final_q = result.q_history.empty() ? shiftest::TargetLabelDist{}
                                            : result.q_history.back();
  return result;
}

identmetrics::MetricsReport evaluate(SigModel& model,
                                     const datagen::SyntheticDataset& ds,
                                     const std::vector<std::size_t>& domains,
                                     std::size_t target_domain,
                                     const identmetrics::ProbeConfig& probe_cfg,
                                     const TrainResult* train_result) {
  identmetrics::MetricsReport report;

  const std::vector<std::size_t> target_test = ds.rows_of(target_domain, datagen::Split::Test);
  if (target_test.empty()) {
    throw numkit::ShapeError("evaluate: target domain has no test rows");
  }
  const Matrix x_test = gather_matrix_rows(ds.X, target_test);
  const auto pred = model.predict_target(x_test, target_domain);
  report.acc = identmetrics::accuracy(pred.labels, gather(ds.y, target_test));

  if (train_result != nullptr) {
    report.q_estimate = train_result->final_q.q;
    if (!train_result->history.empty()) {
      const LossBreakdown& lb = train_result->history.back();
      report.loss_history_tail = {lb.l_total, lb.l_y, lb.l_vae, lb.l_align};
    }
  }

  if (!ds.has_latents) return report;

  const std::size_t est_dim = model.partition_dims().n1 + model.partition_dims().n2;
  const std::size_t true_dim = ds.domain_specific_dim();
  if (est_dim != true_dim) {
    throw numkit::ShapeError("evaluate: estimated domain-specific block dim " +
                             std::to_string(est_dim) + " vs ground truth " +
                             std::to_string(true_dim));
  }
  if (est_dim == 0) return report;

  auto rows_in_domains = [&](datagen::Split s) {
    std::vector<std::size_t> rows;
    for (std::size_t d : domains) {
      const auto r = ds.rows_of(d, s);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
  };
  const std::vector<std::size_t> val_rows = rows_in_domains(datagen::Split::Val);
  const std::vector<std::size_t> test_rows = rows_in_domains(datagen::Split::Test);

  auto block = [&](const Matrix& m, std::size_t dim) {
    Matrix out(m.rows, dim);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < dim; ++j) out(i, j) = m(i, j);
    return out;
  };

  const Matrix z_est_val = block(model.infer_latents(gather_matrix_rows(ds.X, val_rows)), est_dim);
  const Matrix z_est_test =
      block(model.infer_latents(gather_matrix_rows(ds.X, test_rows)), est_dim);
  const Matrix z_true_val = block(gather_matrix_rows(ds.Z_true, val_rows), true_dim);
  const Matrix z_true_test = block(gather_matrix_rows(ds.Z_true, test_rows), true_dim);

  const Matrix corr = identmetrics::abs_pearson(z_true_test, z_est_test);
  const identmetrics::Assignment assign = identmetrics::best_assignment(corr);
  report.mcc = assign.total / static_cast<double>(true_dim);
  for (std::size_t i = 0; i < true_dim; ++i) {
    report.per_dim_correlations.push_back(corr(i, assign.perm[i]));
  }

  const identmetrics::SubspaceRmse sr =
      identmetrics::subspace_rmse(z_est_val, z_true_val, z_est_test, z_true_test, probe_cfg);
  report.rmse = sr.mean_rmse;
  report.per_dim_rmse = sr.per_dim;

  return report;
}

}  // namespace sig::sigmodel
