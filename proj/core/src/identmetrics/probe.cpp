#include <cmath>
#include <numeric>

#include "sig/identmetrics/metrics.hpp"
#include "sig/numkit/layers.hpp"
#include "sig/numkit/tape.hpp"

namespace sig::identmetrics {

namespace {

constexpr std::size_t kProbeBatch = 128;

struct Probe {
  std::vector<numkit::Layer> layers;

  static Probe init(std::size_t in_dim, const ProbeConfig& cfg, numkit::Rng& rng) {
    Probe p;
    std::size_t d = in_dim;
    for (std::size_t l = 0; l + 1 < cfg.layers; ++l) {
      p.layers.push_back(numkit::Layer::affine(d, cfg.hidden_width, rng));
      p.layers.push_back(numkit::Layer::activation(numkit::LayerKind::Relu));
      d = cfg.hidden_width;
    }
    p.layers.push_back(numkit::Layer::affine(d, 1, rng));
    return p;
  }

  std::vector<numkit::Matrix*> parameters() {
    std::vector<numkit::Matrix*> out;
    for (auto& l : layers)
      for (numkit::Matrix* m : l.parameters()) out.push_back(m);
    return out;
  }
};

numkit::Matrix predict(Probe& probe, const numkit::Matrix& x) {
  numkit::Tape t;
  numkit::ValueId h = t.constant(x);
  for (auto& l : probe.layers) {
    numkit::LayerVars vars = bind_layer_params(t, l);
    h = layer_forward(t, l, vars, h, numkit::Mode::Eval);
  }
  return t.value(h);
}

double rmse_against(const numkit::Matrix& pred, const numkit::Matrix& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.rows; ++i) {
    const double d = pred(i, 0) - target(i, 0);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.rows));
}

}  // namespace

SubspaceRmse subspace_rmse(const numkit::Matrix& z_est_val,
                           const numkit::Matrix& z_true_val,
                           const numkit::Matrix& z_est_test,
                           const numkit::Matrix& z_true_test, const ProbeConfig& cfg) {
  cfg.validate();
  if (z_est_val.rows != z_true_val.rows || z_est_test.rows != z_true_test.rows) {
    throw numkit::ShapeError("subspace_rmse: row-aligned pairs required");
  }
  if (z_est_val.cols != z_est_test.cols || z_true_val.cols != z_true_test.cols) {
    throw numkit::ShapeError("subspace_rmse: latent dims differ between splits");
  }
  if (z_est_val.rows < 2) throw numkit::ShapeError("subspace_rmse: too few rows");

  const std::size_t in_dim = z_est_val.cols;
  const std::size_t n_val = z_est_val.rows;

  // Standardize probe inputs with validation statistics; targets stay raw.
  const numkit::Matrix in_mean = numkit::col_mean(z_est_val);
  numkit::Matrix in_std = numkit::col_var(z_est_val);
  for (double& v : in_std.data) v = std::max(std::sqrt(v), 1e-8);
  auto standardize = [&](const numkit::Matrix& m) {
    numkit::Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        out(i, j) = (m(i, j) - in_mean.data[j]) / in_std.data[j];
    return out;
  };
  const numkit::Matrix x_val = standardize(z_est_val);
  const numkit::Matrix x_test = standardize(z_est_test);

  SubspaceRmse out;
  for (std::size_t dim = 0; dim < z_true_val.cols; ++dim) {
    numkit::Rng rng(cfg.seed, 7000 + dim);
    Probe probe = Probe::init(in_dim, cfg, rng);
    numkit::OptimState opt(cfg.lr, cfg.momentum);

    numkit::Matrix target_col(n_val, 1);
    for (std::size_t i = 0; i < n_val; ++i) target_col(i, 0) = z_true_val(i, dim);

    std::vector<std::size_t> order(n_val);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      numkit::Rng shuffle_rng = rng.split(10000 + epoch);
      shuffle_rng.shuffle(order);
      for (std::size_t start = 0; start < n_val; start += kProbeBatch) {
        const std::size_t end = std::min(start + kProbeBatch, n_val);
        const std::size_t bs = end - start;
        numkit::Matrix xb(bs, in_dim), yb(bs, 1);
        for (std::size_t k = 0; k < bs; ++k) {
          const std::size_t r = order[start + k];
          for (std::size_t j = 0; j < in_dim; ++j) xb(k, j) = x_val(r, j);
          yb(k, 0) = target_col(r, 0);
        }
        numkit::Tape t;
        numkit::ValueId h = t.constant(xb);
        std::vector<numkit::ValueId> param_ids;
        for (auto& l : probe.layers) {
          numkit::LayerVars vars = bind_layer_params(t, l);
          for (numkit::ValueId id : vars.ids) param_ids.push_back(id);
          h = layer_forward(t, l, vars, h, numkit::Mode::Train);
        }
        const numkit::ValueId loss = t.mean_all(t.square(t.sub(h, t.constant(yb))));
        if (!std::isfinite(t.value(loss).scalar_value())) {
          throw numkit::NumericError("subspace_rmse: probe diverged at dim " +
                                     std::to_string(dim) + ", epoch " +
                                     std::to_string(epoch));
        }
        t.backward(loss);
        std::vector<numkit::Matrix*> params = probe.parameters();
        std::vector<const numkit::Matrix*> grads;
        for (numkit::ValueId id : param_ids) grads.push_back(&t.grad(id));
        opt.step(params, grads);
      }
    }

    numkit::Matrix pred = predict(probe, x_test);
    numkit::Matrix target_test(z_true_test.rows, 1);
    for (std::size_t i = 0; i < z_true_test.rows; ++i)
      target_test(i, 0) = z_true_test(i, dim);
    out.per_dim.push_back(rmse_against(pred, target_test));
  }

  out.mean_rmse = std::accumulate(out.per_dim.begin(), out.per_dim.end(), 0.0) /
                  static_cast<double>(out.per_dim.size());
  return out;
}

}  // namespace sig::identmetrics
