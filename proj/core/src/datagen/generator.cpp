#include "sig/datagen/generator.hpp"

#include <algorithm>
#include <cmath>

namespace sig::datagen {

namespace {

// Substream ids hung off the master seed; fixed so regeneration is bit-exact.
constexpr std::uint64_t kStreamParams = 1;
constexpr std::uint64_t kStreamLabeler = 2;
constexpr std::uint64_t kStreamMixing = 3;
constexpr std::uint64_t kStreamDomainBase = 100;

std::vector<Split> make_splits(std::size_t n) {
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
  if (n_train + n_val >= n || n_train == 0 || n_val == 0) {
    throw GenerationError("make_splits: " + std::to_string(n) +
                          " samples per domain cannot fill a 70/15/15 split");
  }
  std::vector<Split> s(n, Split::Test);
  std::fill(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n_train), Split::Train);
  std::fill(s.begin() + static_cast<std::ptrdiff_t>(n_train),
            s.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), Split::Val);
  return s;
}

std::size_t sample_categorical(const std::vector<double>& p, numkit::Rng& rng) {
  const double r = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (r < acc) return k;
  }
  return p.size() - 1;
}

}  // namespace

void SimpleGenSpec::validate() const {
  if (num_domains < 2) throw GenerationError("SimpleGenSpec: num_domains must be >= 2");
  if (dim_zs < 1 || dim_zc < 1) throw GenerationError("SimpleGenSpec: dims must be >= 1");
  if (samples_per_domain < 1) {
    throw GenerationError("SimpleGenSpec: samples_per_domain must be >= 1");
  }
  if (components_per_domain < 1) {
    throw GenerationError("SimpleGenSpec: components_per_domain must be >= 1");
  }
}

std::vector<DomainMixture> build_domain_params(const SimpleGenSpec& spec) {
  spec.validate();
  numkit::Rng base(spec.master_seed, kStreamParams);
  std::vector<DomainMixture> out(spec.num_domains);
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    numkit::Rng rng = base.split(d);
    DomainMixture& mix = out[d];
    for (std::size_t k = 0; k < spec.components_per_domain; ++k) {
      GaussComponent c;
      c.mean = rng.uniform_matrix(1, spec.dim_zs, -4.0, 4.0);
      c.std = rng.uniform_matrix(1, spec.dim_zs, 0.5, 1.5);
      mix.components.push_back(std::move(c));
      mix.weights.push_back(1.0 / static_cast<double>(spec.components_per_domain));
    }
  }
  return out;
}

Labeler build_labeler(std::size_t dim_zc, std::uint64_t master_seed) {
  numkit::Rng rng(master_seed, kStreamLabeler);
  Labeler lab;
  lab.w = rng.gaussian_matrix(1, dim_zc);
  double norm = 0.0;
  for (double v : lab.w.data) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : lab.w.data) v /= norm;

  // Median of w . z over a 100k calibration draw from the z_c prior.
  constexpr std::size_t kCalibration = 100000;
  std::vector<double> proj(kCalibration);
  for (std::size_t i = 0; i < kCalibration; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < dim_zc; ++j) dot += lab.w.data[j] * rng.gaussian();
    proj[i] = dot;
  }
  std::nth_element(proj.begin(), proj.begin() + kCalibration / 2, proj.end());
  lab.threshold = proj[kCalibration / 2];
  return lab;
}

std::vector<std::size_t> assign_labels(const numkit::Matrix& z_c, const Labeler& lab) {
  if (z_c.cols != lab.w.cols) {
    throw numkit::ShapeError("assign_labels: z_c cols " + numkit::shape_str(z_c));
  }
  std::vector<std::size_t> y(z_c.rows);
  for (std::size_t i = 0; i < z_c.rows; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < z_c.cols; ++j) dot += lab.w.data[j] * z_c(i, j);
    y[i] = dot > lab.threshold ? 1 : 0;
  }
  return y;
}

SyntheticDataset sample_simple(const SimpleGenSpec& spec) {
  spec.validate();
  const std::size_t n = spec.dim_zs + spec.dim_zc;
  const std::size_t per = spec.samples_per_domain;
  const std::size_t total = per * spec.num_domains;

  const std::vector<DomainMixture> mixtures = build_domain_params(spec);
  const Labeler labeler = build_labeler(spec.dim_zc, spec.master_seed);
  numkit::Rng mix_rng(spec.master_seed, kStreamMixing);
  const MixingNet g = build_mixing(n, spec.mixing_depth, mix_rng);

  SyntheticDataset ds;
  ds.Z_true = numkit::Matrix(total, n);
  ds.y.resize(total);
  ds.u.resize(total);
  ds.split.resize(total);
  ds.dims = {0, spec.dim_zs, spec.dim_zc, 0};
  ds.num_domains = spec.num_domains;
  ds.num_classes = 2;
  ds.master_seed = spec.master_seed;
  ds.process = "simple";

  const std::vector<Split> domain_splits = make_splits(per);
  numkit::Matrix z_c_all(total, spec.dim_zc);
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    numkit::Rng rng(spec.master_seed, kStreamDomainBase + d);
    const DomainMixture& mix = mixtures[d];
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t row = d * per + i;
      const std::size_t k = mix.components.size() == 1
                                ? 0
                                : sample_categorical(mix.weights, rng);
      const GaussComponent& c = mix.components[k];
      for (std::size_t j = 0; j < spec.dim_zs; ++j) {
        ds.Z_true(row, j) = c.mean.data[j] + c.std.data[j] * rng.gaussian();
      }
      for (std::size_t j = 0; j < spec.dim_zc; ++j) {
        const double v = rng.gaussian();
        ds.Z_true(row, spec.dim_zs + j) = v;
        z_c_all(row, j) = v;
      }
      ds.u[row] = d;
      ds.split[row] = domain_splits[i];
    }
  }

  ds.y = assign_labels(z_c_all, labeler);
  ds.X = g.forward(ds.Z_true);
  ds.validate();
  return ds;
}

void FullGenSpec::validate() const {
  if (num_domains < 2) throw GenerationError("FullGenSpec: num_domains must be >= 2");
  if (num_classes < 2) throw GenerationError("FullGenSpec: num_classes must be >= 2");
  if (dims[1] + dims[2] < 1) throw GenerationError("FullGenSpec: n2 + n3 must be >= 1");
  if (samples_per_domain < 1) {
    throw GenerationError("FullGenSpec: samples_per_domain must be >= 1");
  }
  if (!label_priors.empty()) {
    if (label_priors.size() != num_domains) {
      throw GenerationError("FullGenSpec: label_priors must have one row per domain");
    }
    for (const auto& pi : label_priors) {
      if (pi.size() != num_classes) {
        throw GenerationError("FullGenSpec: label prior row has wrong length");
      }
      double s = 0.0;
      for (double p : pi) {
        if (p < 0.0) throw GenerationError("FullGenSpec: negative prior probability");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) {
        throw GenerationError("FullGenSpec: label prior row does not sum to 1");
      }
    }
  }
}

SyntheticDataset sample_full(const FullGenSpec& spec) {
  spec.validate();
  const std::size_t n = spec.dims[0] + spec.dims[1] + spec.dims[2] + spec.dims[3];
  const std::size_t per = spec.samples_per_domain;
  const std::size_t total = per * spec.num_domains;
  const std::size_t C = spec.num_classes;

  std::vector<std::vector<double>> priors = spec.label_priors;
  if (priors.empty()) {
    priors.assign(spec.num_domains,
                  std::vector<double>(C, 1.0 / static_cast<double>(C)));
  }

  // Conditional Gaussian parameters, using the simple-process ranges.
  numkit::Rng prng(spec.master_seed, kStreamParams);
  std::vector<numkit::Matrix> z1_mean, z1_std;           // per domain
  std::vector<numkit::Matrix> z2_dom;                    // per domain
  std::vector<numkit::Matrix> z2_cls;                    // per class
  std::vector<std::vector<numkit::Matrix>> z2_std;       // [domain][class]
  std::vector<numkit::Matrix> z3_mean, z3_std;           // per class
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    numkit::Rng r = prng.split(d);
    z1_mean.push_back(r.uniform_matrix(1, spec.dims[0], -4.0, 4.0));
    z1_std.push_back(r.uniform_matrix(1, spec.dims[0], 0.5, 1.5));
    z2_dom.push_back(r.uniform_matrix(1, spec.dims[1], -4.0, 4.0));
    std::vector<numkit::Matrix> stds;
    for (std::size_t c = 0; c < C; ++c)
      stds.push_back(r.uniform_matrix(1, spec.dims[1], 0.5, 1.5));
    z2_std.push_back(std::move(stds));
  }
  {
    numkit::Rng r = prng.split(1000);
    for (std::size_t c = 0; c < C; ++c) {
      z2_cls.push_back(r.uniform_matrix(1, spec.dims[1], -4.0, 4.0));
      z3_mean.push_back(r.uniform_matrix(1, spec.dims[2], -4.0, 4.0));
      z3_std.push_back(r.uniform_matrix(1, spec.dims[2], 0.5, 1.5));
    }
  }

  numkit::Rng mix_rng(spec.master_seed, kStreamMixing);
  const MixingNet g = build_mixing(n, spec.mixing_depth, mix_rng);

  SyntheticDataset ds;
  ds.Z_true = numkit::Matrix(total, n);
  ds.y.resize(total);
  ds.u.resize(total);
  ds.split.resize(total);
  ds.dims = spec.dims;
  ds.num_domains = spec.num_domains;
  ds.num_classes = C;
  ds.master_seed = spec.master_seed;
  ds.process = "full";

  const std::vector<Split> domain_splits = make_splits(per);
  const std::size_t off2 = spec.dims[0];
  const std::size_t off3 = off2 + spec.dims[1];
  const std::size_t off4 = off3 + spec.dims[2];
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    numkit::Rng rng(spec.master_seed, kStreamDomainBase + d);
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t row = d * per + i;
      const std::size_t c = sample_categorical(priors[d], rng);
      ds.y[row] = c;
      ds.u[row] = d;
      ds.split[row] = domain_splits[i];
      for (std::size_t j = 0; j < spec.dims[0]; ++j) {
        ds.Z_true(row, j) = z1_mean[d].data[j] + z1_std[d].data[j] * rng.gaussian();
      }
      for (std::size_t j = 0; j < spec.dims[1]; ++j) {
        ds.Z_true(row, off2 + j) = z2_dom[d].data[j] + z2_cls[c].data[j] +
                                   z2_std[d][c].data[j] * rng.gaussian();
      }
      for (std::size_t j = 0; j < spec.dims[2]; ++j) {
        ds.Z_true(row, off3 + j) = z3_mean[c].data[j] + z3_std[c].data[j] * rng.gaussian();
      }
      for (std::size_t j = 0; j < spec.dims[3]; ++j) {
        ds.Z_true(row, off4 + j) = rng.gaussian();
      }
    }
  }

  ds.X = g.forward(ds.Z_true);
  ds.validate();
  return ds;
}

}  // namespace sig::datagen
