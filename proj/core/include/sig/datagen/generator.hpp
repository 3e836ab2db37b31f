#pragma once

#include "sig/datagen/dataset.hpp"
#include "sig/datagen/mixing.hpp"
#include "sig/numkit/rng.hpp"

namespace sig::datagen {

/// Two-block process: z_s from a per-domain Gaussian mixture, z_c from a
/// factorized standard Gaussian, labels from a calibrated hyperplane on z_c,
/// observations through an invertible Tanh mixing net.
struct SimpleGenSpec {
  std::size_t num_domains{8};
  std::size_t dim_zs{2};
  std::size_t dim_zc{2};
  std::size_t samples_per_domain{1000};
  std::uint64_t master_seed{0};
  std::size_t mixing_depth{2};
  std::size_t components_per_domain{1};

  void validate() const;
};

struct GaussComponent {
  numkit::Matrix mean;  // 1 x d
  numkit::Matrix std;   // 1 x d, diagonal std
};

struct DomainMixture {
  std::vector<GaussComponent> components;
  std::vector<double> weights;  // uniform
};

/// Per-domain mixture parameters: means uniform in [-4, 4]^d, diagonal stds
/// uniform in [0.5, 1.5], uniform weights. Deterministic given master_seed.
std::vector<DomainMixture> build_domain_params(const SimpleGenSpec& spec);

/// Fixed random unit vector plus a median threshold calibrated on a 100k draw
/// from the z_c prior.
struct Labeler {
  numkit::Matrix w;  // 1 x dim_zc, unit norm
  double threshold{0.0};
};

Labeler build_labeler(std::size_t dim_zc, std::uint64_t master_seed);
std::vector<std::size_t> assign_labels(const numkit::Matrix& z_c, const Labeler& lab);

SyntheticDataset sample_simple(const SimpleGenSpec& spec);

/// Four-block process with target shift: y ~ Categorical(pi_u),
/// z1 ~ N(mean_u), z2 ~ N(domain term + class term), z3 ~ N(mean_y),
/// z4 ~ N(0, I).
struct FullGenSpec {
  std::array<std::size_t, 4> dims{1, 2, 2, 1};
  std::size_t num_domains{4};
  std::size_t num_classes{2};
  /// U rows, each a simplex over C classes. Empty means uniform everywhere.
  std::vector<std::vector<double>> label_priors;
  std::size_t samples_per_domain{1000};
  std::uint64_t master_seed{0};
  std::size_t mixing_depth{2};

  void validate() const;
};

SyntheticDataset sample_full(const FullGenSpec& spec);

}  // namespace sig::datagen
