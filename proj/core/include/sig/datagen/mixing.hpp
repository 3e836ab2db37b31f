#pragma once

#include <stdexcept>

#include "sig/numkit/matrix.hpp"
#include "sig/numkit/rng.hpp"

namespace sig::datagen {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invertible square Tanh multilayer map. x = tanh(...tanh(z W1)...) W_depth,
/// with Tanh between layers and identity after the last. depth 0 is the
/// identity map (debug mode). Every accepted layer carries a minimum singular
/// value certificate >= the construction threshold, so the composed map is
/// invertible.
struct MixingNet {
  std::vector<numkit::Matrix> layers;        // each n x n
  std::vector<double> min_singular_values;   // certificate, one per layer
  std::size_t dim{0};

  std::size_t depth() const { return layers.size(); }

  /// Applies the map to each row of z (N x n) -> N x n.
  numkit::Matrix forward(const numkit::Matrix& z) const;
};

/// Weight entries ~ N(0, 1/n); each layer is rejection-resampled until its
/// minimum singular value reaches `sv_threshold`. Throws GenerationError after
/// `max_attempts` consecutive rejections of one layer.
MixingNet build_mixing(std::size_t n, std::size_t depth, numkit::Rng& rng,
                       double sv_threshold = 0.1, int max_attempts = 100);

}  // namespace sig::datagen
