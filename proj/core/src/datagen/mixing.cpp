#include "sig/datagen/mixing.hpp"

#include <cmath>

#include "sig/numkit/linalg.hpp"

namespace sig::datagen {

numkit::Matrix MixingNet::forward(const numkit::Matrix& z) const {
  if (dim != 0 && z.cols != dim) {
    throw numkit::ShapeError("MixingNet::forward: input cols " +
                             numkit::shape_str(z) + " vs dim " + std::to_string(dim));
  }
  numkit::Matrix x = z;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0) {
      for (double& v : x.data) v = std::tanh(v);
    }
    x = numkit::matmul(x, layers[l]);
  }
  return x;
}

MixingNet build_mixing(std::size_t n, std::size_t depth, numkit::Rng& rng,
                       double sv_threshold, int max_attempts) {
  if (n < 1) throw GenerationError("build_mixing: dim must be >= 1");
  MixingNet net;
  net.dim = n;
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t l = 0; l < depth; ++l) {
    int rejections = 0;
    for (;;) {
      numkit::Matrix w = rng.gaussian_matrix(n, n, std_dev);
      const double sv = numkit::min_singular_value(w);
      if (sv >= sv_threshold) {
        net.layers.push_back(std::move(w));
        net.min_singular_values.push_back(sv);
        break;
      }
      if (++rejections >= max_attempts) {
        throw GenerationError("build_mixing: layer " + std::to_string(l) + " rejected " +
                              std::to_string(max_attempts) + " times (min sv < " +
                              std::to_string(sv_threshold) + ")");
      }
    }
  }
  return net;
}

}  // namespace sig::datagen
