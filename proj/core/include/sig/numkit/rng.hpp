#pragma once

#include <cstdint>
#include <vector>

#include "sig/numkit/matrix.hpp"

namespace sig::numkit {

/// Deterministic counter-based generator. Each stream owns a distinct 64-bit
/// key; outputs are a bijective mix of (key, counter), so streams obtained via
/// split() never share a (key, counter) pair and the same (seed, stream, call
/// sequence) always reproduces the same outputs bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Derives an independent child stream. The parent is not advanced.
  Rng split(std::uint64_t child) const;

  std::uint64_t next_u64();
  /// Uniform draw in [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (second draw cached).
  double gaussian();
  /// Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double std_dev = 1.0);
  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

 private:
  Rng() = default;
  std::uint64_t key_{0};
  std::uint64_t counter_{0};
  bool has_spare_{false};
  double spare_{0.0};
};

}  // namespace sig::numkit
