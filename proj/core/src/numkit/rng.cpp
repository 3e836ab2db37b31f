#include "sig/numkit/rng.hpp"

#include <cmath>
#include <limits>

namespace sig::numkit {

namespace {

// SplitMix64 finalizer (Steele et al.), a 64-bit bijection.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  key_ = mix64(mix64(seed) ^ mix64(stream ^ 0xa5a5a5a5a5a5a5a5ULL));
}

Rng Rng::split(std::uint64_t child) const {
  Rng r;
  r.key_ = mix64(key_ ^ mix64(child ^ 0x5bd1e9955bd1e995ULL));
  return r;
}

std::uint64_t Rng::next_u64() {
  return mix64(key_ ^ mix64(++counter_));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

Matrix Rng::gaussian_matrix(std::size_t rows, std::size_t cols, double std_dev) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = gaussian() * std_dev;
  return m;
}

Matrix Rng::uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = uniform(lo, hi);
  return m;
}

}  // namespace sig::numkit
