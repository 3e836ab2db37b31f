#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sig/numkit/matrix.hpp"

namespace sig::datagen {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split split_from_name(const std::string& s);

/// Observations, labels, domain indices, split tags, and the ground-truth
/// latents that produced them. Latents are ordered [z1|z2|z3|z4]; the simple
/// two-block process stores (0, n_s, n_c, 0) so z_s maps to the z2 slot and
/// z_c to the z3 slot.
struct SyntheticDataset {
  numkit::Matrix X;                 // N x n
  std::vector<std::size_t> y;      // labels in [0, C)
  std::vector<std::size_t> u;      // domain indices in [0, U)
  std::vector<Split> split;
  numkit::Matrix Z_true;           // N x n (empty when has_latents is false)
  bool has_latents{true};

  std::array<std::size_t, 4> dims{0, 0, 0, 0};  // n1..n4
  std::size_t num_domains{0};
  std::size_t num_classes{0};
  std::uint64_t master_seed{0};
  std::string process{"simple"};
  std::string generator_version{"1"};

  std::size_t size() const { return X.rows; }
  std::size_t feature_dim() const { return X.cols; }
  std::size_t domain_specific_dim() const { return dims[0] + dims[1]; }

  std::vector<std::size_t> rows_of(std::size_t domain, Split s) const;
  std::vector<std::size_t> rows_of_split(Split s) const;

  /// Checks the structural invariants: aligned lengths, label/domain ranges,
  /// and a non-empty (domain, split) cell for every pair.
  void validate() const;
};

/// Writes `<prefix>.csv`, `<prefix>.latents.csv`, and `<prefix>.meta.json`.
/// Floats are printed with shortest round-trip precision, so save followed by
/// load is bit-exact.
void save_dataset(const SyntheticDataset& ds, const std::string& prefix);

/// Loads the three-file format. A missing latents file yields
/// has_latents = false; malformed content raises ParseError with the line.
SyntheticDataset load_dataset(const std::string& prefix);

}  // namespace sig::datagen
