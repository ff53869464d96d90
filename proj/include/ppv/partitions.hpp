#pragma once

#include "ppv/configurations.hpp"
#include "ppv/core.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ppv {

/// Largest ground set whose partitions are enumerated (Bell(12) = 4,213,597).
inline constexpr int kMaxPartitionSize = 12;

/// Set partition of {0..n-1}, stored as a restricted growth string.
///
/// Block j is the set of indices labelled j; labels appear in order of first
/// occurrence, so blocks are ordered by their minimum element. Printing uses
/// 1-based indices.
class Partition {
 public:
  Partition() = default;
  /// labels[i] = block of index i; must be a restricted growth string.
  static Partition from_labels(std::span<const std::uint8_t> labels);
  /// Any disjoint cover of {0..n-1} by nonempty blocks, in any order.
  static Partition from_blocks(const std::vector<std::vector<int>>& blocks);

  int size() const { return n_; }
  int block_count() const { return k_; }
  int block_of(int i) const { return labels_[static_cast<std::size_t>(i)]; }
  std::vector<std::vector<int>> blocks() const;
  std::vector<int> block_sizes() const;
  bool is_singletons() const { return k_ == n_; }
  /// e.g. "{{1,2},{3}}".
  std::string to_string() const;
  /// Block sizes in decreasing order, e.g. "2+1+1".
  std::string type() const;

  bool operator==(const Partition& o) const { return n_ == o.n_ && labels_ == o.labels_; }

 private:
  std::array<std::uint8_t, kMaxPartitionSize> labels_{};
  std::uint8_t n_ = 0;
  std::uint8_t k_ = 0;
};

/// All partitions of {0..n-1} in lexicographic order of their restricted growth strings.
std::vector<Partition> enumerate_partitions(int n);

/// True when every block with more than one element contains only ε = 1 indices.
bool is_epsilon_admissible(const Partition& p, const EpsilonVector& eps);

/// The ε-admissible partitions, in the order of enumerate_partitions.
std::vector<Partition> enumerate_epsilon_partitions(int n, const EpsilonVector& eps);

/// ε^{[P]}: the common ε value of each block. Throws if ε is not constant on a block.
EpsilonVector block_epsilon(const Partition& p, const EpsilonVector& eps);

struct BlockMaps {
  /// y^{[P]}: y_i^{[P]} = y_j for i in block j; length n.
  PointList expanded;
  /// ε^{[P]}; length k.
  EpsilonVector block_eps;
  /// y_{ε^{[P]}} = { y_j : ε_j^{[P]} = 1 }.
  PointList augmentation;
};

BlockMaps block_maps(const Partition& p, PointSpan y, const EpsilonVector& eps);

/// Index set S = {(α,β,γ)} of a product of powers of multiple integrals.
///
/// Flattened in (α,γ,β)-major order: each group S_{α,γ} (one copy of the
/// r_α-fold integral of factor α) occupies a contiguous run of indices.
class LabeledIndex {
 public:
  struct Triple {
    int alpha, beta, gamma;  // 0-based
  };

  LabeledIndex(std::vector<int> arities, std::vector<int> powers);

  int factor_count() const { return static_cast<int>(arities_.size()); }
  int arity(int alpha) const { return arities_[static_cast<std::size_t>(alpha)]; }
  int power(int alpha) const { return powers_[static_cast<std::size_t>(alpha)]; }
  int size() const { return static_cast<int>(triples_.size()); }
  int flat(int alpha, int beta, int gamma) const;
  const Triple& triple(int s) const { return triples_[static_cast<std::size_t>(s)]; }
  /// Flat indices of S_{α,γ}, ordered by β.
  std::vector<int> group(int alpha, int gamma) const;

 private:
  std::vector<int> arities_;
  std::vector<int> powers_;
  std::vector<int> offsets_;
  std::vector<Triple> triples_;
};

struct LabeledPartitions {
  LabeledIndex index;
  /// ε_s = ε_(α)(β) on the flattened index.
  EpsilonVector flat_eps;
  std::vector<Partition> partitions;
};

/// 𝒫^ε(S) for per-factor ε_(α) of length r_α.
LabeledPartitions enumerate_labeled_partitions(const LabeledIndex& index, std::span<const EpsilonVector> eps);

}  // namespace ppv
