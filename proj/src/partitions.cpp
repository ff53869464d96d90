#include "ppv/partitions.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace ppv {

namespace {

void check_size(int n) {
  if (n < 1) throw std::invalid_argument("partitions: n must be >= 1");
  if (n > kMaxPartitionSize) {
    throw CapExceededError("partitions: n = " + std::to_string(n) + " exceeds the cap of " +
                           std::to_string(kMaxPartitionSize));
  }
}

template <class Visit>
void for_each_rgs(int n, Visit&& visit) {
  std::array<std::uint8_t, kMaxPartitionSize> a{};
  std::array<std::uint8_t, kMaxPartitionSize> top{};  // top[i] = max(a[0..i])
  for (;;) {
    visit(std::span<const std::uint8_t>(a.data(), static_cast<std::size_t>(n)));
    int i = n - 1;
    while (i > 0 && a[i] > top[i - 1]) --i;
    if (i == 0) return;
    ++a[i];
    top[i] = std::max(top[i - 1], a[i]);
    for (int j = i + 1; j < n; ++j) {
      a[j] = 0;
      top[j] = top[j - 1];
    }
  }
}

}  // namespace

Partition Partition::from_labels(std::span<const std::uint8_t> labels) {
  check_size(static_cast<int>(labels.size()));
  Partition p;
  p.n_ = static_cast<std::uint8_t>(labels.size());
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > next) throw std::invalid_argument("Partition: labels are not a restricted growth string");
    if (labels[i] == next) ++next;
    p.labels_[i] = labels[i];
  }
  p.k_ = static_cast<std::uint8_t>(next);
  return p;
}

Partition Partition::from_blocks(const std::vector<std::vector<int>>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.size());
  check_size(n);
  std::vector<int> owner(static_cast<std::size_t>(n), -1);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (blocks[j].empty()) throw std::invalid_argument("Partition: empty block");
    for (int i : blocks[j]) {
      if (i < 0 || i >= n || owner[static_cast<std::size_t>(i)] != -1) {
        throw std::invalid_argument("Partition: blocks must be disjoint and cover {0..n-1}");
      }
      owner[static_cast<std::size_t>(i)] = static_cast<int>(j);
    }
  }
  // relabel by first occurrence
  std::vector<int> relabel(blocks.size(), -1);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
  int next = 0;
  for (int i = 0; i < n; ++i) {
    int& r = relabel[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])];
    if (r < 0) r = next++;
    labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(r);
  }
  return from_labels(labels);
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> out(k_);
  for (int i = 0; i < n_; ++i) out[labels_[static_cast<std::size_t>(i)]].push_back(i);
  return out;
}

std::vector<int> Partition::block_sizes() const {
  std::vector<int> out(k_, 0);
  for (int i = 0; i < n_; ++i) ++out[labels_[static_cast<std::size_t>(i)]];
  return out;
}

std::string Partition::to_string() const {
  std::ostringstream out;
  out << '{';
  const auto bl = blocks();
  for (std::size_t j = 0; j < bl.size(); ++j) {
    if (j) out << ',';
    out << '{';
    for (std::size_t t = 0; t < bl[j].size(); ++t) out << (t ? "," : "") << bl[j][t] + 1;
    out << '}';
  }
  out << '}';
  return out.str();
}

std::string Partition::type() const {
  auto sizes = block_sizes();
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  std::string out;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (j) out += '+';
    out += std::to_string(sizes[j]);
  }
  return out;
}

std::vector<Partition> enumerate_partitions(int n) {
  check_size(n);
  std::vector<Partition> out;
  for_each_rgs(n, [&](std::span<const std::uint8_t> a) { out.push_back(Partition::from_labels(a)); });
  return out;
}

bool is_epsilon_admissible(const Partition& p, const EpsilonVector& eps) {
  if (eps.size() != static_cast<std::size_t>(p.size())) {
    throw std::invalid_argument("epsilon length must equal the partition ground set size");
  }
  const auto sizes = p.block_sizes();
  for (int i = 0; i < p.size(); ++i) {
    if (!eps[static_cast<std::size_t>(i)] && sizes[static_cast<std::size_t>(p.block_of(i))] > 1) return false;
  }
  return true;
}

std::vector<Partition> enumerate_epsilon_partitions(int n, const EpsilonVector& eps) {
  check_size(n);
  if (eps.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("epsilon length must equal n");
  std::vector<Partition> out;
  for_each_rgs(n, [&](std::span<const std::uint8_t> a) {
    // an ε = 0 index must be alone: no earlier index shares its label and no later one will
    for (int i = 0; i < n; ++i) {
      if (eps[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < n; ++j) {
        if (j != i && a[static_cast<std::size_t>(j)] == a[static_cast<std::size_t>(i)]) return;
      }
    }
    out.push_back(Partition::from_labels(a));
  });
  return out;
}

EpsilonVector block_epsilon(const Partition& p, const EpsilonVector& eps) {
  if (eps.size() != static_cast<std::size_t>(p.size())) {
    throw std::invalid_argument("epsilon length must equal the partition ground set size");
  }
  std::vector<int> value(static_cast<std::size_t>(p.block_count()), -1);
  for (int i = 0; i < p.size(); ++i) {
    int& v = value[static_cast<std::size_t>(p.block_of(i))];
    const int e = eps[static_cast<std::size_t>(i)] ? 1 : 0;
    if (v >= 0 && v != e) {
      throw std::invalid_argument("epsilon is not constant on block " + std::to_string(p.block_of(i) + 1) + " of " +
                                  p.to_string() + " (partition is not admissible for this epsilon)");
    }
    v = e;
  }
  std::vector<std::uint8_t> bits(value.begin(), value.end());
  return EpsilonVector(std::move(bits));
}

BlockMaps block_maps(const Partition& p, PointSpan y, const EpsilonVector& eps) {
  if (y.size() != static_cast<std::size_t>(p.block_count())) {
    throw std::invalid_argument("block_maps: need one point per block");
  }
  BlockMaps out;
  out.block_eps = block_epsilon(p, eps);
  out.expanded.reserve(static_cast<std::size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) out.expanded.push_back(y[static_cast<std::size_t>(p.block_of(i))]);
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (out.block_eps[j]) out.augmentation.push_back(y[j]);
  }
  return out;
}

LabeledIndex::LabeledIndex(std::vector<int> arities, std::vector<int> powers)
    : arities_(std::move(arities)), powers_(std::move(powers)) {
  if (arities_.empty() || arities_.size() != powers_.size()) {
    throw std::invalid_argument("LabeledIndex: need matching, nonempty arity and power lists");
  }
  int offset = 0;
  for (std::size_t a = 0; a < arities_.size(); ++a) {
    if (arities_[a] < 1 || powers_[a] < 1) throw std::invalid_argument("LabeledIndex: arities and powers must be >= 1");
    offsets_.push_back(offset);
    for (int g = 0; g < powers_[a]; ++g) {
      for (int b = 0; b < arities_[a]; ++b) triples_.push_back({static_cast<int>(a), b, g});
    }
    offset += arities_[a] * powers_[a];
  }
}

int LabeledIndex::flat(int alpha, int beta, int gamma) const {
  return offsets_[static_cast<std::size_t>(alpha)] + gamma * arity(alpha) + beta;
}

std::vector<int> LabeledIndex::group(int alpha, int gamma) const {
  std::vector<int> out;
  for (int b = 0; b < arity(alpha); ++b) out.push_back(flat(alpha, b, gamma));
  return out;
}

LabeledPartitions enumerate_labeled_partitions(const LabeledIndex& index, std::span<const EpsilonVector> eps) {
  if (eps.size() != static_cast<std::size_t>(index.factor_count())) {
    throw std::invalid_argument("need one epsilon vector per factor");
  }
  std::vector<std::uint8_t> bits;
  for (int s = 0; s < index.size(); ++s) {
    const auto& t = index.triple(s);
    const auto& e = eps[static_cast<std::size_t>(t.alpha)];
    if (e.size() != static_cast<std::size_t>(index.arity(t.alpha))) {
      throw std::invalid_argument("epsilon of factor " + std::to_string(t.alpha + 1) + " must have length r_alpha");
    }
    bits.push_back(e[static_cast<std::size_t>(t.beta)] ? 1 : 0);
  }
  EpsilonVector flat(std::move(bits));
  auto parts = enumerate_epsilon_partitions(index.size(), flat);
  return {index, std::move(flat), std::move(parts)};
}

}  // namespace ppv
