#include "slim/sampling.hpp"

#include "slim/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace slim {

SamplingScheme parse_sampling_scheme(std::string_view name) {
  if (name == "cyclic") return SamplingScheme::cyclic;
  if (name == "random_cyclic") return SamplingScheme::random_cyclic;
  if (name == "uniform_iid" || name == "iid") return SamplingScheme::uniform_iid;
  throw InvalidArgument("unknown sampling scheme '" + std::string(name) + "'");
}

std::string_view to_string(SamplingScheme scheme) {
  switch (scheme) {
    case SamplingScheme::cyclic: return "cyclic";
    case SamplingScheme::random_cyclic: return "random_cyclic";
    case SamplingScheme::uniform_iid: return "uniform_iid";
  }
  return "?";
}

Sampler::Sampler(SamplingScheme scheme, std::size_t n_blocks, std::uint64_t seed)
    : scheme_(scheme), n_blocks_(n_blocks), rng_(seed) {
  require(n_blocks >= 1, "sampler needs at least one block");
  if (scheme_ == SamplingScheme::random_cyclic) {
    permutation_.resize(n_blocks_);
    position_ = n_blocks_;  // forces a shuffle on the first draw
  }
}

void Sampler::reshuffle() {
  for (std::size_t i = 0; i < n_blocks_; ++i) permutation_[i] = i;
  // Fisher-Yates, descending.
  for (std::size_t i = n_blocks_ - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng_.below(i + 1));
    std::swap(permutation_[i], permutation_[j]);
  }
  position_ = 0;
}

std::size_t Sampler::next_index() {
  std::size_t index = 0;
  switch (scheme_) {
    case SamplingScheme::cyclic:
      index = static_cast<std::size_t>(draws_ % n_blocks_);
      break;
    case SamplingScheme::random_cyclic:
      if (position_ == n_blocks_) reshuffle();
      index = permutation_[position_++];
      break;
    case SamplingScheme::uniform_iid:
      index = static_cast<std::size_t>(rng_.below(n_blocks_));
      break;
  }
  ++draws_;
  return index;
}

double unbiasedness_deviation(const std::vector<std::vector<std::size_t>>& partition,
                              std::size_t n_rows) {
  require(!partition.empty(), "partition must contain at least one block");
  const double inv_m = 1.0 / static_cast<double>(partition.size());
  // Integer multiplicities first so the disjoint-cover case is exactly zero.
  std::vector<std::size_t> hits(n_rows, 0);
  for (const auto& block : partition) {
    for (std::size_t row : block) {
      require(row < n_rows, "partition references a row outside the matrix");
      ++hits[row];
    }
  }
  double worst = 0.0;
  for (std::size_t h : hits) {
    worst = std::max(worst, std::abs(static_cast<double>(h) - 1.0) * inv_m);
  }
  return worst;
}

std::vector<std::vector<std::size_t>> uniform_partition(std::size_t n_rows, std::size_t block_rows) {
  require(block_rows > 0 && n_rows % block_rows == 0, "rows must split evenly into blocks");
  std::vector<std::vector<std::size_t>> blocks(n_rows / block_rows);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t r = 0; r < block_rows; ++r) blocks[i].push_back(i * block_rows + r);
  }
  return blocks;
}

}  // namespace slim
