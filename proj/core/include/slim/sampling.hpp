#pragma once

#include "slim/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace slim {

enum class SamplingScheme { cyclic, random_cyclic, uniform_iid };

SamplingScheme parse_sampling_scheme(std::string_view name);
std::string_view to_string(SamplingScheme scheme);

// Produces the sequence of block indices tau(1), tau(2), ... in {0..M-1}.
//
//   cyclic         0, 1, ..., M-1, 0, 1, ...
//   random_cyclic  a fresh Fisher-Yates permutation of {0..M-1} per epoch
//   uniform_iid    independent uniform draws
class Sampler {
 public:
  Sampler(SamplingScheme scheme, std::size_t n_blocks, std::uint64_t seed);

  std::size_t next_index();

  SamplingScheme scheme() const { return scheme_; }
  std::size_t n_blocks() const { return n_blocks_; }
  // Blocks handed out so far.
  std::uint64_t draws() const { return draws_; }

 private:
  void reshuffle();

  SamplingScheme scheme_;
  std::size_t n_blocks_;
  Rng rng_;
  std::vector<std::size_t> permutation_;
  std::size_t position_ = 0;
  std::uint64_t draws_ = 0;
};

// max_j |(1/M) sum_i (W_i W_i^T)_jj - 1/M| for row-selection matrices W_i
// given by the row lists in `partition`. Zero exactly when the lists form a
// disjoint cover of {0..m-1}; W_i W_i^T is diagonal for row selections, so
// this is the infinity norm of (1/M) sum_i W_i W_i^T - (1/M) I.
double unbiasedness_deviation(const std::vector<std::vector<std::size_t>>& partition,
                              std::size_t n_rows);

// Contiguous partition of m rows into blocks of l rows.
std::vector<std::vector<std::size_t>> uniform_partition(std::size_t n_rows, std::size_t block_rows);

}  // namespace slim
