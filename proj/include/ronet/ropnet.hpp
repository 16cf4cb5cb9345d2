#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "ronet/layers.hpp"

namespace ronet {

struct RopConfig {
  std::size_t channels_wide = 256;
  std::size_t channels_narrow = 64;
  std::size_t out_channels = 3;
  std::array<std::size_t, 2> cblock_kernel{1, 3};
  std::array<std::size_t, 2> rblock_kernel{3, 1};
  std::size_t blocks_per_branch = 3;
  std::size_t projection_kernel = 3;

  void validate() const;
};

// One "conv -> relu -> conv" unit of a projection branch.
struct RopBlock {
  ConvParams expand;  // -> channels_wide
  ConvParams reduce;  // -> channels_narrow
};

struct RopBranch {
  std::vector<RopBlock> blocks;
  ConvParams projection;  // -> out_channels, projection_kernel square
};

// Parameters of one rank-one projection: the column (Cblock) and row
// (Rblock) branches.
struct RopWeights {
  RopConfig config;
  RopBranch column;
  RopBranch row;

  static RopWeights init(const RopConfig& config, Initializer init,
                         std::mt19937_64& rng);
  // Rebuilds from tensors named as by export_to(); extents are inferred from
  // the stored shapes.
  static RopWeights load(const ModelWeights& w, const std::string& prefix);
  void export_to(ModelWeights& w, const std::string& prefix) const;
};

// Features of a branch before pooling: blocks, then the projection conv.
Tensor rop_branch_forward(const Tensor& x, const RopBranch& branch);

// Rank-one projection of every channel slice:
// outer(avg_pool_to_column(column(x)), avg_pool_to_row(row(x))).
Tensor rop_forward(const Tensor& x, const RopWeights& w);

}  // namespace ronet
