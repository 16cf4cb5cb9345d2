#include "ronet/ropnet.hpp"

#include <string>

namespace ronet {
namespace {

RopBranch init_branch(const RopConfig& c, std::array<std::size_t, 2> kernel,
                      Initializer init, std::mt19937_64& rng) {
  RopBranch b;
  std::size_t in = c.out_channels;
  for (std::size_t i = 0; i < c.blocks_per_branch; ++i) {
    RopBlock blk;
    blk.expand = ConvParams::init(c.channels_wide, in, kernel[0], kernel[1], init, rng);
    blk.reduce = ConvParams::init(c.channels_narrow, c.channels_wide, kernel[0],
                                  kernel[1], init, rng);
    b.blocks.push_back(std::move(blk));
    in = c.channels_narrow;
  }
  b.projection = ConvParams::init(c.out_channels, in, c.projection_kernel,
                                  c.projection_kernel, init, rng);
  return b;
}

RopBranch load_branch(const ModelWeights& w, const std::string& prefix) {
  RopBranch b;
  const std::size_t blocks = count_indexed(w, prefix + "block");
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string p = prefix + "block" + std::to_string(i) + ".";
    b.blocks.push_back({ConvParams::load(w, p + "expand."), ConvParams::load(w, p + "reduce.")});
  }
  b.projection = ConvParams::load(w, prefix + "projection.");
  return b;
}

void export_branch(const RopBranch& b, ModelWeights& w, const std::string& prefix) {
  for (std::size_t i = 0; i < b.blocks.size(); ++i) {
    const std::string p = prefix + "block" + std::to_string(i) + ".";
    b.blocks[i].expand.export_to(w, p + "expand.");
    b.blocks[i].reduce.export_to(w, p + "reduce.");
  }
  b.projection.export_to(w, prefix + "projection.");
}

}  // namespace

void RopConfig::validate() const {
  if (out_channels != 1 && out_channels != 3) {
    throw ConfigError("rop: out_channels must be 1 or 3, got " +
                      std::to_string(out_channels));
  }
  if (blocks_per_branch < 1) throw ConfigError("rop: blocks_per_branch must be >= 1");
  if (channels_wide < 1 || channels_narrow < 1) throw ConfigError("rop: zero width");
  for (std::size_t k : {cblock_kernel[0], cblock_kernel[1], rblock_kernel[0],
                        rblock_kernel[1], projection_kernel}) {
    if (k % 2 == 0) throw ConfigError("rop: kernel extents must be odd");
  }
}

RopWeights RopWeights::init(const RopConfig& config, Initializer init,
                            std::mt19937_64& rng) {
  config.validate();
  RopWeights w;
  w.config = config;
  w.column = init_branch(config, config.cblock_kernel, init, rng);
  w.row = init_branch(config, config.rblock_kernel, init, rng);
  return w;
}

RopWeights RopWeights::load(const ModelWeights& w, const std::string& prefix) {
  RopWeights r;
  r.column = load_branch(w, prefix + "column.");
  r.row = load_branch(w, prefix + "row.");
  if (r.column.blocks.empty() || r.row.blocks.size() != r.column.blocks.size()) {
    throw ConfigError("rop '" + prefix + "': branches disagree on block count");
  }
  const auto& first = r.column.blocks.front();
  RopConfig& c = r.config;
  c.channels_wide = first.expand.out_channels();
  c.channels_narrow = first.reduce.out_channels();
  c.out_channels = r.column.projection.out_channels();
  c.blocks_per_branch = r.column.blocks.size();
  c.cblock_kernel = {first.expand.weight.dim(2), first.expand.weight.dim(3)};
  c.rblock_kernel = {r.row.blocks.front().expand.weight.dim(2),
                     r.row.blocks.front().expand.weight.dim(3)};
  c.projection_kernel = r.column.projection.weight.dim(2);
  c.validate();
  return r;
}

void RopWeights::export_to(ModelWeights& w, const std::string& prefix) const {
  export_branch(column, w, prefix + "column.");
  export_branch(row, w, prefix + "row.");
}

Tensor rop_branch_forward(const Tensor& x, const RopBranch& branch) {
  Tensor h = x;
  for (const auto& blk : branch.blocks) {
    h = blk.reduce(ops::relu(blk.expand(h)));
  }
  return branch.projection(h);
}

Tensor rop_forward(const Tensor& x, const RopWeights& w) {
  if (x.shape().rank() != 4 || x.dim(1) != w.config.out_channels) {
    throw ShapeError("rop_forward: input " + x.shape().str() + " does not have " +
                     std::to_string(w.config.out_channels) + " channels");
  }
  const Tensor col = ops::avg_pool_to_column(rop_branch_forward(x, w.column));
  const Tensor row = ops::avg_pool_to_row(rop_branch_forward(x, w.row));
  return ops::outer_product(col, row);
}

}  // namespace ronet
