#pragma once

#include <cstdint>
#include <list>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ronet/rank_one.hpp"
#include "ronet/ropnet.hpp"

namespace ronet {

inline constexpr std::size_t kMaxLevels = 6;

struct RodecConfig {
  std::size_t levels = 3;
  RopConfig rop;

  void validate() const;
};

// Cascade of `levels` rank-one projections.
struct RodecWeights {
  RodecConfig config;
  std::vector<RopWeights> units;

  static RodecWeights init(const RodecConfig& config, Initializer init,
                           std::mt19937_64& rng);
  // Tensors are stored as "rodec.unit<l>.<branch>..."; the configuration is
  // recovered from the stored shapes.
  static RodecWeights load(const ModelWeights& w);
  ModelWeights named() const;
  void set_trainable(bool on) const;
};

// Components X_1..X_L and the residual ladder E_1..E_L of a batch.
struct RodecOutput {
  std::vector<Tensor> components;
  std::vector<Tensor> residuals;

  const Tensor& residual() const { return residuals.back(); }
  // X_1 + ... + X_L
  Tensor low_rank() const;
  // Components and residual of sample `n` as an exact-oracle style record.
  Decomposition to_decomposition(std::size_t n = 0) const;
};

// X_1 = rop_1(x), E_l = E_{l-1} - X_l, X_{l+1} = rop_{l+1}(E_l).
RodecOutput rodec_forward(const Tensor& x, const RodecWeights& w);

// Mean over levels of the element-mean squared residual energies.
Tensor loss_dec_unsup(const RodecOutput& out);
Tensor loss_dec_unsup(const Tensor& batch, const RodecWeights& w);

// Exact deflation targets for a batch, memoized by patch content.
class SvdCache {
 public:
  explicit SvdCache(std::size_t capacity = 4096) : capacity_(capacity) {}

  // One [N,C,H,W] tensor per level holding every sample's l-th component.
  std::vector<Tensor> targets(const Tensor& batch, std::size_t levels);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::size_t size() const { return index_.size(); }

 private:
  using Key = std::uint64_t;
  struct Entry {
    Key key;
    std::vector<std::vector<float>> components;  // [level] -> C*H*W
  };
  const std::vector<std::vector<float>>& lookup(const float* sample,
                                                std::size_t c, std::size_t h,
                                                std::size_t w, std::size_t levels);

  std::size_t capacity_;
  std::list<Entry> lru_;
  std::unordered_map<Key, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Mean over levels of element-mean squared distances to the oracle
// components.
Tensor loss_dec_sup(const RodecOutput& out, std::span<const Tensor> oracle);
Tensor loss_dec_sup(const Tensor& batch, const RodecWeights& w, SvdCache& cache);

}  // namespace ronet
