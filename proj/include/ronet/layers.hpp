#pragma once

#include <random>
#include <string>

#include "ronet/ops.hpp"
#include "ronet/weights.hpp"

namespace ronet {

// Convolution kernel plus bias with "same" zero padding.
struct ConvParams {
  Tensor weight;  // [cout, cin, kh, kw]
  Tensor bias;    // [cout]

  static ConvParams init(std::size_t cout, std::size_t cin, std::size_t kh,
                         std::size_t kw, Initializer init, std::mt19937_64& rng);
  // Loads `<prefix>weight` and `<prefix>bias`.
  static ConvParams load(const ModelWeights& w, const std::string& prefix);

  Tensor operator()(const Tensor& x) const { return ops::conv2d(x, weight, bias); }

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  void export_to(ModelWeights& w, const std::string& prefix) const;
};

// Number of consecutive indexed groups `<prefix><i>.` present in `w`.
std::size_t count_indexed(const ModelWeights& w, const std::string& prefix);

}  // namespace ronet
