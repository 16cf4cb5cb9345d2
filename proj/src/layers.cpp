#include "ronet/layers.hpp"

namespace ronet {

ConvParams ConvParams::init(std::size_t cout, std::size_t cin, std::size_t kh,
                            std::size_t kw, Initializer init, std::mt19937_64& rng) {
  ConvParams p;
  p.weight = init_kernel(cout, cin, kh, kw, init, rng);
  p.bias = Tensor(Shape{cout});
  p.bias.set_requires_grad(true);
  return p;
}

ConvParams ConvParams::load(const ModelWeights& w, const std::string& prefix) {
  ConvParams p{w.get(prefix + "weight"), w.get(prefix + "bias")};
  if (p.weight.shape().rank() != 4 || p.bias.shape() != Shape{p.weight.dim(0)}) {
    throw ConfigError("weights: inconsistent convolution '" + prefix + "': " +
                      p.weight.shape().str() + " / " + p.bias.shape().str());
  }
  return p;
}

void ConvParams::export_to(ModelWeights& w, const std::string& prefix) const {
  w.add(prefix + "weight", weight);
  w.add(prefix + "bias", bias);
}

std::size_t count_indexed(const ModelWeights& w, const std::string& prefix) {
  std::size_t n = 0;
  for (;;) {
    const std::string p = prefix + std::to_string(n) + ".";
    bool found = false;
    for (const auto& e : w) {
      if (e.first.starts_with(p)) {
        found = true;
        break;
      }
    }
    if (!found) return n;
    ++n;
  }
}

}  // namespace ronet
