#include "ronet/adam.hpp"

#include <cmath>

namespace ronet {

void Adam::step(const ModelWeights& params, double lr) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& [name, tensor] : params) {
    if (!tensor.requires_grad()) continue;
    auto it = state_.find(name);
    if (it == state_.end()) {
      Moments fresh{tensor.shape(), std::vector<float>(tensor.numel(), 0.0f),
                    std::vector<float>(tensor.numel(), 0.0f)};
      it = state_.emplace(name, std::move(fresh)).first;
    } else if (it->second.shape != tensor.shape()) {
      throw ContractError("adam: shape of '" + name + "' changed from " +
                          it->second.shape.str() + " to " + tensor.shape().str());
    }
    auto& mom = it->second;
    auto g = tensor.grad();
    Tensor handle = tensor;
    auto theta = handle.mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double m = b1 * mom.m[i] + (1.0 - b1) * gi;
      const double v = b2 * mom.v[i] + (1.0 - b2) * gi * gi;
      mom.m[i] = static_cast<float>(m);
      mom.v[i] = static_cast<float>(v);
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + config_.eps);
      theta[i] = static_cast<float>(theta[i] - update);
    }
  }
}

double LrSchedule::at(std::size_t step) const {
  double lr = initial;
  if (decay_every > 0) {
    lr *= std::pow(decay_factor, static_cast<double>(step / decay_every));
  }
  if (drop_at > 0 && step >= drop_at) lr = drop_to;
  return lr;
}

}  // namespace ronet
