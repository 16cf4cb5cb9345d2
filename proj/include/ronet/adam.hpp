#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ronet/weights.hpp"

namespace ronet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over the trainable tensors of a ModelWeights. Moment
// buffers are created (zeroed) on the first step and keyed by tensor name.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const ModelWeights& params, double lr);

  std::size_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Shape shape;
    std::vector<float> m;
    std::vector<float> v;
  };
  AdamConfig config_;
  std::map<std::string, Moments> state_;
  std::size_t t_ = 0;
};

// Piecewise-constant learning rate: an optional single drop at `drop_at`
// and an optional geometric decay every `decay_every` updates.
struct LrSchedule {
  double initial = 1e-4;
  std::size_t drop_at = 0;  // 0 disables
  double drop_to = 1e-5;
  std::size_t decay_every = 0;  // 0 disables
  double decay_factor = 0.5;

  double at(std::size_t step) const;
};

}  // namespace ronet
