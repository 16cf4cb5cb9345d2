#include "ronet/rodec.hpp"

#include <cstring>

namespace ronet {

void RodecConfig::validate() const {
  if (levels < 1 || levels > kMaxLevels) {
    throw ConfigError("rodec: levels must be in [1, 6], got " + std::to_string(levels));
  }
  rop.validate();
}

RodecWeights RodecWeights::init(const RodecConfig& config, Initializer init,
                                std::mt19937_64& rng) {
  config.validate();
  RodecWeights w;
  w.config = config;
  for (std::size_t l = 0; l < config.levels; ++l) {
    w.units.push_back(RopWeights::init(config.rop, init, rng));
  }
  return w;
}

RodecWeights RodecWeights::load(const ModelWeights& named) {
  RodecWeights w;
  const std::size_t levels = count_indexed(named, "rodec.unit");
  if (levels == 0) throw ConfigError("weights hold no rodec units");
  for (std::size_t l = 0; l < levels; ++l) {
    w.units.push_back(RopWeights::load(named, "rodec.unit" + std::to_string(l) + "."));
  }
  w.config.levels = levels;
  w.config.rop = w.units.front().config;
  for (const auto& u : w.units) {
    if (u.config.out_channels != w.config.rop.out_channels) {
      throw ConfigError("rodec: units disagree on image channels");
    }
  }
  w.config.validate();
  return w;
}

ModelWeights RodecWeights::named() const {
  ModelWeights out;
  for (std::size_t l = 0; l < units.size(); ++l) {
    units[l].export_to(out, "rodec.unit" + std::to_string(l) + ".");
  }
  return out;
}

void RodecWeights::set_trainable(bool on) const { named().set_trainable(on); }

Tensor RodecOutput::low_rank() const {
  Tensor acc = components.front();
  for (std::size_t l = 1; l < components.size(); ++l) acc = ops::add(acc, components[l]);
  return acc;
}

Decomposition RodecOutput::to_decomposition(std::size_t n) const {
  Decomposition d;
  for (const auto& comp : components) {
    const Image img = image_from_tensor(comp, n);
    std::vector<Matrix> planes;
    for (std::size_t c = 0; c < img.channels; ++c) planes.push_back(img.plane(c));
    d.components.push_back(std::move(planes));
  }
  const Image res = image_from_tensor(residual(), n);
  for (std::size_t c = 0; c < res.channels; ++c) d.residual.push_back(res.plane(c));
  return d;
}

RodecOutput rodec_forward(const Tensor& x, const RodecWeights& w) {
  RodecOutput out;
  Tensor remainder = x;
  for (const auto& unit : w.units) {
    Tensor component = rop_forward(remainder, unit);
    remainder = ops::sub(remainder, component);
    out.components.push_back(std::move(component));
    out.residuals.push_back(remainder);
  }
  return out;
}

Tensor loss_dec_unsup(const RodecOutput& out) {
  Tensor total;
  for (const auto& e : out.residuals) {
    Tensor energy = ops::loss_norm(e, Tensor(e.shape()), 2);
    total = total.defined() ? ops::add(total, energy) : energy;
  }
  return ops::scale(total, 1.0f / static_cast<float>(out.residuals.size()));
}

Tensor loss_dec_unsup(const Tensor& batch, const RodecWeights& w) {
  return loss_dec_unsup(rodec_forward(batch, w));
}

const std::vector<std::vector<float>>& SvdCache::lookup(const float* sample,
                                                        std::size_t c,
                                                        std::size_t h,
                                                        std::size_t w,
                                                        std::size_t levels) {
  std::uint64_t key = 1469598103934665603ULL;
  auto mix = [&key](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      key ^= b[i];
      key *= 1099511628211ULL;
    }
  };
  const std::uint64_t dims[4] = {c, h, w, levels};
  mix(dims, sizeof dims);
  mix(sample, c * h * w * sizeof(float));

  if (auto it = index_.find(key); it != index_.end()) {
    ++hits_;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->components;
  }
  ++misses_;
  Image img(c, h, w);
  for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] = sample[k];
  const Decomposition d = svd_decompose(img, levels);
  Entry e{key, {}};
  for (std::size_t l = 0; l < levels; ++l) {
    const Image comp = component_image(d, l);
    e.components.emplace_back(comp.data.begin(), comp.data.end());
  }
  lru_.push_front(std::move(e));
  index_[key] = lru_.begin();
  if (capacity_ > 0 && lru_.size() > capacity_) {
    index_.erase(lru_.back().key);
    lru_.pop_back();
  }
  return lru_.front().components;
}

std::vector<Tensor> SvdCache::targets(const Tensor& batch, std::size_t levels) {
  if (batch.shape().rank() != 4) throw ShapeError("svd targets: expected [N,C,H,W]");
  const std::size_t n = batch.dim(0);
  const std::size_t block = batch.numel() / n;
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < levels; ++l) out.emplace_back(batch.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const auto& comps = lookup(batch.data().data() + s * block, batch.dim(1),
                               batch.dim(2), batch.dim(3), levels);
    for (std::size_t l = 0; l < levels; ++l) {
      std::memcpy(out[l].mutable_data().data() + s * block, comps[l].data(),
                  block * sizeof(float));
    }
  }
  return out;
}

Tensor loss_dec_sup(const RodecOutput& out, std::span<const Tensor> oracle) {
  if (oracle.size() != out.components.size()) {
    throw ShapeError("loss_dec_sup: " + std::to_string(oracle.size()) +
                     " oracle components for " +
                     std::to_string(out.components.size()) + " levels");
  }
  Tensor total;
  for (std::size_t l = 0; l < oracle.size(); ++l) {
    Tensor term = ops::loss_norm(out.components[l], oracle[l], 2);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return ops::scale(total, 1.0f / static_cast<float>(oracle.size()));
}

Tensor loss_dec_sup(const Tensor& batch, const RodecWeights& w, SvdCache& cache) {
  const auto oracle = cache.targets(batch, w.config.levels);
  return loss_dec_sup(rodec_forward(batch, w), oracle);
}

}  // namespace ronet
