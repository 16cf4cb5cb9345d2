#include "ronet/weights.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace ronet {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

void ModelWeights::add(std::string name, Tensor tensor) {
  if (contains(name)) {
    throw ContractError("weights: duplicate tensor name '" + name + "'");
  }
  entries_.emplace_back(std::move(name), std::move(tensor));
}

void ModelWeights::append(const ModelWeights& other, std::string_view prefix) {
  for (const auto& [name, tensor] : other) add(std::string(prefix) + name, tensor);
}

bool ModelWeights::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

const Tensor& ModelWeights::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw ConfigError("weights: no tensor named '" + std::string(name) + "'");
}

ModelWeights ModelWeights::subset(std::string_view prefix) const {
  ModelWeights out;
  for (const auto& [name, tensor] : entries_) {
    if (name.starts_with(prefix)) out.add(name.substr(prefix.size()), tensor);
  }
  return out;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.second.requires_grad()) n += e.second.numel();
  }
  return n;
}

void ModelWeights::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

void ModelWeights::set_trainable(bool on) {
  for (auto& e : entries_) {
    e.second.set_requires_grad(on && !is_running_statistic(e.first));
  }
}

std::uint64_t ModelWeights::content_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, tensor] : entries_) {
    fnv_mix(h, name.data(), name.size());
    for (std::size_t d : tensor.shape().dims()) {
      const auto d32 = static_cast<std::uint32_t>(d);
      fnv_mix(h, &d32, sizeof d32);
    }
    fnv_mix(h, tensor.data().data(), tensor.numel() * sizeof(float));
  }
  return h;
}

std::string ModelWeights::content_hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(content_hash()));
  return buf;
}

bool is_running_statistic(std::string_view name) {
  return name.ends_with("running_mean") || name.ends_with("running_var") ||
         name.find(".meta.") != std::string_view::npos;
}

bool bit_identical(const ModelWeights& a, const ModelWeights& b) {
  if (a.size() != b.size()) return false;
  auto ib = b.begin();
  for (const auto& [name, tensor] : a) {
    if (name != ib->first || tensor.shape() != ib->second.shape()) return false;
    if (std::memcmp(tensor.data().data(), ib->second.data().data(),
                    tensor.numel() * sizeof(float)) != 0) {
      return false;
    }
    ++ib;
  }
  return true;
}

Initializer parse_initializer(std::string_view name) {
  if (name == "xavier-uniform") return Initializer::kXavierUniform;
  if (name == "msra-normal") return Initializer::kMsraNormal;
  throw ConfigError("unknown initializer '" + std::string(name) +
                    "' (expected xavier-uniform or msra-normal)");
}

std::string_view to_string(Initializer init) {
  return init == Initializer::kXavierUniform ? "xavier-uniform" : "msra-normal";
}

Tensor init_kernel(std::size_t cout, std::size_t cin, std::size_t kh,
                   std::size_t kw, Initializer init, std::mt19937_64& rng) {
  Tensor t(Shape{cout, cin, kh, kw});
  const double fan_in = static_cast<double>(cin * kh * kw);
  const double fan_out = static_cast<double>(cout * kh * kw);
  auto values = t.mutable_data();
  if (init == Initializer::kXavierUniform) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (float& v : values) v = static_cast<float>(dist(rng));
  } else {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (float& v : values) v = static_cast<float>(dist(rng));
  }
  t.set_requires_grad(true);
  return t;
}

}  // namespace ronet
