#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ronet/tensor.hpp"

namespace ronet {

// Named, ordered collection of tensors. Handles share storage with the
// networks that own them, so updating an entry updates the network.
class ModelWeights {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor tensor);
  // Appends every entry of `other`, prefixing names with `prefix`.
  void append(const ModelWeights& other, std::string_view prefix = {});

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  // Entries whose names start with `prefix`, with the prefix stripped.
  ModelWeights subset(std::string_view prefix) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Number of scalar values in tensors that require gradients.
  std::size_t parameter_count() const;
  void zero_grad();
  // Marks every tensor except batch-norm running statistics as trainable (or
  // freezes all of them).
  void set_trainable(bool on);

  // FNV-1a 64 over names, shapes and raw float bytes.
  std::uint64_t content_hash() const;
  std::string content_hash_hex() const;

 private:
  std::vector<Entry> entries_;
};

bool is_running_statistic(std::string_view name);

// True when both collections hold the same names, shapes and bit patterns.
bool bit_identical(const ModelWeights& a, const ModelWeights& b);

enum class Initializer {
  kXavierUniform,  // U(-a, a), a = sqrt(6 / (fan_in + fan_out))
  kMsraNormal,     // N(0, 2 / fan_in)
};

Initializer parse_initializer(std::string_view name);
std::string_view to_string(Initializer init);

// Kernel tensor [cout, cin, kh, kw] drawn from `init`.
Tensor init_kernel(std::size_t cout, std::size_t cin, std::size_t kh,
                   std::size_t kw, Initializer init, std::mt19937_64& rng);

}  // namespace ronet
