#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ronet/image.hpp"

namespace ronet {

struct PatchOrigin {
  std::size_t image = 0;
  std::size_t y = 0;
  std::size_t x = 0;
};

struct PatchBatch {
  Tensor batch;  // [count, C, patch, patch]
  std::vector<PatchOrigin> origins;
};

struct PairedPatchBatch {
  Tensor source;  // [count, C, patch, patch]
  Tensor target;  // [count, C, patch*scale, patch*scale]
  std::vector<PatchOrigin> origins;  // source coordinates
};

// Draws patches with a uniformly chosen image and top-left corner. Images
// smaller than the patch are skipped and listed in warnings().
class PatchSampler {
 public:
  PatchSampler(std::span<const Image> images, std::size_t patch, std::uint64_t seed);

  PatchBatch next(std::size_t count);
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::span<const Image> images_;
  std::size_t patch_;
  std::vector<std::size_t> eligible_;
  std::vector<std::string> warnings_;
  std::mt19937_64 rng_;
};

// Source/target pairs where target[i] is `scale` times larger than
// source[i]; target corners are `scale` times the source corners.
class PairedPatchSampler {
 public:
  PairedPatchSampler(std::span<const Image> sources, std::span<const Image> targets,
                     std::size_t patch, std::size_t scale, std::uint64_t seed);

  PairedPatchBatch next(std::size_t count);
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::span<const Image> sources_;
  std::span<const Image> targets_;
  std::size_t patch_;
  std::size_t scale_;
  std::vector<std::size_t> eligible_;
  std::vector<std::string> warnings_;
  std::mt19937_64 rng_;
};

PatchBatch sample_patches(std::span<const Image> images, std::size_t patch,
                          std::size_t count, std::uint64_t seed);

}  // namespace ronet
