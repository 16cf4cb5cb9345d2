#include "ronet/patches.hpp"

#include <algorithm>

#include "ronet/errors.hpp"

namespace ronet {
namespace {

void copy_patch(const Image& img, std::size_t y, std::size_t x, std::size_t size, float* dst) {
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) {
        *dst++ = static_cast<float>(img.at(c, y + i, x + j));
      }
    }
  }
}

std::size_t common_channels(std::span<const Image> images,
                            const std::vector<std::size_t>& eligible) {
  const std::size_t c = images[eligible.front()].channels;
  for (std::size_t i : eligible) {
    if (images[i].channels != c) throw ShapeError("patch sampler: images differ in channel count");
  }
  return c;
}

}  // namespace

PatchSampler::PatchSampler(std::span<const Image> images, std::size_t patch,
                           std::uint64_t seed)
    : images_(images), patch_(patch), rng_(seed) {
  if (patch == 0) throw ArgumentError("patch sampler: patch size must be positive");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height >= patch && images[i].width >= patch) {
      eligible_.push_back(i);
    } else {
      warnings_.push_back("skipped image " + std::to_string(i) + " (" +
                          images[i].shape_str() + ") smaller than patch " +
                          std::to_string(patch));
    }
  }
  if (eligible_.empty()) throw ArgumentError("patch sampler: no image is at least patch-sized");
  common_channels(images_, eligible_);
}

PatchBatch PatchSampler::next(std::size_t count) {
  const std::size_t c = images_[eligible_.front()].channels;
  PatchBatch out;
  out.batch = Tensor(Shape{count, c, patch_, patch_});
  auto dst = out.batch.mutable_data();
  const std::size_t block = c * patch_ * patch_;
  std::uniform_int_distribution<std::size_t> pick(0, eligible_.size() - 1);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t idx = eligible_[pick(rng_)];
    const Image& img = images_[idx];
    std::uniform_int_distribution<std::size_t> ys(0, img.height - patch_);
    std::uniform_int_distribution<std::size_t> xs(0, img.width - patch_);
    const std::size_t y = ys(rng_);
    const std::size_t x = xs(rng_);
    copy_patch(img, y, x, patch_, dst.data() + n * block);
    out.origins.push_back({idx, y, x});
  }
  return out;
}

PairedPatchSampler::PairedPatchSampler(std::span<const Image> sources,
                                       std::span<const Image> targets, std::size_t patch,
                                       std::size_t scale, std::uint64_t seed)
    : sources_(sources), targets_(targets), patch_(patch), scale_(scale), rng_(seed) {
  if (sources.size() != targets.size()) {
    throw ArgumentError("paired sampler: " + std::to_string(sources.size()) + " sources for " +
                        std::to_string(targets.size()) + " targets");
  }
  if (patch == 0 || scale == 0) throw ArgumentError("paired sampler: patch and scale must be positive");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Image& s = sources[i];
    const Image& t = targets[i];
    if (t.height < s.height * scale || t.width < s.width * scale || s.channels != t.channels) {
      throw ShapeError("paired sampler: target " + t.shape_str() + " does not cover source " +
                       s.shape_str() + " at scale " + std::to_string(scale));
    }
    if (s.height >= patch && s.width >= patch) {
      eligible_.push_back(i);
    } else {
      warnings_.push_back("skipped pair " + std::to_string(i) + " (" + s.shape_str() +
                          ") smaller than patch " + std::to_string(patch));
    }
  }
  if (eligible_.empty()) throw ArgumentError("paired sampler: no source is at least patch-sized");
  common_channels(sources_, eligible_);
}

PairedPatchBatch PairedPatchSampler::next(std::size_t count) {
  const std::size_t c = sources_[eligible_.front()].channels;
  const std::size_t big = patch_ * scale_;
  PairedPatchBatch out;
  out.source = Tensor(Shape{count, c, patch_, patch_});
  out.target = Tensor(Shape{count, c, big, big});
  auto src = out.source.mutable_data();
  auto dst = out.target.mutable_data();
  std::uniform_int_distribution<std::size_t> pick(0, eligible_.size() - 1);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t idx = eligible_[pick(rng_)];
    const Image& s = sources_[idx];
    std::uniform_int_distribution<std::size_t> ys(0, s.height - patch_);
    std::uniform_int_distribution<std::size_t> xs(0, s.width - patch_);
    const std::size_t y = ys(rng_);
    const std::size_t x = xs(rng_);
    copy_patch(s, y, x, patch_, src.data() + n * c * patch_ * patch_);
    copy_patch(targets_[idx], y * scale_, x * scale_, big, dst.data() + n * c * big * big);
    out.origins.push_back({idx, y, x});
  }
  return out;
}

PatchBatch sample_patches(std::span<const Image> images, std::size_t patch, std::size_t count,
                          std::uint64_t seed) {
  PatchSampler sampler(images, patch, seed);
  return sampler.next(count);
}

}  // namespace ronet
