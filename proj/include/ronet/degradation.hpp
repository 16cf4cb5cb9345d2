#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ronet/image.hpp"

namespace ronet {

enum class DegradationKind { kAwgn, kBicubicDown, kMotionBlur, kPoisson };

// One degradation step. `sigma` is quoted on the 0-255 scale; images are on
// the internal [0, 1] scale.
struct DegradationSpec {
  DegradationKind kind = DegradationKind::kAwgn;
  double sigma = 0.0;
  std::size_t scale = 1;
  std::size_t blur_length = 1;
  double blur_angle_deg = 0.0;
  double peak = 255.0;
  std::uint64_t seed = 0;

  std::string str() const;
};

// Notes emitted by degradations that had to adjust their input.
using DegradationLog = std::vector<std::string>;

inline constexpr double kMaxSigma = 75.0;

// Adds i.i.d. N(0, (sigma/255)^2) noise. No clipping.
Image awgn(const Image& img, double sigma, std::uint64_t seed);

// Antialiased Catmull-Rom (a = -0.5) downsampling by an integer factor with
// symmetric boundary handling. Sizes not divisible by `scale` are cropped
// (bottom/right) and the crop is noted in `log`.
Image bicubic_downsample(const Image& img, std::size_t scale,
                         DegradationLog* log = nullptr);

// Cubic convolution kernel used by bicubic_downsample.
double cubic_kernel(double x);

// Normalized line kernel of `length` pixels at `angle_deg` (counter-clockwise
// from the x axis), as a square odd-sized matrix.
Matrix motion_kernel(std::size_t length, double angle_deg);
// Convolution with motion_kernel using replicated borders.
Image motion_blur(const Image& img, std::size_t length, double angle_deg);

// Poisson(img * peak) / peak per pixel; negative inputs count as zero.
Image poisson_noise(const Image& img, double peak, std::uint64_t seed);

Image apply(const Image& img, const DegradationSpec& spec, DegradationLog* log = nullptr);
// Applies `chain` left to right.
Image compose(const Image& img, std::span<const DegradationSpec> chain,
              DegradationLog* log = nullptr);

// Realistic-SR approximation: motion blur, bicubic downsampling, Poisson noise.
std::vector<DegradationSpec> realistic_chain(std::size_t scale, std::size_t blur_length,
                                             double blur_angle_deg, double peak,
                                             std::uint64_t seed);

}  // namespace ronet
