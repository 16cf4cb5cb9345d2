#include "ronet/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ronet/errors.hpp"

namespace ronet {
namespace {

// Mirror index into [0, n) (half-sample symmetric, as for MATLAB imresize).
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

struct Taps {
  std::vector<std::ptrdiff_t> first;  // first input index per output
  std::vector<std::vector<double>> weights;
};

Taps resample_taps(std::size_t out, std::size_t scale) {
  Taps t;
  const double s = static_cast<double>(scale);
  const double support = 2.0 * s;
  for (std::size_t o = 0; o < out; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * s - 0.5;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - support));
    const auto hi = static_cast<std::ptrdiff_t>(std::ceil(center + support));
    std::vector<double> w;
    double total = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double v = cubic_kernel((center - static_cast<double>(j)) / s);
      w.push_back(v);
      total += v;
    }
    for (double& v : w) v /= total;
    t.first.push_back(lo);
    t.weights.push_back(std::move(w));
  }
  return t;
}

void check_finite_nonneg(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ArgumentError(std::string(what) + " must be finite and non-negative");
  }
}

}  // namespace

std::string DegradationSpec::str() const {
  std::ostringstream os;
  switch (kind) {
    case DegradationKind::kAwgn:
      os << "awgn sigma=" << sigma << " seed=" << seed;
      break;
    case DegradationKind::kBicubicDown:
      os << "bicubic-down scale=" << scale
         << " kernel=catmull-rom(a=-0.5) antialias=width*scale boundary=symmetric";
      break;
    case DegradationKind::kMotionBlur:
      os << "motion-blur length=" << blur_length << " angle=" << blur_angle_deg
         << " boundary=replicate";
      break;
    case DegradationKind::kPoisson:
      os << "poisson peak=" << peak << " seed=" << seed;
      break;
  }
  return os.str();
}

Image awgn(const Image& img, double sigma, std::uint64_t seed) {
  check_finite_nonneg(sigma, "awgn: sigma");
  if (sigma > kMaxSigma) throw ArgumentError("awgn: sigma above 75");
  Image out = img;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma / 255.0);
  for (double& v : out.data) v += noise(rng);
  return out;
}

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

Image bicubic_downsample(const Image& img, std::size_t scale, DegradationLog* log) {
  if (scale < 1) throw ArgumentError("bicubic_downsample: scale must be >= 1");
  if (scale == 1) return img;
  const std::size_t h = img.height / scale * scale;
  const std::size_t w = img.width / scale * scale;
  if (h == 0 || w == 0) throw ArgumentError("bicubic_downsample: image smaller than scale");
  Image src = img;
  if (h != img.height || w != img.width) {
    if (log) {
      log->push_back("cropped " + img.shape_str() + " to " + std::to_string(h) + "x" +
                     std::to_string(w) + " for scale " + std::to_string(scale));
    }
    src = img.crop(0, 0, h, w);
  }
  const std::size_t oh = h / scale;
  const std::size_t ow = w / scale;
  const Taps rows = resample_taps(oh, scale);
  const Taps cols = resample_taps(ow, scale);

  // Horizontal pass, then vertical.
  Image tmp(src.channels, h, ow);
  for (std::size_t c = 0; c < src.channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        const auto& wt = cols.weights[x];
        for (std::size_t k = 0; k < wt.size(); ++k) {
          const auto j = reflect(cols.first[x] + static_cast<std::ptrdiff_t>(k),
                                 static_cast<std::ptrdiff_t>(w));
          acc += wt[k] * src.at(c, y, static_cast<std::size_t>(j));
        }
        tmp.at(c, y, x) = acc;
      }
    }
  }
  Image out(src.channels, oh, ow);
  for (std::size_t c = 0; c < src.channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      const auto& wt = rows.weights[y];
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < wt.size(); ++k) {
          const auto i = reflect(rows.first[y] + static_cast<std::ptrdiff_t>(k),
                                 static_cast<std::ptrdiff_t>(h));
          acc += wt[k] * tmp.at(c, static_cast<std::size_t>(i), x);
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

Matrix motion_kernel(std::size_t length, double angle_deg) {
  if (length < 1) throw ArgumentError("motion_blur: length must be >= 1");
  if (!std::isfinite(angle_deg)) throw ArgumentError("motion_blur: angle must be finite");
  const std::size_t half = length / 2;
  const std::size_t size = 2 * half + 1;
  Matrix k(size, size);
  if (length == 1) {
    k(0, 0) = 1.0;
    return k;
  }
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(theta);
  const double dy = -std::sin(theta);
  // Sample the segment densely and splat bilinearly.
  const std::size_t samples = 16 * length;
  const double span = static_cast<double>(length - 1);
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = (static_cast<double>(s) / static_cast<double>(samples - 1) - 0.5) * span;
    const double x = static_cast<double>(half) + t * dx;
    const double y = static_cast<double>(half) + t * dy;
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double ax = x - fx;
    const double ay = y - fy;
    const auto splat = [&](double yy, double xx, double wgt) {
      if (wgt <= 0.0 || yy < 0 || xx < 0 || yy >= static_cast<double>(size) ||
          xx >= static_cast<double>(size)) {
        return;
      }
      k(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) += wgt;
    };
    splat(fy, fx, (1 - ax) * (1 - ay));
    splat(fy, fx + 1, ax * (1 - ay));
    splat(fy + 1, fx, (1 - ax) * ay);
    splat(fy + 1, fx + 1, ax * ay);
  }
  double total = 0.0;
  for (double v : k.data()) total += v;
  for (double& v : k.data()) v /= total;
  return k;
}

Image motion_blur(const Image& img, std::size_t length, double angle_deg) {
  const Matrix k = motion_kernel(length, angle_deg);
  if (length == 1) return img;
  const auto half = static_cast<std::ptrdiff_t>(k.rows() / 2);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  Image out(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -half; i <= half; ++i) {
          const auto yy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y + i, 0, h - 1));
          for (std::ptrdiff_t j = -half; j <= half; ++j) {
            const double kv = k(static_cast<std::size_t>(i + half), static_cast<std::size_t>(j + half));
            if (kv == 0.0) continue;
            const auto xx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x + j, 0, w - 1));
            acc += kv * img.at(c, yy, xx);
          }
        }
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
      }
    }
  }
  return out;
}

Image poisson_noise(const Image& img, double peak, std::uint64_t seed) {
  if (!std::isfinite(peak) || peak <= 0.0) throw ArgumentError("poisson_noise: peak must be > 0");
  std::mt19937_64 rng(seed);
  Image out = img;
  for (double& v : out.data) {
    const double mean = std::max(v, 0.0) * peak;
    if (mean == 0.0) {
      v = 0.0;
      continue;
    }
    std::poisson_distribution<long long> dist(mean);
    v = static_cast<double>(dist(rng)) / peak;
  }
  return out;
}

Image apply(const Image& img, const DegradationSpec& spec, DegradationLog* log) {
  switch (spec.kind) {
    case DegradationKind::kAwgn:
      return awgn(img, spec.sigma, spec.seed);
    case DegradationKind::kBicubicDown:
      return bicubic_downsample(img, spec.scale, log);
    case DegradationKind::kMotionBlur:
      return motion_blur(img, spec.blur_length, spec.blur_angle_deg);
    case DegradationKind::kPoisson:
      return poisson_noise(img, spec.peak, spec.seed);
  }
  throw ArgumentError("unknown degradation kind");
}

Image compose(const Image& img, std::span<const DegradationSpec> chain, DegradationLog* log) {
  Image out = img;
  for (const auto& spec : chain) out = apply(out, spec, log);
  return out;
}

std::vector<DegradationSpec> realistic_chain(std::size_t scale, std::size_t blur_length,
                                             double blur_angle_deg, double peak,
                                             std::uint64_t seed) {
  DegradationSpec blur;
  blur.kind = DegradationKind::kMotionBlur;
  blur.blur_length = blur_length;
  blur.blur_angle_deg = blur_angle_deg;
  blur.seed = seed;
  DegradationSpec down;
  down.kind = DegradationKind::kBicubicDown;
  down.scale = scale;
  down.seed = seed;
  DegradationSpec noise;
  noise.kind = DegradationKind::kPoisson;
  noise.peak = peak;
  noise.seed = seed;
  return {blur, down, noise};
}

}  // namespace ronet
