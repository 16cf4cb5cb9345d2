#include "ronet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "ronet/errors.hpp"
#include "ronet/rank_one.hpp"

namespace ronet {
namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void require_same_shape(const Image& x, const Image& y, const char* what) {
  if (!x.same_shape(y)) {
    throw ShapeError(std::string(what) + ": shapes differ (" + x.shape_str() + " vs " +
                     y.shape_str() + ")");
  }
}

double mse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double m, double peak) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double total = 0.0;
  for (std::size_t k = 0; k < kWindow; ++k) {
    const double d = static_cast<double>(k) - static_cast<double>(kWindow / 2);
    g[k] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += g[k];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable valid-mode Gaussian filter of one plane.
Matrix filter_valid(const Matrix& m) {
  static const auto g = gaussian_window();
  const std::size_t oh = m.rows() - kWindow + 1;
  const std::size_t ow = m.cols() - kWindow + 1;
  Matrix tmp(m.rows(), ow);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * m(i, j + k);
      tmp(i, j) = acc;
    }
  }
  Matrix out(oh, ow);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * tmp(i + k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < out.data().size(); ++k) out.data()[k] = a.data()[k] * b.data()[k];
  return out;
}

double ssim_plane(const Matrix& x, const Matrix& y, double peak) {
  const double c1 = (kK1 * peak) * (kK1 * peak);
  const double c2 = (kK2 * peak) * (kK2 * peak);
  const Matrix mx = filter_valid(x);
  const Matrix my = filter_valid(y);
  const Matrix sxx = filter_valid(product(x, x));
  const Matrix syy = filter_valid(product(y, y));
  const Matrix sxy = filter_valid(product(x, y));
  double acc = 0.0;
  const auto n = mx.data().size();
  for (std::size_t k = 0; k < n; ++k) {
    const double ux = mx.data()[k];
    const double uy = my.data()[k];
    const double vx = sxx.data()[k] - ux * ux;
    const double vy = syy.data()[k] - uy * uy;
    const double cxy = sxy.data()[k] - ux * uy;
    acc += ((2 * ux * uy + c1) * (2 * cxy + c2)) /
           ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(n);
}

using WindowScore = std::function<double(const Image&, const Image&)>;

ShiftedScore shifted_search(const Image& restored, const Image& reference, std::size_t crop,
                            std::size_t max_shift, ShiftSearch search,
                            const WindowScore& score) {
  require_same_shape(restored, reference, "shifted_max");
  const std::size_t need = crop + 2 * max_shift;
  if (crop == 0 || restored.height < need || restored.width < need) {
    throw ArgumentError("shifted_max: image " + restored.shape_str() + " too small for crop " +
                        std::to_string(crop) + " with shift " + std::to_string(max_shift));
  }
  const std::size_t y0 = (restored.height - crop) / 2;
  const std::size_t x0 = (restored.width - crop) / 2;
  const Image window = restored.crop(y0, x0, crop, crop);
  const int s = static_cast<int>(max_shift);
  ShiftedScore best{-std::numeric_limits<double>::infinity(), 0, 0};
  bool first = true;
  for (int dy = -s; dy <= s; ++dy) {
    for (int dx = -s; dx <= s; ++dx) {
      if (search == ShiftSearch::kAxisOnly && dy != 0 && dx != 0) continue;
      const Image ref = reference.crop(static_cast<std::size_t>(static_cast<int>(y0) + dy),
                                       static_cast<std::size_t>(static_cast<int>(x0) + dx),
                                       crop, crop);
      const double v = score(window, ref);
      const int dist = std::abs(dy) + std::abs(dx);
      if (first || v > best.value ||
          (v == best.value && dist < std::abs(best.dy) + std::abs(best.dx))) {
        best = {v, dy, dx};
        first = false;
      }
    }
  }
  return best;
}

double dynamic_range(const Image& img) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double range = *hi - *lo;
  return range > 0.0 ? range : 1.0;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

double psnr(const Image& x, const Image& y, double peak) {
  require_same_shape(x, y, "psnr");
  if (x.data.empty()) throw ShapeError("psnr: empty image");
  return psnr_from_mse(mse(x.data, y.data), peak);
}

std::string format_psnr(double db) {
  if (std::isinf(db) && db > 0) return kIdenticalSentinel;
  return format_double(db);
}

double ssim(const Image& x, const Image& y, double peak) {
  require_same_shape(x, y, "ssim");
  if (x.height < kWindow || x.width < kWindow) {
    throw ShapeError("ssim: minimum dimension is 11, got " + x.shape_str());
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < x.channels; ++c) acc += ssim_plane(x.plane(c), y.plane(c), peak);
  return acc / static_cast<double>(x.channels);
}

Matrix y_channel(const Image& rgb) {
  if (rgb.channels != 3) {
    throw ShapeError("y_channel: expected 3 channels, got " + rgb.shape_str());
  }
  Matrix out(rgb.height, rgb.width);
  for (std::size_t i = 0; i < rgb.height; ++i) {
    for (std::size_t j = 0; j < rgb.width; ++j) {
      out(i, j) = 16.0 + 65.481 * rgb.at(0, i, j) + 128.553 * rgb.at(1, i, j) +
                  24.966 * rgb.at(2, i, j);
    }
  }
  return out;
}

double y_channel_psnr(const Image& x, const Image& y, std::size_t border) {
  require_same_shape(x, y, "y_channel_psnr");
  if (x.height < 2 * border + 1 || x.width < 2 * border + 1) {
    throw ShapeError("y_channel_psnr: image " + x.shape_str() + " smaller than border " +
                     std::to_string(border));
  }
  const Matrix yx = y_channel(x);
  const Matrix yy = y_channel(y);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = border; i < x.height - border; ++i) {
    for (std::size_t j = border; j < x.width - border; ++j) {
      const double d = yx(i, j) - yy(i, j);
      acc += d * d;
      ++n;
    }
  }
  return psnr_from_mse(acc / static_cast<double>(n), 255.0);
}

ShiftedScore shifted_max_psnr(const Image& restored, const Image& reference, std::size_t crop,
                              std::size_t max_shift, ShiftSearch search) {
  return shifted_search(restored, reference, crop, max_shift, search,
                        [](const Image& a, const Image& b) { return psnr(a, b); });
}

ShiftedScore shifted_max_ssim(const Image& restored, const Image& reference, std::size_t crop,
                              std::size_t max_shift, ShiftSearch search) {
  return shifted_search(restored, reference, crop, max_shift, search,
                        [](const Image& a, const Image& b) { return ssim(a, b); });
}

std::vector<double> ro_component_psnr_curve(const Image& estimate, const Image& truth,
                                            std::size_t count) {
  require_same_shape(estimate, truth, "ro_component_psnr");
  if (count == 0) throw ArgumentError("ro_component_psnr: component index starts at 1");
  if (count > std::min(truth.height, truth.width)) {
    throw ArgumentError("ro_component_psnr: index " + std::to_string(count) +
                        " exceeds min(m, n) for " + truth.shape_str());
  }
  const double peak = dynamic_range(truth);
  const Decomposition de = svd_decompose(estimate, count);
  const Decomposition dt = svd_decompose(truth, count);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t l = 0; l < count; ++l) {
    out.push_back(psnr(component_image(de, l), component_image(dt, l), peak));
  }
  return out;
}

double ro_component_psnr(const Image& estimate, const Image& truth, std::size_t i) {
  if (i == 0) throw ArgumentError("ro_component_psnr: component index starts at 1");
  return ro_component_psnr_curve(estimate, truth, i).back();
}

double MetricReport::mean_psnr() const {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.psnr;
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim() const {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.ssim;
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

void MetricReport::write_csv(std::ostream& os) const {
  os << "image-id,protocol,psnr,ssim\n";
  std::map<std::string, MetricReport> by_protocol;
  for (const auto& r : rows) {
    os << r.image_id << ',' << r.protocol << ',' << format_psnr(r.psnr) << ','
       << format_double(r.ssim) << '\n';
    by_protocol[r.protocol].rows.push_back(r);
  }
  for (const auto& [protocol, sub] : by_protocol) {
    os << "mean," << protocol << ',' << format_psnr(sub.mean_psnr()) << ','
       << format_double(sub.mean_ssim()) << '\n';
  }
}

}  // namespace ronet
