#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ronet/image.hpp"

namespace ronet {

// All metrics take images on the internal [0, 1] scale, where a peak of 1 is
// the 0-255 convention divided through. Identical inputs give +infinity,
// which reports spell "identical".
inline constexpr const char* kIdenticalSentinel = "identical";

double psnr(const Image& x, const Image& y, double peak = 1.0);
std::string format_psnr(double db);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03), averaged over
// valid windows and channels.
double ssim(const Image& x, const Image& y, double peak = 1.0);

// Studio-swing luma on the 0-255 scale: 16 + 65.481 R + 128.553 G + 24.966 B.
Matrix y_channel(const Image& rgb);
// PSNR of the luma planes after removing `border` pixels on every side.
double y_channel_psnr(const Image& x, const Image& y, std::size_t border = 4);

enum class ShiftSearch { kFullGrid, kAxisOnly };

struct ShiftedScore {
  double value = 0.0;
  int dy = 0;  // offset of the matching reference window, rows
  int dx = 0;  // columns
};

// Center `crop` x `crop` window of `restored` compared against windows of
// `reference` translated by up to `max_shift` pixels; the best score wins,
// ties going to the smallest |dy| + |dx|.
ShiftedScore shifted_max_psnr(const Image& restored, const Image& reference,
                              std::size_t crop = 60, std::size_t max_shift = 40,
                              ShiftSearch search = ShiftSearch::kFullGrid);
ShiftedScore shifted_max_ssim(const Image& restored, const Image& reference,
                              std::size_t crop = 60, std::size_t max_shift = 40,
                              ShiftSearch search = ShiftSearch::kFullGrid);

// PSNR between the i-th (1-based) exact rank-one components of `estimate` and
// `truth`, with the peak set to the dynamic range of `truth`.
double ro_component_psnr(const Image& estimate, const Image& truth, std::size_t i);
// Values for i = 1..count from a single decomposition of each image.
std::vector<double> ro_component_psnr_curve(const Image& estimate, const Image& truth,
                                            std::size_t count);

struct MetricRow {
  std::string image_id;
  std::string protocol;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  double mean_psnr() const;
  double mean_ssim() const;
  // Header, one line per row, then a "mean" line per protocol.
  void write_csv(std::ostream& os) const;
};

}  // namespace ronet
