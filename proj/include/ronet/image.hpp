#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ronet/tensor.hpp"

namespace ronet {

// Row-major double matrix used by the exact rank-one machinery.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix transpose() const;
  double frobenius_norm() const;
  double max_abs() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Planar (channel, height, width) image. Pixel values live on the internal
// [0, 1] scale; degradations may push them outside until export.
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  bool same_shape(const Image& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }
  std::string shape_str() const;

  Matrix plane(std::size_t c) const;
  void set_plane(std::size_t c, const Matrix& m);
  // Sub-image starting at (y, x).
  Image crop(std::size_t y, std::size_t x, std::size_t h, std::size_t w) const;
};

Image image_from_planes(std::span<const Matrix> planes);

// Stacks same-shaped images into a [N,C,H,W] tensor.
Tensor to_tensor(std::span<const Image> images);
Tensor to_tensor(const Image& image);
// Sample `n` of a [N,C,H,W] tensor.
Image image_from_tensor(const Tensor& t, std::size_t n = 0);

}  // namespace ronet
