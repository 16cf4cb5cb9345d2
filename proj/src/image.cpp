#include "ronet/image.hpp"

#include <algorithm>
#include <cmath>

namespace ronet {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix: " + std::to_string(data_.size()) +
                     " values for " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError("matrix +=: shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError("matrix -=: shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

std::string Image::shape_str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width);
}

Matrix Image::plane(std::size_t c) const {
  const std::size_t n = height * width;
  return Matrix(height, width,
                std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(c * n),
                                    data.begin() + static_cast<std::ptrdiff_t>((c + 1) * n)));
}

void Image::set_plane(std::size_t c, const Matrix& m) {
  if (m.rows() != height || m.cols() != width) {
    throw ShapeError("image: plane shape mismatch");
  }
  std::copy(m.data().begin(), m.data().end(),
            data.begin() + static_cast<std::ptrdiff_t>(c * height * width));
}

Image Image::crop(std::size_t y, std::size_t x, std::size_t h, std::size_t w) const {
  if (y + h > height || x + w > width) {
    throw ShapeError("image: crop " + std::to_string(h) + "x" + std::to_string(w) +
                     " at (" + std::to_string(y) + "," + std::to_string(x) +
                     ") exceeds " + shape_str());
  }
  Image out(channels, h, w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) out.at(c, i, j) = at(c, y + i, x + j);
    }
  }
  return out;
}

Image image_from_planes(std::span<const Matrix> planes) {
  if (planes.empty()) return {};
  Image out(planes.size(), planes[0].rows(), planes[0].cols());
  for (std::size_t c = 0; c < planes.size(); ++c) out.set_plane(c, planes[c]);
  return out;
}

Tensor to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_tensor: no images");
  const Image& first = images[0];
  Tensor t(Shape{images.size(), first.channels, first.height, first.width});
  auto dst = t.mutable_data();
  const std::size_t block = first.data.size();
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (!images[n].same_shape(first)) {
      throw ShapeError("to_tensor: image " + std::to_string(n) + " is " +
                       images[n].shape_str() + ", expected " + first.shape_str());
    }
    for (std::size_t k = 0; k < block; ++k) {
      dst[n * block + k] = static_cast<float>(images[n].data[k]);
    }
  }
  return t;
}

Tensor to_tensor(const Image& image) { return to_tensor(std::span<const Image>(&image, 1)); }

Image image_from_tensor(const Tensor& t, std::size_t n) {
  if (t.shape().rank() != 4 || n >= t.dim(0)) {
    throw ShapeError("image_from_tensor: bad shape " + t.shape().str());
  }
  Image out(t.dim(1), t.dim(2), t.dim(3));
  const std::size_t block = out.data.size();
  auto src = t.data();
  for (std::size_t k = 0; k < block; ++k) out.data[k] = src[n * block + k];
  return out;
}

}  // namespace ronet
