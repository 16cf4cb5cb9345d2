#include "ronet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

namespace ronet::ops {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
bool tracking(std::initializer_list<const BasicTensor<T>*> inputs) {
  if (active_tape<T>() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T, typename Fn>
void record(BasicTensor<T>& out, std::vector<BasicTensor<T>> inputs,
            Fn&& adjoint) {
  out.set_requires_grad(true);
  active_tape<T>()->record(std::move(inputs), out,
                           std::function<void()>(std::forward<Fn>(adjoint)));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
void require_rank4(const BasicTensor<T>& x, const char* op) {
  require(x.defined() && x.shape().rank() == 4,
          std::string(op) + ": expected a rank-4 tensor, got " +
              (x.defined() ? x.shape().str() : std::string("undefined")));
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      a.shape().str() + " vs " + b.shape().str());
}

struct ConvGeometry {
  std::size_t cin, h, w, kh, kw, ph, pw, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

// Column matrix of shape (cin*kh*kw) x (ho*wo) for one sample.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * pixels;
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(j) -
                                  static_cast<std::ptrdiff_t>(g.pw);
        const std::size_t ow_begin =
            static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dj));
        const std::size_t ow_end = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(g.w) - dj, 0,
            static_cast<std::ptrdiff_t>(g.wo)));
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          T* dst = row + oh * g.wo;
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + i) -
                                    static_cast<std::ptrdiff_t>(g.ph);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h) ||
              ow_begin >= ow_end) {
            std::fill(dst, dst + g.wo, T{0});
            continue;
          }
          std::fill(dst, dst + ow_begin, T{0});
          const T* src = x + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          std::memcpy(dst + ow_begin,
                      src + static_cast<std::ptrdiff_t>(ow_begin) + dj,
                      (ow_end - ow_begin) * sizeof(T));
          std::fill(dst + ow_end, dst + g.wo, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * pixels;
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(j) -
                                  static_cast<std::ptrdiff_t>(g.pw);
        const std::size_t ow_begin =
            static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dj));
        const std::size_t ow_end = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(g.w) - dj, 0,
            static_cast<std::ptrdiff_t>(g.wo)));
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + i) -
                                    static_cast<std::ptrdiff_t>(g.ph);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const T* src = row + oh * g.wo;
          T* dst = dx + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          for (std::size_t ow = ow_begin; ow < ow_end; ++ow) {
            dst[static_cast<std::ptrdiff_t>(ow) + dj] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T, typename Fn>
BasicTensor<T> unary(const BasicTensor<T>& x, Fn&& fn) {
  BasicTensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  return out;
}

double accumulate(std::span<const float> v) {
  double s = 0.0;
  for (float e : v) s += e;
  return s;
}
double accumulate(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e;
  return s;
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias) {
  require_rank4(kernels, "conv2d");
  require(kernels.dim(2) % 2 == 1 && kernels.dim(3) % 2 == 1,
          "conv2d: same padding needs odd kernel extents, got " +
              kernels.shape().str());
  return conv2d(input, kernels, bias, Padding{kernels.dim(2) / 2, kernels.dim(3) / 2});
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, Padding pad) {
  require_rank4(input, "conv2d");
  require_rank4(kernels, "conv2d");
  const std::size_t n = input.dim(0);
  const std::size_t cout = kernels.dim(0);
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernels.dim(2),
                 kernels.dim(3), pad.rows, pad.cols, 0, 0};
  require(kernels.dim(1) == g.cin,
          "conv2d: input has " + std::to_string(g.cin) +
              " channels but kernels expect " + std::to_string(kernels.dim(1)));
  require(g.h + 2 * g.ph >= g.kh && g.w + 2 * g.pw >= g.kw,
          "conv2d: kernel larger than padded input");
  if (bias.defined()) {
    require(bias.shape() == Shape{cout}, "conv2d: bias shape " +
                                             bias.shape().str() +
                                             " does not match " +
                                             std::to_string(cout) + " kernels");
  }
  g.ho = g.h + 2 * g.ph - g.kh + 1;
  g.wo = g.w + 2 * g.pw - g.kw + 1;

  BasicTensor<T> out(Shape{n, cout, g.ho, g.wo});
  AlignedVector<T> cols(g.patch() * g.pixels());
  ConstMatrixMap<T> wmat(kernels.data().data(), cout, g.patch());
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = cout * g.pixels();
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input.data().data() + s * in_stride, g, cols.data());
    ConstMatrixMap<T> cmat(cols.data(), g.patch(), g.pixels());
    MatrixMap<T> omat(out.mutable_data().data() + s * out_stride, cout,
                      g.pixels());
    omat.noalias() = wmat * cmat;
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c) omat.row(c).array() += bias.data()[c];
    }
  }

  if (tracking<T>({&input, &kernels, &bias})) {
    record(out, {input, kernels, bias},
           [input, kernels, bias, out, g, n, cout, in_stride, out_stride]() {
             auto gout = out.grad();
             AlignedVector<T> cols(g.patch() * g.pixels());
             ConstMatrixMap<T> wmat(kernels.data().data(), cout, g.patch());
             for (std::size_t s = 0; s < n; ++s) {
               ConstMatrixMap<T> gmat(gout.data() + s * out_stride, cout,
                                      g.pixels());
               if (kernels.requires_grad()) {
                 im2col(input.data().data() + s * in_stride, g, cols.data());
                 ConstMatrixMap<T> cmat(cols.data(), g.patch(), g.pixels());
                 MatrixMap<T> gw(kernels.grad_buffer().data(), cout, g.patch());
                 gw.noalias() += gmat * cmat.transpose();
               }
               if (bias.defined() && bias.requires_grad()) {
                 auto gb = bias.grad_buffer();
                 for (std::size_t c = 0; c < cout; ++c) gb[c] += gmat.row(c).sum();
               }
               if (input.requires_grad()) {
                 MatrixMap<T> dcols(cols.data(), g.patch(), g.pixels());
                 dcols.noalias() = wmat.transpose() * gmat;
                 col2im_accumulate(cols.data(), g,
                                   input.grad_buffer().data() + s * in_stride);
               }
             }
           });
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  auto out = unary(x, [](T v) { return v > T{0} ? v : T{0}; });
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out]() {
      auto g = out.grad();
      auto src = x.data();
      auto dx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (src[i] > T{0}) dx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> out(a.shape());
  auto pa = a.data();
  auto pb = b.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pa[i] + pb[i];
  if (tracking<T>({&a, &b})) {
    record(out, {a, b}, [a, b, out]() {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  BasicTensor<T> out(a.shape());
  auto pa = a.data();
  auto pb = b.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pa[i] - pb[i];
  if (tracking<T>({&a, &b})) {
    record(out, {a, b}, [a, b, out]() {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  BasicTensor<T> out(a.shape());
  auto pa = a.data();
  auto pb = b.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pa[i] * pb[i];
  if (tracking<T>({&a, &b})) {
    record(out, {a, b}, [a, b, out]() {
      auto g = out.grad();
      auto pa = a.data();
      auto pb = b.data();
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * pb[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * pa[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  auto out = unary(x, [factor](T v) { return v * factor; });
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, factor]() {
      auto g = out.grad();
      auto dx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  auto out = BasicTensor<T>::scalar(static_cast<T>(accumulate(x.data())));
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out]() {
      const T g = out.grad()[0];
      for (T& d : x.grad_buffer()) d += g;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  require(x.numel() > 0, "mean: empty tensor");
  const double count = static_cast<double>(x.numel());
  auto out = BasicTensor<T>::scalar(static_cast<T>(accumulate(x.data()) / count));
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, count]() {
      const T g = static_cast<T>(out.grad()[0] / count);
      for (T& d : x.grad_buffer()) d += g;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> avg_pool_to_column(const BasicTensor<T>& x) {
  require_rank4(x, "avg_pool_to_column");
  const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2);
  const std::size_t w = x.dim(3);
  require(w >= 1, "avg_pool_to_column: empty width");
  BasicTensor<T> out(Shape{x.dim(0), x.dim(1), x.dim(2), 1});
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += src[r * w + j];
    dst[r] = static_cast<T>(s / static_cast<double>(w));
  }
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, rows, w]() {
      auto g = out.grad();
      auto dx = x.grad_buffer();
      const T inv = T{1} / static_cast<T>(w);
      for (std::size_t r = 0; r < rows; ++r) {
        const T gr = g[r] * inv;
        for (std::size_t j = 0; j < w; ++j) dx[r * w + j] += gr;
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> avg_pool_to_row(const BasicTensor<T>& x) {
  require_rank4(x, "avg_pool_to_row");
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  require(h >= 1, "avg_pool_to_row: empty height");
  BasicTensor<T> out(Shape{x.dim(0), x.dim(1), 1, w});
  auto src = x.data();
  auto dst = out.mutable_data();
  std::vector<double> acc(w);
  for (std::size_t p = 0; p < planes; ++p) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) acc[j] += src[(p * h + i) * w + j];
    }
    for (std::size_t j = 0; j < w; ++j) {
      dst[p * w + j] = static_cast<T>(acc[j] / static_cast<double>(h));
    }
  }
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, planes, h, w]() {
      auto g = out.grad();
      auto dx = x.grad_buffer();
      const T inv = T{1} / static_cast<T>(h);
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < w; ++j) {
            dx[(p * h + i) * w + j] += g[p * w + j] * inv;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> outer_product(const BasicTensor<T>& col, const BasicTensor<T>& row) {
  require_rank4(col, "outer_product");
  require_rank4(row, "outer_product");
  require(col.dim(3) == 1 && row.dim(2) == 1,
          "outer_product: expected [N,C,H,1] and [N,C,1,W], got " +
              col.shape().str() + " and " + row.shape().str());
  require(col.dim(0) == row.dim(0) && col.dim(1) == row.dim(1),
          "outer_product: batch/channel mismatch " + col.shape().str() +
              " vs " + row.shape().str());
  const std::size_t planes = col.dim(0) * col.dim(1);
  const std::size_t h = col.dim(2);
  const std::size_t w = row.dim(3);
  BasicTensor<T> out(Shape{col.dim(0), col.dim(1), h, w});
  auto pc = col.data();
  auto pr = row.data();
  auto dst = out.mutable_data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < h; ++i) {
      const T ci = pc[p * h + i];
      T* o = dst.data() + (p * h + i) * w;
      const T* r = pr.data() + p * w;
      for (std::size_t j = 0; j < w; ++j) o[j] = ci * r[j];
    }
  }
  if (tracking<T>({&col, &row})) {
    record(out, {col, row}, [col, row, out, planes, h, w]() {
      auto g = out.grad();
      auto pc = col.data();
      auto pr = row.data();
      if (col.requires_grad()) {
        auto dc = col.grad_buffer();
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t i = 0; i < h; ++i) {
            T s{0};
            for (std::size_t j = 0; j < w; ++j) {
              s += g[(p * h + i) * w + j] * pr[p * w + j];
            }
            dc[p * h + i] += s;
          }
        }
      }
      if (row.requires_grad()) {
        auto dr = row.grad_buffer();
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t i = 0; i < h; ++i) {
            const T ci = pc[p * h + i];
            for (std::size_t j = 0; j < w; ++j) {
              dr[p * w + j] += g[(p * h + i) * w + j] * ci;
            }
          }
        }
      }
    });
  }
  return out;
}

namespace {

// Calls visit(src_index, dst_index) for every element of the shuffle that
// maps [N,C*r*r,H,W] onto [N,C,r*H,r*W].
template <typename Fn>
void for_each_shuffle(std::size_t n, std::size_t c, std::size_t h,
                      std::size_t w, std::size_t r, Fn&& visit) {
  const std::size_t oh = h * r;
  const std::size_t ow = w * r;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
          const std::size_t src_plane = (s * c * r * r) + ch * r * r + i * r + j;
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              const std::size_t src = (src_plane * h + y) * w + x;
              const std::size_t dst =
                  ((s * c + ch) * oh + y * r + i) * ow + x * r + j;
              visit(src, dst);
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::size_t r) {
  require_rank4(x, "pixel_shuffle");
  require(r >= 1 && x.dim(1) % (r * r) == 0,
          "pixel_shuffle: " + std::to_string(x.dim(1)) +
              " channels not divisible by r^2 = " + std::to_string(r * r));
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1) / (r * r);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  BasicTensor<T> out(Shape{n, c, h * r, w * r});
  auto src = x.data();
  auto dst = out.mutable_data();
  for_each_shuffle(n, c, h, w, r, [&](std::size_t s, std::size_t d) { dst[d] = src[s]; });
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, n, c, h, w, r]() {
      auto g = out.grad();
      auto dx = x.grad_buffer();
      for_each_shuffle(n, c, h, w, r,
                       [&](std::size_t s, std::size_t d) { dx[s] += g[d]; });
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& x, std::size_t r) {
  require_rank4(x, "pixel_unshuffle");
  require(r >= 1 && x.dim(2) % r == 0 && x.dim(3) % r == 0,
          "pixel_unshuffle: spatial extents of " + x.shape().str() +
              " not divisible by " + std::to_string(r));
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  const std::size_t h = x.dim(2) / r;
  const std::size_t w = x.dim(3) / r;
  BasicTensor<T> out(Shape{n, c * r * r, h, w});
  auto src = x.data();
  auto dst = out.mutable_data();
  for_each_shuffle(n, c, h, w, r, [&](std::size_t s, std::size_t d) { dst[s] = src[d]; });
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, n, c, h, w, r]() {
      auto g = out.grad();
      auto dx = x.grad_buffer();
      for_each_shuffle(n, c, h, w, r,
                       [&](std::size_t s, std::size_t d) { dx[d] += g[s]; });
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  for (const auto& p : parts) require_rank4(p, "concat_channels");
  const std::size_t n = parts[0].dim(0);
  const std::size_t h = parts[0].dim(2);
  const std::size_t w = parts[0].dim(3);
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require(p.dim(0) == n && p.dim(2) == h && p.dim(3) == w,
            "concat_channels: mismatched " + p.shape().str() + " vs " +
                parts[0].shape().str());
    channels += p.dim(1);
  }
  const std::size_t plane = h * w;
  BasicTensor<T> out(Shape{n, channels, h, w});
  auto dst = out.mutable_data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.dim(1) * plane;
    for (std::size_t s = 0; s < n; ++s) {
      std::copy_n(p.data().data() + s * block, block,
                  dst.data() + s * channels * plane + offset * plane);
    }
    offset += p.dim(1);
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (any && active_tape<T>() != nullptr) {
    std::vector<BasicTensor<T>> inputs(parts.begin(), parts.end());
    record(out, inputs, [inputs, out, n, channels, plane]() {
      auto g = out.grad();
      std::size_t offset = 0;
      for (const auto& p : inputs) {
        const std::size_t block = p.dim(1) * plane;
        if (p.requires_grad()) {
          auto dp = p.grad_buffer();
          for (std::size_t s = 0; s < n; ++s) {
            const T* src = g.data() + s * channels * plane + offset * plane;
            T* d = dp.data() + s * block;
            for (std::size_t k = 0; k < block; ++k) d[k] += src[k];
          }
        }
        offset += p.dim(1);
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> first_difference(const BasicTensor<T>& x, std::size_t axis) {
  require_rank4(x, "first_difference");
  require(axis == 2 || axis == 3, "first_difference: axis must be 2 or 3");
  require(x.dim(axis) >= 2, "first_difference: axis extent below 2");
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  const std::size_t oh = axis == 2 ? h - 1 : h;
  const std::size_t ow = axis == 3 ? w - 1 : w;
  const std::size_t step = axis == 3 ? 1 : w;
  BasicTensor<T> out(Shape{x.dim(0), x.dim(1), oh, ow});
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t base = (p * h + i) * w + j;
        dst[(p * oh + i) * ow + j] = src[base + step] - src[base];
      }
    }
  }
  if (tracking<T>({&x})) {
    record(out, {x}, [x, out, planes, h, w, oh, ow, step]() {
      auto g = out.grad();
      auto dx = x.grad_buffer();
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t j = 0; j < ow; ++j) {
            const std::size_t base = (p * h + i) * w + j;
            const T gv = g[(p * oh + i) * ow + j];
            dx[base + step] += gv;
            dx[base] -= gv;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormStats<T>& stats,
                          BnMode mode) {
  require_rank4(x, "batch_norm");
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  const Shape per_channel{c};
  require(gamma.shape() == per_channel && beta.shape() == per_channel &&
              stats.running_mean.shape() == per_channel &&
              stats.running_var.shape() == per_channel,
          "batch_norm: parameter shapes must be [" + std::to_string(c) + "]");
  const std::size_t count = n * plane;
  if (mode == BnMode::kTrain) {
    require(count >= 2, "batch_norm: training mode needs at least two values per channel");
  }

  auto src = x.data();
  std::vector<T> mu(c);
  std::vector<T> inv_std(c);
  if (mode == BnMode::kTrain) {
    auto rm = stats.running_mean.mutable_data();
    auto rv = stats.running_var.mutable_data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = src.data() + (b * c + ch) * plane;
        for (std::size_t k = 0; k < plane; ++k) s += p[k];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = src.data() + (b * c + ch) * plane;
        for (std::size_t k = 0; k < plane; ++k) {
          const double d = p[k] - m;
          v += d * d;
        }
      }
      v /= static_cast<double>(count);
      mu[ch] = static_cast<T>(m);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(v + kBnEpsilon));
      rm[ch] = static_cast<T>(kBnMomentum * rm[ch] + (1.0 - kBnMomentum) * m);
      rv[ch] = static_cast<T>(kBnMomentum * rv[ch] + (1.0 - kBnMomentum) * v);
    }
  } else {
    auto rm = stats.running_mean.data();
    auto rv = stats.running_var.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = rm[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[ch]) + kBnEpsilon));
    }
  }

  BasicTensor<T> out(x.shape());
  auto dst = out.mutable_data();
  auto pg = gamma.data();
  auto pb = beta.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        dst[off + k] = pg[ch] * (src[off + k] - mu[ch]) * inv_std[ch] + pb[ch];
      }
    }
  }

  if (tracking<T>({&x, &gamma, &beta})) {
    record(out, {x, gamma, beta},
           [x, gamma, beta, out, mu, inv_std, n, c, plane, count, mode]() {
             auto g = out.grad();
             auto src = x.data();
             auto pg = gamma.data();
             for (std::size_t ch = 0; ch < c; ++ch) {
               double sum_g = 0.0;
               double sum_gx = 0.0;
               for (std::size_t b = 0; b < n; ++b) {
                 const std::size_t off = (b * c + ch) * plane;
                 for (std::size_t k = 0; k < plane; ++k) {
                   const double xhat = (src[off + k] - mu[ch]) * inv_std[ch];
                   sum_g += g[off + k];
                   sum_gx += g[off + k] * xhat;
                 }
               }
               if (gamma.requires_grad()) gamma.grad_buffer()[ch] += static_cast<T>(sum_gx);
               if (beta.requires_grad()) beta.grad_buffer()[ch] += static_cast<T>(sum_g);
               if (!x.requires_grad()) continue;
               auto dx = x.grad_buffer();
               const double m = static_cast<double>(count);
               for (std::size_t b = 0; b < n; ++b) {
                 const std::size_t off = (b * c + ch) * plane;
                 for (std::size_t k = 0; k < plane; ++k) {
                   if (mode == BnMode::kTrain) {
                     const double xhat = (src[off + k] - mu[ch]) * inv_std[ch];
                     dx[off + k] += static_cast<T>(
                         pg[ch] * inv_std[ch] *
                         (g[off + k] - sum_g / m - xhat * sum_gx / m));
                   } else {
                     dx[off + k] += pg[ch] * inv_std[ch] * g[off + k];
                   }
                 }
               }
             }
           });
  }
  return out;
}

template <typename T>
BasicTensor<T> loss_norm(const BasicTensor<T>& x, const BasicTensor<T>& y,
                         int alpha) {
  require_same_shape(x, y, "loss_norm");
  if (alpha != 1 && alpha != 2) {
    throw ArgumentError("loss_norm: alpha must be 1 or 2, got " + std::to_string(alpha));
  }
  require(x.numel() > 0, "loss_norm: empty tensors");
  auto px = x.data();
  auto py = y.data();
  double s = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double d = static_cast<double>(px[i]) - static_cast<double>(py[i]);
    s += alpha == 2 ? d * d : std::abs(d);
  }
  const double count = static_cast<double>(px.size());
  auto out = BasicTensor<T>::scalar(static_cast<T>(s / count));
  if (tracking<T>({&x, &y})) {
    record(out, {x, y}, [x, y, out, alpha, count]() {
      const double g = out.grad()[0] / count;
      auto px = x.data();
      auto py = y.data();
      for (std::size_t i = 0; i < px.size(); ++i) {
        const double d = static_cast<double>(px[i]) - static_cast<double>(py[i]);
        double gi;
        if (alpha == 2) {
          gi = 2.0 * d * g;
        } else {
          gi = d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
        }
        if (x.requires_grad()) x.grad_buffer()[i] += static_cast<T>(gi);
        if (y.requires_grad()) y.grad_buffer()[i] -= static_cast<T>(gi);
      }
    });
  }
  return out;
}

#define RONET_INSTANTIATE_OPS(T)                                                      \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                 const BasicTensor<T>&);                              \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                 const BasicTensor<T>&, Padding);                     \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                            \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                 \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                \
  template BasicTensor<T> avg_pool_to_column(const BasicTensor<T>&);                  \
  template BasicTensor<T> avg_pool_to_row(const BasicTensor<T>&);                     \
  template BasicTensor<T> outer_product(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, std::size_t);          \
  template BasicTensor<T> pixel_unshuffle(const BasicTensor<T>&, std::size_t);        \
  template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);           \
  template BasicTensor<T> first_difference(const BasicTensor<T>&, std::size_t);       \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                     const BasicTensor<T>&, BatchNormStats<T>&,       \
                                     BnMode);                                         \
  template BasicTensor<T> loss_norm(const BasicTensor<T>&, const BasicTensor<T>&, int);

RONET_INSTANTIATE_OPS(float)
RONET_INSTANTIATE_OPS(double)

#undef RONET_INSTANTIATE_OPS

}  // namespace ronet::ops
