#pragma once

#include <cstddef>
#include <span>

#include "ronet/tensor.hpp"

// Differentiable primitives. Every function records onto the thread's active
// tape when one is installed and at least one operand requires a gradient.
// Implemented for float and double.
namespace ronet::ops {

// Zero padding added on each side of the spatial axes.
struct Padding {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Stride-1 cross-correlation. `bias` may be undefined. The default padding
// keeps the spatial size ("same" mode), which requires odd kernel extents.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias);
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, Padding pad);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

// [N,C,H,W] -> [N,C,H,1], mean over the width axis.
template <typename T>
BasicTensor<T> avg_pool_to_column(const BasicTensor<T>& x);
// [N,C,H,W] -> [N,C,1,W], mean over the height axis.
template <typename T>
BasicTensor<T> avg_pool_to_row(const BasicTensor<T>& x);
// [N,C,H,1] x [N,C,1,W] -> [N,C,H,W].
template <typename T>
BasicTensor<T> outer_product(const BasicTensor<T>& col, const BasicTensor<T>& row);

// Depth-to-space: [N,C*r*r,H,W] -> [N,C,r*H,r*W] with
// out[n,c,h*r+i,w*r+j] = in[n,c*r*r+i*r+j,h,w].
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::size_t r);
template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& x, std::size_t r);

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts);

// Forward differences along width (axis 3) or height (axis 2); the output
// is one shorter along that axis.
template <typename T>
BasicTensor<T> first_difference(const BasicTensor<T>& x, std::size_t axis);

enum class BnMode { kTrain, kEval };

// Per-channel running statistics. Updated in place in training mode.
template <typename T>
struct BatchNormStats {
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;

  static BatchNormStats initial(std::size_t channels) {
    return {BasicTensor<T>(Shape{channels}, T{0}),
            BasicTensor<T>(Shape{channels}, T{1})};
  }
};

inline constexpr double kBnMomentum = 0.9;
inline constexpr double kBnEpsilon = 1e-5;

// Training mode normalizes with biased batch statistics over (N,H,W) and
// updates running = momentum*running + (1-momentum)*batch. Evaluation mode
// normalizes with the running statistics.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormStats<T>& stats,
                          BnMode mode);

// Mean of |x-y|^alpha over all elements, alpha in {1, 2}.
template <typename T>
BasicTensor<T> loss_norm(const BasicTensor<T>& x, const BasicTensor<T>& y,
                         int alpha);

}  // namespace ronet::ops
