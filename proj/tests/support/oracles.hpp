#pragma once

// Independent reference implementations used only by tests. None of these
// share code with the library paths they check.

#include <cstdint>
#include <vector>

#include "ronet/image.hpp"
#include "ronet/rodec.hpp"
#include "ronet/rorec.hpp"

namespace ronet::testing {

// All singular values, descending, by one-sided Jacobi rotations.
std::vector<double> jacobi_singular_values(const Matrix& a);

// Same-padding cross-correlation by explicit loops in double precision.
std::vector<double> conv2d_loops(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// SSIM by visiting every 11x11 window directly (Gaussian weights, sigma 1.5).
double ssim_windows(const Matrix& x, const Matrix& y, double peak);

// Procedural test image with smooth shading, edges and mild texture, values
// inside [0.05, 0.95].
Image synthetic_image(std::size_t channels, std::size_t h, std::size_t w, std::uint64_t seed);
std::vector<Image> synthetic_set(std::size_t count, std::size_t channels, std::size_t h,
                                 std::size_t w, std::uint64_t seed);

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);
Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

RodecWeights random_rodec(std::size_t levels, std::size_t channels, std::size_t wide,
                          std::size_t narrow, std::uint64_t seed);

// A scale-1, BN-free RORec whose output equals sum(components) + residual,
// i.e. the source image itself.
RorecWeights identity_rorec(std::size_t levels, std::size_t channels);

}  // namespace ronet::testing
