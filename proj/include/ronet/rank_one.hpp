#pragma once

#include <cstddef>
#include <vector>

#include "ronet/image.hpp"

namespace ronet {

// Leading singular triplet: x ~ sigma * u * v^T with unit u, v and the first
// nonzero entry of u non-negative.
struct SvdTriplet {
  double sigma = 0.0;
  std::vector<double> u;
  std::vector<double> v;

  Matrix dyad() const;
};

struct PowerIterationOptions {
  std::size_t max_iters = 500;
  double tol = 1e-10;
};

// Frobenius-optimal rank-one approximation by power iteration on x^T x,
// started from the normalized all-ones vector. An all-zero input yields
// sigma = 0 with canonical basis vectors.
SvdTriplet best_rank_one(const Matrix& x, PowerIterationOptions options = {});

// Output of an exact or learned rank-one decomposition, per channel:
// input = sum_l components[l][c] + residual[c].
struct Decomposition {
  std::vector<std::vector<Matrix>> components;  // [level][channel]
  std::vector<Matrix> residual;                 // [channel]
  std::vector<std::vector<double>> sigmas;      // [level][channel], oracle only

  std::size_t levels() const { return components.size(); }
  std::size_t channels() const { return residual.size(); }

  // sum_l components[l][c] for every channel.
  std::vector<Matrix> low_rank() const;
  // low_rank() + residual.
  std::vector<Matrix> reconstruct() const;
};

// Greedy deflation: L applications of best_rank_one, each on the remainder.
// Components past the numerical rank come out as zero matrices.
Decomposition svd_decompose(const Matrix& x, std::size_t levels,
                            PowerIterationOptions options = {});
// Each channel decomposed independently.
Decomposition svd_decompose(const Image& image, std::size_t levels,
                            PowerIterationOptions options = {});

// sigma_2 / sigma_1 from two deflation steps; 0 for the zero matrix.
double rank_one_defect(const Matrix& x);

Image component_image(const Decomposition& d, std::size_t level);
Image residual_image(const Decomposition& d);
Image low_rank_image(const Decomposition& d);

}  // namespace ronet
