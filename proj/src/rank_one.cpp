#include "ronet/rank_one.hpp"

#include <cmath>
#include <random>

namespace ronet {
namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

// y = x * v
void multiply(const Matrix& x, const std::vector<double>& v, std::vector<double>& y) {
  y.assign(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * v[j];
    y[i] = s;
  }
}

// y = x^T * u
void multiply_transposed(const Matrix& x, const std::vector<double>& u,
                         std::vector<double>& y) {
  y.assign(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double ui = u[i];
    for (std::size_t j = 0; j < x.cols(); ++j) y[j] += x(i, j) * ui;
  }
}

// Relative size below which a deflated remainder counts as exhausted.
constexpr double kNegligible = 1e-13;

}  // namespace

Matrix SvdTriplet::dyad() const {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = sigma * u[i] * v[j];
  }
  return m;
}

SvdTriplet best_rank_one(const Matrix& x, PowerIterationOptions options) {
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (m == 0 || n == 0) throw ShapeError("best_rank_one: empty matrix");
  for (double e : x.data()) {
    if (!std::isfinite(e)) throw ArgumentError("best_rank_one: non-finite input");
  }

  SvdTriplet t;
  t.u.assign(m, 0.0);
  t.v.assign(n, 0.0);
  if (x.max_abs() == 0.0) {
    t.u[0] = 1.0;
    t.v[0] = 1.0;
    return t;
  }

  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> xv;
  std::vector<double> next;
  multiply(x, v, xv);
  if (norm(xv) <= kNegligible * x.frobenius_norm()) {
    // Start vector orthogonal to the row space: perturb deterministically.
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& e : v) e += noise(rng);
    const double nv = norm(v);
    for (double& e : v) e /= nv;
    multiply(x, v, xv);
  }

  for (std::size_t it = 0; it < options.max_iters; ++it) {
    multiply_transposed(x, xv, next);
    const double nn = norm(next);
    if (nn == 0.0) break;
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= nn;
      const double d = next[j] - v[j];
      diff += d * d;
    }
    v.swap(next);
    multiply(x, v, xv);
    if (std::sqrt(diff) < options.tol) break;
  }

  t.sigma = norm(xv);
  if (t.sigma > 0.0) {
    for (std::size_t i = 0; i < m; ++i) t.u[i] = xv[i] / t.sigma;
  } else {
    t.u[0] = 1.0;
  }
  t.v = std::move(v);
  for (double e : t.u) {
    if (e != 0.0) {
      if (e < 0.0) {
        for (double& a : t.u) a = -a;
        for (double& b : t.v) b = -b;
      }
      break;
    }
  }
  return t;
}

std::vector<Matrix> Decomposition::low_rank() const {
  std::vector<Matrix> out;
  for (std::size_t c = 0; c < channels(); ++c) {
    Matrix acc(residual[c].rows(), residual[c].cols());
    for (const auto& level : components) acc += level[c];
    out.push_back(std::move(acc));
  }
  return out;
}

std::vector<Matrix> Decomposition::reconstruct() const {
  auto out = low_rank();
  for (std::size_t c = 0; c < channels(); ++c) out[c] += residual[c];
  return out;
}

Decomposition svd_decompose(const Matrix& x, std::size_t levels,
                            PowerIterationOptions options) {
  if (levels < 1) throw ArgumentError("svd_decompose: need at least one level");
  Decomposition d;
  const double scale = x.frobenius_norm();
  Matrix remainder = x;
  for (std::size_t l = 0; l < levels; ++l) {
    Matrix component(x.rows(), x.cols());
    double sigma = 0.0;
    if (remainder.frobenius_norm() > kNegligible * scale) {
      SvdTriplet t = best_rank_one(remainder, options);
      if (t.sigma > kNegligible * scale) {
        component = t.dyad();
        sigma = t.sigma;
        remainder -= component;
      }
    }
    d.components.push_back({std::move(component)});
    d.sigmas.push_back({sigma});
  }
  d.residual.push_back(std::move(remainder));
  return d;
}

Decomposition svd_decompose(const Image& image, std::size_t levels,
                            PowerIterationOptions options) {
  Decomposition d;
  d.components.resize(levels);
  d.sigmas.resize(levels);
  for (std::size_t c = 0; c < image.channels; ++c) {
    Decomposition single = svd_decompose(image.plane(c), levels, options);
    for (std::size_t l = 0; l < levels; ++l) {
      d.components[l].push_back(std::move(single.components[l][0]));
      d.sigmas[l].push_back(single.sigmas[l][0]);
    }
    d.residual.push_back(std::move(single.residual[0]));
  }
  return d;
}

double rank_one_defect(const Matrix& x) {
  const SvdTriplet first = best_rank_one(x);
  if (first.sigma == 0.0) return 0.0;
  const Matrix rest = x - first.dyad();
  const SvdTriplet second = best_rank_one(rest);
  return second.sigma / first.sigma;
}

Image component_image(const Decomposition& d, std::size_t level) {
  return image_from_planes(d.components.at(level));
}

Image residual_image(const Decomposition& d) { return image_from_planes(d.residual); }

Image low_rank_image(const Decomposition& d) {
  const auto planes = d.low_rank();
  return image_from_planes(planes);
}

}  // namespace ronet
