#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cotq/error.hpp"
#include "cotq/grid.hpp"
#include "cotq/transport.hpp"
#include "cotq/types.hpp"

namespace cotq {

enum class WeightScheme { Gaussian, Epanechnikov, Uniform, Knn, CoKnn };

inline const char* to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::Gaussian: return "gaussian";
    case WeightScheme::Epanechnikov: return "epanechnikov";
    case WeightScheme::Uniform: return "uniform";
    case WeightScheme::Knn: return "knn";
    case WeightScheme::CoKnn: return "co_knn";
  }
  return "unknown";
}

inline WeightScheme parse_weight_scheme(const std::string& name) {
  if (name == "gaussian") return WeightScheme::Gaussian;
  if (name == "epanechnikov") return WeightScheme::Epanechnikov;
  if (name == "uniform") return WeightScheme::Uniform;
  if (name == "knn") return WeightScheme::Knn;
  if (name == "co_knn") return WeightScheme::CoKnn;
  fail(ErrorKind::InvalidSpec, "unknown weight scheme '" + name + "'");
}

struct WeightSpec {
  WeightScheme scheme = WeightScheme::Knn;
  double h = 0.0;  // bandwidth, kernel schemes
  int k = 0;       // neighbor count, neighbor schemes
  /// Covariate grid for co_knn; must have n + 1 points. Chosen automatically when empty.
  std::optional<GridSpec> x_grid;
  std::uint64_t direction_seed = 0;

  bool is_kernel() const {
    return scheme == WeightScheme::Gaussian || scheme == WeightScheme::Epanechnikov || scheme == WeightScheme::Uniform;
  }

  void validate(long long n) const {
    if (is_kernel()) {
      if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::InvalidSpec, "kernel bandwidth h must be > 0");
    } else {
      if (k < 1) fail(ErrorKind::InvalidSpec, "neighbor count k must be >= 1");
      if (k > n) fail(ErrorKind::InvalidSpec, "neighbor count k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
    }
  }
};

/// Probability weights over the n sample points for one query covariate.
struct WeightVector {
  std::vector<double> values;
  Vector query;
  /// Set when every kernel value vanished and the 1-NN indicator was used.
  bool fallback_to_nearest = false;
};

namespace detail {

inline void check_sample(const Vector& x, const Matrix& X) {
  if (X.rows() < 1) fail(ErrorKind::InvalidInput, "weights need at least one sample point");
  if (x.size() != X.cols()) fail(ErrorKind::InvalidInput, "query dimension does not match covariate dimension");
}

/// Indices of the k rows closest to x; ties go to the smaller index.
inline std::vector<int> nearest_rows(const Vector& x, const Matrix& X, int k) {
  std::vector<double> dist(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) dist[i] = (X.row(i).transpose() - x).squaredNorm();
  std::vector<int> order(X.rows());
  std::iota(order.begin(), order.end(), 0);
  auto closer = [&](int a, int b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
  order.resize(k);
  return order;
}

inline WeightVector indicator_weights(const Vector& x, Eigen::Index n, const std::vector<int>& members) {
  WeightVector w;
  w.query = x;
  w.values.assign(n, 0.0);
  const double share = 1.0 / static_cast<double>(members.size());
  for (int i : members) w.values[i] = share;
  return w;
}

template <class Kernel>
WeightVector kernel_weights(const Vector& x, const Matrix& X, double h, Kernel kernel) {
  check_sample(x, X);
  if (!(h > 0.0)) fail(ErrorKind::InvalidSpec, "kernel bandwidth h must be > 0");
  WeightVector w;
  w.query = x;
  w.values.resize(X.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double u2 = (X.row(i).transpose() - x).squaredNorm() / (h * h);
    w.values[i] = kernel(u2);
    total += w.values[i];
  }
  if (!(total > 0.0)) {
    w = indicator_weights(x, X.rows(), nearest_rows(x, X, 1));
    w.fallback_to_nearest = true;
    return w;
  }
  for (double& v : w.values) v /= total;
  return w;
}

}  // namespace detail

/// w_i proportional to exp(-(|X_i - x| / h)^2).
inline WeightVector gaussian_weights(const Vector& x, const Matrix& X, double h) {
  return detail::kernel_weights(x, X, h, [](double u2) { return std::exp(-u2); });
}

/// Epanechnikov (1 - |u|^2)_+ or uniform 1[|u| <= 1] kernel weights.
inline WeightVector compact_kernel_weights(const Vector& x, const Matrix& X, double h, WeightScheme kernel) {
  if (kernel == WeightScheme::Epanechnikov)
    return detail::kernel_weights(x, X, h, [](double u2) { return u2 < 1.0 ? 1.0 - u2 : 0.0; });
  if (kernel == WeightScheme::Uniform)
    return detail::kernel_weights(x, X, h, [](double u2) { return u2 <= 1.0 ? 1.0 : 0.0; });
  fail(ErrorKind::InvalidSpec, "compact kernel must be epanechnikov or uniform");
}

inline WeightVector knn_weights(const Vector& x, const Matrix& X, int k) {
  detail::check_sample(x, X);
  if (k < 1) fail(ErrorKind::InvalidSpec, "neighbor count k must be >= 1");
  if (k > X.rows()) fail(ErrorKind::InvalidSpec, "neighbor count k = " + std::to_string(k) + " exceeds n = " + std::to_string(X.rows()));
  return detail::indicator_weights(x, X.rows(), detail::nearest_rows(x, X, k));
}

/**
 * Covariate grid with n + 1 = n_r * n_s + n_0 points and n_0 < min(n_r, n_s).
 * n_s starts at ceil(sqrt(n + 1)) (2 in dimension 1) and decreases until the
 * origin count fits.
 */
inline GridSpec co_knn_grid_spec(long long n, int m, std::uint64_t seed = 0) {
  const long long total = n + 1;
  long long n_s = m == 1 ? std::min<long long>(2, total)
                         : static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(total))));
  for (; n_s >= 1; --n_s) {
    const long long n_r = total / n_s;
    const long long n_0 = total - n_r * n_s;
    if (n_r >= 1 && n_0 < std::min(n_r, n_s)) {
      GridSpec spec;
      spec.d = m;
      spec.n_r = static_cast<int>(n_r);
      spec.n_s = static_cast<int>(n_s);
      spec.n_0 = static_cast<int>(n_0);
      spec.direction_seed = seed;
      return spec;
    }
  }
  fail(ErrorKind::Internal, "no covariate grid factorization found");
}

/// Center-outward ranks of {x, X_1..X_n}: row 0 of the result is F(x), row j is F(X_j).
inline Matrix center_outward_ranks(const Vector& x, const Matrix& X, const GridSpec& x_grid) {
  const auto n = X.rows();
  if (x_grid.size() != n + 1)
    fail(ErrorKind::InvalidSpec, "covariate grid must have n + 1 = " + std::to_string(n + 1) + " points");
  const SphericalGrid grid = build_grid(x_grid, /*allow_many_origins=*/true);
  Matrix pooled(n + 1, X.cols());
  pooled.row(0) = x.transpose();
  pooled.bottomRows(n) = X;
  const std::vector<int> perm = solve_assignment(pooled, grid.points);
  Matrix ranks(n + 1, X.cols());
  for (Eigen::Index r = 0; r <= n; ++r) ranks.row(r) = grid.points.row(perm[r]);
  return ranks;
}

/**
 * Center-outward nearest-neighbor weights: the query joins the sample, the
 * pooled points are optimally assigned to a covariate grid, and the k sample
 * points whose grid images are nearest to the image of x share the mass.
 */
inline WeightVector co_knn_weights(const Vector& x, const Matrix& X, int k, const std::optional<GridSpec>& x_grid = {},
                                   std::uint64_t seed = 0) {
  detail::check_sample(x, X);
  if (k < 1) fail(ErrorKind::InvalidSpec, "neighbor count k must be >= 1");
  if (k > X.rows()) fail(ErrorKind::InvalidSpec, "neighbor count k = " + std::to_string(k) + " exceeds n = " + std::to_string(X.rows()));
  const GridSpec spec = x_grid ? *x_grid : co_knn_grid_spec(X.rows(), static_cast<int>(X.cols()), seed);
  const Matrix ranks = center_outward_ranks(x, X, spec);
  const Vector fx = ranks.row(0).transpose();
  const Matrix fX = ranks.bottomRows(X.rows());
  return detail::indicator_weights(x, X.rows(), detail::nearest_rows(fx, fX, k));
}

inline WeightVector compute_weights(const Vector& x, const Matrix& X, const WeightSpec& spec) {
  spec.validate(X.rows());
  switch (spec.scheme) {
    case WeightScheme::Gaussian: return gaussian_weights(x, X, spec.h);
    case WeightScheme::Epanechnikov:
    case WeightScheme::Uniform: return compact_kernel_weights(x, X, spec.h, spec.scheme);
    case WeightScheme::Knn: return knn_weights(x, X, spec.k);
    case WeightScheme::CoKnn: return co_knn_weights(x, X, spec.k, spec.x_grid, spec.direction_seed);
  }
  fail(ErrorKind::Internal, "unhandled weight scheme");
}

/**
 * Finite-n reading of k / log n -> infinity and k / n -> 0:
 * true iff k >= c_log * ln n and k <= c_frac * n.
 */
inline bool validate_strong_consistency(long long n, long long k, double c_log = 3.0, double c_frac = 0.25) {
  if (n < 2) fail(ErrorKind::InvalidInput, "strong-consistency check needs n >= 2");
  const auto kd = static_cast<double>(k);
  return kd >= c_log * std::log(static_cast<double>(n)) && kd <= c_frac * static_cast<double>(n);
}

}  // namespace cotq
