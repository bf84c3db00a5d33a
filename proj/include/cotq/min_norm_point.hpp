#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cotq/error.hpp"
#include "cotq/types.hpp"

namespace cotq {

/**
 * Minimum-Euclidean-norm point of conv(points) by Wolfe's algorithm.
 *
 * Major cycles add the point most opposed to the current iterate; minor
 * cycles take the affine minimizer over the corral and step back toward the
 * convex hull when it leaves the simplex. Stops when
 * |x|^2 - min_k <x, p_k> <= tol * max_k |p_k|^2.
 */
inline Vector min_norm_point(const Matrix& points, double tol = 1e-10) {
  const auto n = points.rows();
  if (n == 0) fail(ErrorKind::InvalidInput, "min_norm_point needs at least one point");
  if (n == 1) return points.row(0).transpose();
  const auto d = points.cols();

  double scale = 0.0;
  Eigen::Index start = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = points.row(i).squaredNorm();
    if (s > scale) scale = s;
    if (s < points.row(start).squaredNorm()) start = i;
  }
  if (scale == 0.0) return Vector::Zero(d);

  std::vector<Eigen::Index> corral{start};
  std::vector<double> weight{1.0};
  Vector x = points.row(start).transpose();
  const double zero_weight = 1e-14;

  auto affine_minimizer = [&](Vector& mu) {
    // min |sum mu_k s_k|^2 with sum mu_k = 1, via s_0 + sum_{k>0} nu_k (s_k - s_0).
    const auto m = static_cast<Eigen::Index>(corral.size());
    mu.resize(m);
    if (m == 1) {
      mu(0) = 1.0;
      return;
    }
    Eigen::MatrixXd diff(d, m - 1);
    const Vector base = points.row(corral[0]).transpose();
    for (Eigen::Index k = 1; k < m; ++k) diff.col(k - 1) = points.row(corral[k]).transpose() - base;
    const Eigen::VectorXd nu = diff.completeOrthogonalDecomposition().solve(-base);
    mu(0) = 1.0 - nu.sum();
    mu.tail(m - 1) = nu;
  };

  const int max_major = 50 * static_cast<int>(n) + 100;
  for (int major = 0; major < max_major; ++major) {
    const Vector scores = points * x;
    Eigen::Index best = 0;
    scores.minCoeff(&best);
    if (x.squaredNorm() - scores(best) <= tol * scale) break;
    if (std::find(corral.begin(), corral.end(), best) != corral.end()) break;
    corral.push_back(best);
    weight.push_back(0.0);

    while (true) {
      Vector mu;
      affine_minimizer(mu);
      if (mu.minCoeff() > zero_weight) {
        weight.assign(mu.data(), mu.data() + mu.size());
        break;
      }
      double theta = 1.0;
      for (std::size_t k = 0; k < corral.size(); ++k) {
        if (mu(k) <= zero_weight) {
          const double denom = weight[k] - mu(k);
          if (denom > 0) theta = std::min(theta, weight[k] / denom);
        }
      }
      std::vector<Eigen::Index> next_corral;
      std::vector<double> next_weight;
      for (std::size_t k = 0; k < corral.size(); ++k) {
        const double w = weight[k] + theta * (mu(k) - weight[k]);
        if (w > zero_weight) {
          next_corral.push_back(corral[k]);
          next_weight.push_back(w);
        }
      }
      if (next_corral.empty()) {
        next_corral.push_back(corral.back());
        next_weight.push_back(1.0);
      }
      double total = 0.0;
      for (double w : next_weight) total += w;
      for (double& w : next_weight) w /= total;
      corral = std::move(next_corral);
      weight = std::move(next_weight);
    }
    x.setZero();
    for (std::size_t k = 0; k < corral.size(); ++k) x += weight[k] * points.row(corral[k]).transpose();
  }
  return x;
}

}  // namespace cotq
