#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "cotq/error.hpp"
#include "cotq/rng.hpp"
#include "cotq/types.hpp"

namespace cotq {

/// Largest grid the builder accepts.
inline constexpr long long kMaxGridPoints = 20'000'000;

/**
 * Shape of the regular grid discretizing the spherical uniform on the unit
 * ball of R^d: n_r spheres of radii j/(n_r+1) crossed with n_s rays, plus
 * n_0 copies of the origin. The quantile grid uses n_0 in {0, 1}; the
 * covariate grid of the center-outward neighbor weights may need more.
 */
struct GridSpec {
  int d = 2;
  int n_r = 1;
  int n_s = 1;
  int n_0 = 0;
  std::uint64_t direction_seed = 0;

  long long size() const { return static_cast<long long>(n_r) * n_s + n_0; }

  void validate(bool allow_many_origins = false) const {
    if (d < 1) fail(ErrorKind::InvalidSpec, "grid dimension must be >= 1");
    if (n_r < 1) fail(ErrorKind::InvalidSpec, "grid radius count n_r must be >= 1");
    if (n_s < 1) fail(ErrorKind::InvalidSpec, "grid ray count n_s must be >= 1");
    if (n_0 < 0 || (!allow_many_origins && n_0 > 1))
      fail(ErrorKind::InvalidSpec, "grid origin count n_0 must be 0 or 1");
    if (d == 1 && n_s > 2) fail(ErrorKind::InvalidSpec, "in dimension 1 there are only two rays (n_s <= 2)");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct SphericalGrid {
  GridSpec spec;
  /// N x d; point i = (j-1)*n_s + s sits on sphere j along ray s, origins last.
  Matrix points;
  Matrix directions;
  /// Exact radius j/(n_r+1), 0 for origins.
  std::vector<double> radius;
  /// Sphere index j in 1..n_r, 0 for origins.
  std::vector<int> ring;
  /// Ray index in 0..n_s-1, -1 for origins.
  std::vector<int> ray;
  double mass = 1.0;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return spec.d; }
  Vector point(int i) const { return points.row(i).transpose(); }
  double ring_radius(int j) const { return static_cast<double>(j) / (spec.n_r + 1); }
};

/**
 * Unit directions for the grid rays. d = 1: (+1) then (-1); d = 2: angles
 * 2*pi*s/n_s starting at 0; d = 3: Fibonacci sphere; d > 3: seeded
 * normalized Gaussian draws.
 */
inline Matrix build_directions(int d, int n_s, std::uint64_t seed) {
  if (d < 1) fail(ErrorKind::InvalidSpec, "direction dimension must be >= 1");
  if (n_s < 1) fail(ErrorKind::InvalidSpec, "direction count must be >= 1");
  Matrix dirs(n_s, d);
  if (d == 1) {
    if (n_s > 2) fail(ErrorKind::InvalidSpec, "in dimension 1 there are only two rays (n_s <= 2)");
    dirs(0, 0) = 1.0;
    if (n_s == 2) dirs(1, 0) = -1.0;
  } else if (d == 2) {
    for (int s = 0; s < n_s; ++s) {
      const double angle = 2.0 * std::numbers::pi * s / n_s;
      dirs(s, 0) = std::cos(angle);
      dirs(s, 1) = std::sin(angle);
    }
  } else if (d == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int s = 0; s < n_s; ++s) {
      const double z = 1.0 - (2.0 * s + 1.0) / n_s;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * s;
      dirs(s, 0) = r * std::cos(phi);
      dirs(s, 1) = r * std::sin(phi);
      dirs(s, 2) = z;
    }
  } else {
    SplitMix64 rng(seed);
    for (int s = 0; s < n_s; ++s) {
      double norm2 = 0.0;
      do {
        for (int c = 0; c < d; c += 2) {
          auto [a, b] = rng.normal_pair();
          dirs(s, c) = a;
          if (c + 1 < d) dirs(s, c + 1) = b;
        }
        norm2 = dirs.row(s).squaredNorm();
      } while (norm2 < 1e-24);
      dirs.row(s) /= std::sqrt(norm2);
    }
  }
  return dirs;
}

inline SphericalGrid build_grid(const GridSpec& spec, bool allow_many_origins = false) {
  spec.validate(allow_many_origins);
  if (spec.size() > kMaxGridPoints)
    fail(ErrorKind::Resource, "grid of " + std::to_string(spec.size()) + " points exceeds the maximum of " +
                                  std::to_string(kMaxGridPoints));
  SphericalGrid grid;
  grid.spec = spec;
  grid.directions = build_directions(spec.d, spec.n_s, spec.direction_seed);
  const auto n = static_cast<Eigen::Index>(spec.size());
  grid.points = Matrix::Zero(n, spec.d);
  grid.radius.assign(n, 0.0);
  grid.ring.assign(n, 0);
  grid.ray.assign(n, -1);
  Eigen::Index i = 0;
  for (int j = 1; j <= spec.n_r; ++j) {
    const double r = static_cast<double>(j) / (spec.n_r + 1);
    for (int s = 0; s < spec.n_s; ++s, ++i) {
      grid.points.row(i) = r * grid.directions.row(s);
      grid.radius[i] = r;
      grid.ring[i] = j;
      grid.ray[i] = s;
    }
  }
  grid.mass = 1.0 / static_cast<double>(n);
  return grid;
}

/**
 * Picks (n_r, n_s, n_0) with n_0 in {0, 1} for a requested grid size:
 * n_r starts near sqrt(N / 2.5) and walks down until N mod n_r is 0 or 1.
 * Dimension 1 always uses the two rays.
 */
inline GridSpec auto_grid_spec(long long total, int d, std::uint64_t seed = 0) {
  if (total < 1) fail(ErrorKind::InvalidSpec, "grid size must be >= 1");
  if (d < 1) fail(ErrorKind::InvalidSpec, "grid dimension must be >= 1");
  GridSpec spec;
  spec.d = d;
  spec.direction_seed = seed;
  if (total == 1) return spec;
  if (d == 1) {
    spec.n_s = 2;
    spec.n_r = static_cast<int>(total / 2);
    spec.n_0 = static_cast<int>(total % 2);
    return spec;
  }
  auto n_r = std::max<long long>(1, std::llround(std::sqrt(static_cast<double>(total) / 2.5)));
  while (n_r > 1 && total % n_r > 1) --n_r;
  spec.n_r = static_cast<int>(n_r);
  spec.n_s = static_cast<int>(total / n_r);
  spec.n_0 = static_cast<int>(total % n_r);
  return spec;
}

}  // namespace cotq
