#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "cotq/error.hpp"
#include "cotq/rng.hpp"
#include "cotq/types.hpp"

namespace cotq {

/**
 * Simulation models with a scalar covariate and bivariate response.
 *
 *   spherical  Y = (X, X^2) + s(X) e,                          X ~ U[-2, 2]
 *   banana     Y = (X, X^2) + s(X) (1.15 e1, e2/1.15 + 0.5 (e1^2 + 1.21))
 *   eyelid     Y1 = sin(2 pi X / 3) + 0.575 e1,                X ~ U[-1, 1]
 *              Y2 = cos(2 pi X / 3) + X^2 + e2^3 / 2.3 + e1 / 4 + 2.65 X^4,
 *              e = sqrt(s(X)) v
 *
 * with s(x) = 1 + 1.5 sin^2(pi x / 2) and e, v standard bivariate normal.
 * Draw i consumes one uniform for X and then one Box-Muller pair, all from a
 * single SplitMix64 stream seeded with `seed`.
 */
enum class Model { Spherical, Banana, Eyelid };

inline const char* to_string(Model m) {
  switch (m) {
    case Model::Spherical: return "spherical";
    case Model::Banana: return "banana";
    case Model::Eyelid: return "eyelid";
  }
  return "unknown";
}

inline Model parse_model(const std::string& name) {
  if (name == "spherical") return Model::Spherical;
  if (name == "banana") return Model::Banana;
  if (name == "eyelid") return Model::Eyelid;
  fail(ErrorKind::InvalidSpec, "unknown model '" + name + "' (expected spherical, banana or eyelid)");
}

struct SimSample {
  Matrix X;  // n x 1
  Matrix Y;  // n x 2
};

inline double heteroskedasticity(double x) {
  const double s = std::sin(std::numbers::pi * x / 2.0);
  return 1.0 + 1.5 * s * s;
}

inline std::pair<double, double> covariate_range(Model m) {
  return m == Model::Eyelid ? std::pair{-1.0, 1.0} : std::pair{-2.0, 2.0};
}

/// One response at covariate x from standard normal noise (e1, e2).
inline std::pair<double, double> respond(Model m, double x, double e1, double e2) {
  const double s = heteroskedasticity(x);
  switch (m) {
    case Model::Spherical: return {x + s * e1, x * x + s * e2};
    case Model::Banana: return {x + s * 1.15 * e1, x * x + s * (e2 / 1.15 + 0.5 * (e1 * e1 + 1.21))};
    case Model::Eyelid: {
      const double a = std::sqrt(s) * e1, b = std::sqrt(s) * e2;
      const double t = 2.0 * std::numbers::pi * x / 3.0;
      return {std::sin(t) + 0.575 * a, std::cos(t) + x * x + b * b * b / 2.3 + a / 4.0 + 2.65 * x * x * x * x};
    }
  }
  fail(ErrorKind::Internal, "unhandled model");
}

inline SimSample generate(Model m, long long n, std::uint64_t seed) {
  if (n < 1) fail(ErrorKind::InvalidSpec, "sample size n must be >= 1");
  const auto [lo, hi] = covariate_range(m);
  SplitMix64 rng(seed);
  SimSample s{Matrix(n, 1), Matrix(n, 2)};
  for (long long i = 0; i < n; ++i) {
    const double x = rng.uniform(lo, hi);
    const auto [e1, e2] = rng.normal_pair();
    const auto [y1, y2] = respond(m, x, e1, e2);
    s.X(i, 0) = x;
    s.Y(i, 0) = y1;
    s.Y(i, 1) = y2;
  }
  return s;
}

inline SimSample gen_spherical(long long n, std::uint64_t seed) { return generate(Model::Spherical, n, seed); }
inline SimSample gen_banana(long long n, std::uint64_t seed) { return generate(Model::Banana, n, seed); }
inline SimSample gen_eyelid(long long n, std::uint64_t seed) { return generate(Model::Eyelid, n, seed); }

/// `count` independent draws of Y given X = x.
inline Matrix sample_conditional(Model m, double x, long long count, std::uint64_t seed) {
  if (count < 0) fail(ErrorKind::InvalidSpec, "draw count must be >= 0");
  SplitMix64 rng(seed);
  Matrix Y(count, 2);
  for (long long i = 0; i < count; ++i) {
    const auto [e1, e2] = rng.normal_pair();
    const auto [y1, y2] = respond(m, x, e1, e2);
    Y(i, 0) = y1;
    Y(i, 1) = y2;
  }
  return Y;
}

}  // namespace cotq
