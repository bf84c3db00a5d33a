#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cotq/error.hpp"
#include "cotq/grid.hpp"
#include "cotq/quantile_map.hpp"
#include "cotq/transport.hpp"
#include "cotq/types.hpp"
#include "cotq/weights.hpp"

namespace cotq {

struct RegressionConfig {
  WeightSpec weights;
  /// Response grid; when empty N = k for neighbor weights, otherwise N = min(n, 1000).
  std::optional<GridSpec> grid;
  std::vector<double> taus;
  std::vector<Vector> queries;
  double smoothing = 0.0;
  /// Worker threads for the per-query fits; 0 means hardware concurrency.
  int threads = 1;
  SolverOptions solver;
  std::uint64_t direction_seed = 0;

  void validate(long long n, int m) const {
    weights.validate(n);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      check_order(taus[t]);
      if (t > 0 && !(taus[t] > taus[t - 1])) fail(ErrorKind::InvalidSpec, "taus must be strictly increasing");
    }
    if (queries.empty()) fail(ErrorKind::InvalidSpec, "at least one query covariate is required");
    for (const Vector& x : queries)
      if (x.size() != m) fail(ErrorKind::InvalidInput, "query dimension does not match covariate dimension");
    if (smoothing < 0.0) fail(ErrorKind::InvalidSpec, "smoothing must be >= 0");
    if (threads < 0) fail(ErrorKind::InvalidSpec, "threads must be >= 0");
  }
};

/// Quantile contours of one order across the query list.
struct Tube {
  double tau = 0.0;
  std::vector<ContourSet> slices;
};

struct RegressionResult {
  std::vector<ConditionalQuantileMap> maps;
  std::vector<std::string> warnings;
};

inline GridSpec response_grid(const RegressionConfig& config, long long n, int d) {
  if (config.grid) return *config.grid;
  const long long total = config.weights.is_kernel() ? std::min<long long>(n, 1000) : config.weights.k;
  return auto_grid_spec(total, d, config.direction_seed);
}

namespace detail {

/// Lexicographic order on the rows of [X Y]; makes fits invariant to row order.
inline std::vector<int> canonical_order(const Matrix& X, const Matrix& Y, const std::vector<int>& rows) {
  std::vector<int> order = rows;
  auto less = [&](int a, int b) {
    for (Eigen::Index c = 0; c < X.cols(); ++c)
      if (X(a, c) != X(b, c)) return X(a, c) < X(b, c);
    for (Eigen::Index c = 0; c < Y.cols(); ++c)
      if (Y(a, c) != Y(b, c)) return Y(a, c) < Y(b, c);
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  return order;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers; rethrows the
/// failure of the smallest index.
template <class Body>
void parallel_for(int count, int threads, Body body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/**
 * Conditional quantile map at covariate x: weights, then the weighted
 * transport problem between the response grid and the responses carrying
 * positive weight, then targets and potentials.
 */
inline ConditionalQuantileMap fit_at(const Vector& x, const Matrix& X, const Matrix& Y, const RegressionConfig& config) {
  if (X.rows() < 1) fail(ErrorKind::InvalidInput, "dataset is empty");
  if (X.rows() != Y.rows()) fail(ErrorKind::InvalidInput, "X and Y have different row counts");
  const WeightVector w = compute_weights(x, X, config.weights);

  std::vector<int> support;
  for (Eigen::Index j = 0; j < X.rows(); ++j)
    if (w.values[j] > 0.0) support.push_back(static_cast<int>(j));
  const std::vector<int> order = detail::canonical_order(X, Y, support);
  const auto k = static_cast<Eigen::Index>(order.size());
  Matrix Yk(k, Y.cols());
  std::vector<double> mass(k);
  double total = 0.0;
  for (Eigen::Index r = 0; r < k; ++r) {
    Yk.row(r) = Y.row(order[r]);
    mass[r] = w.values[order[r]];
    total += mass[r];
  }
  for (double& v : mass) v /= total;

  SphericalGrid grid = build_grid(response_grid(config, X.rows(), static_cast<int>(Y.cols())));
  const TransportPlan plan = solve_exact({grid.points, Yk, {}, mass}, config.solver);
  return quantile_map_from_plan(std::move(grid), plan, Yk, x, config.smoothing);
}

/// Fits every query (in parallel when configured); results follow the query order.
inline RegressionResult fit_queries(const Matrix& X, const Matrix& Y, const RegressionConfig& config) {
  config.validate(X.rows(), static_cast<int>(X.cols()));
  const int q = static_cast<int>(config.queries.size());
  std::vector<std::optional<ConditionalQuantileMap>> slots(q);
  detail::parallel_for(q, config.threads, [&](int i) { slots[i] = fit_at(config.queries[i], X, Y, config); });
  RegressionResult result;
  for (int i = 0; i < q; ++i) {
    result.maps.push_back(std::move(*slots[i]));
    const auto& m = result.maps.back();
    if (m.degenerate())
      result.warnings.push_back("query " + std::to_string(i) + ": only " + std::to_string(m.effective_support) +
                                " weighted points (< d + 1); contours are flat");
  }
  return result;
}

inline Tube tube(const std::vector<ConditionalQuantileMap>& maps, double tau) {
  Tube t;
  t.tau = tau;
  for (const auto& m : maps) t.slices.push_back(contour(m, tau));
  return t;
}

inline Tube tube(const Matrix& X, const Matrix& Y, const RegressionConfig& config, double tau) {
  if (std::find(config.taus.begin(), config.taus.end(), tau) == config.taus.end())
    fail(ErrorKind::InvalidSpec, "tube order must be one of the configured taus");
  return tube(fit_queries(X, Y, config).maps, tau);
}

inline std::vector<std::pair<Vector, Vector>> median_curve(const std::vector<ConditionalQuantileMap>& maps) {
  std::vector<std::pair<Vector, Vector>> curve;
  for (const auto& m : maps) curve.emplace_back(m.query_x, median_region(m).point);
  return curve;
}

inline std::vector<std::pair<Vector, Vector>> median_curve(const Matrix& X, const Matrix& Y, const RegressionConfig& config) {
  return median_curve(fit_queries(X, Y, config).maps);
}

/// Evenly spaced scalar queries over [lo, hi].
inline std::vector<Vector> linspace_queries(double lo, double hi, int count) {
  if (count < 1) fail(ErrorKind::InvalidSpec, "query count must be >= 1");
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    out.push_back(Vector::Constant(1, lo + t * (hi - lo)));
  }
  return out;
}

/**
 * Nesting violations over all pairs of grid radii r1 < r2: vertices of
 * contour(r1) that fail region_contains(., r2).
 */
inline long long count_crossings(const ConditionalQuantileMap& map) {
  const int n_r = map.grid.spec.n_r;
  long long bad = 0;
  for (int j1 = 1; j1 < n_r; ++j1) {
    const ContourSet inner = contour(map, map.grid.ring_radius(j1));
    for (Eigen::Index v = 0; v < inner.vertices.rows(); ++v) {
      // rank is the smallest enclosing radius, so checking it once covers every r2 > r1.
      const double r = rank(map, inner.vertices.row(v).transpose());
      for (int j2 = j1 + 1; j2 <= n_r; ++j2)
        if (!(r <= map.grid.ring_radius(j2) + 1e-12)) ++bad;
    }
  }
  return bad;
}

/// Same count for the listed orders: vertices of contour(t1) outside the region of t2 > t1.
inline long long count_crossings(const ConditionalQuantileMap& map, const std::vector<double>& taus) {
  long long bad = 0;
  for (std::size_t a = 0; a < taus.size(); ++a) {
    const ContourSet inner = contour(map, taus[a]);
    for (Eigen::Index v = 0; v < inner.vertices.rows(); ++v)
      for (std::size_t b = 0; b < taus.size(); ++b)
        if (taus[b] > taus[a] && !region_contains(map, inner.vertices.row(v).transpose(), taus[b])) ++bad;
  }
  return bad;
}

}  // namespace cotq
