#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "cotq/error.hpp"
#include "cotq/regression.hpp"
#include "cotq/rng.hpp"
#include "cotq/simdata.hpp"
#include "cotq/types.hpp"

namespace cotq {

/// Hausdorff distance between two finite point sets (rows).
inline double hausdorff(const Matrix& A, const Matrix& B) {
  if (A.rows() == 0 || B.rows() == 0) fail(ErrorKind::InvalidInput, "hausdorff distance needs two non-empty sets");
  if (A.cols() != B.cols()) fail(ErrorKind::InvalidInput, "hausdorff distance needs sets of equal dimension");
  auto directed = [](const Matrix& P, const Matrix& Q) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < Q.rows(); ++j) best = std::min(best, (P.row(i) - Q.row(j)).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(A, B), directed(B, A));
}

/**
 * Population contour of order tau at covariate x, discretized at `count`
 * equiangular points. Only the spherical model has one in closed form: the
 * circle with center (x, x^2) and radius s(x) sqrt(-2 ln(1 - tau)).
 */
inline Matrix analytic_contour(Model model, double x, double tau, int count = 720) {
  if (model != Model::Spherical)
    fail(ErrorKind::Unsupported, std::string("no analytic contour for the ") + to_string(model) + " model");
  check_order(tau);
  const double radius = heteroskedasticity(x) * std::sqrt(-2.0 * std::log(1.0 - tau));
  Matrix c(count, 2);
  for (int s = 0; s < count; ++s) {
    const double a = 2.0 * std::numbers::pi * s / count;
    c(s, 0) = x + radius * std::cos(a);
    c(s, 1) = x * x + radius * std::sin(a);
  }
  return c;
}

struct CoverageEntry {
  double x = 0.0;
  double tau = 0.0;
  double coverage = 0.0;
  long long mc = 0;
  double abs_error = 0.0;
};

struct CoverageReport {
  std::vector<CoverageEntry> entries;
  std::vector<ConditionalQuantileMap> maps;
};

struct CoverageConfig {
  Model model = Model::Spherical;
  long long n = 10000;
  RegressionConfig regression;  // weights, grid, taus, queries (scalar)
  long long mc = 10000;
  std::uint64_t seed = 1;
};

/**
 * Fits every query from one training sample, then draws `mc` fresh responses
 * from the exact conditional law at each query and reports the fraction
 * falling in each region. Training data use stream 0 of the seed, the draws
 * for query q stream q + 1.
 */
inline CoverageReport coverage_suite(const CoverageConfig& cfg) {
  if (cfg.mc < 1000) fail(ErrorKind::InvalidSpec, "coverage needs mc >= 1000 Monte Carlo draws");
  const SimSample train = generate(cfg.model, cfg.n, derive_seed(cfg.seed, 0));
  CoverageReport report;
  report.maps = fit_queries(train.X, train.Y, cfg.regression).maps;
  const auto& taus = cfg.regression.taus;
  const int q = static_cast<int>(report.maps.size());
  std::vector<std::vector<CoverageEntry>> rows(q);
  detail::parallel_for(q, cfg.regression.threads, [&](int i) {
    const double x = cfg.regression.queries[i](0);
    const Matrix draws = sample_conditional(cfg.model, x, cfg.mc, derive_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1));
    std::vector<long long> inside(taus.size(), 0);
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      const double rk = rank(report.maps[i], draws.row(r).transpose());
      for (std::size_t t = 0; t < taus.size(); ++t)
        if (rk <= taus[t] + 1e-12) ++inside[t];
    }
    for (std::size_t t = 0; t < taus.size(); ++t) {
      CoverageEntry e;
      e.x = x;
      e.tau = taus[t];
      e.mc = cfg.mc;
      e.coverage = static_cast<double>(inside[t]) / static_cast<double>(cfg.mc);
      e.abs_error = std::abs(e.coverage - e.tau);
      rows[i].push_back(e);
    }
  });
  for (auto& r : rows) report.entries.insert(report.entries.end(), r.begin(), r.end());
  return report;
}

/// One sample size of a consistency study with its neighbor count and grid.
struct ConsistencyLevel {
  long long n = 0;
  int k = 0;
  GridSpec grid;
};

struct HausdorffEntry {
  long long n = 0;
  int replicate = 0;
  double x = 0.0;
  double tau = 0.0;
  double error = 0.0;
};

struct HausdorffReport {
  std::vector<HausdorffEntry> entries;
  /// Median error over replicates and taus, one per level.
  std::vector<double> median_error;
  bool decreasing = false;
  /// Fitted maps, level-major then replicate.
  std::vector<ConditionalQuantileMap> maps;
};

inline double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::InvalidInput, "median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/**
 * Hausdorff error between estimated and population contours at covariate x
 * for each level and replicate (k-NN weights). Replicate r of level l uses
 * training stream l * replicates + r of the seed.
 */
inline HausdorffReport consistency_curve(Model model, const std::vector<ConsistencyLevel>& levels, double x,
                                         const std::vector<double>& taus, int replicates, std::uint64_t seed,
                                         int threads = 1) {
  if (model != Model::Spherical)
    fail(ErrorKind::Unsupported, std::string("no analytic contour for the ") + to_string(model) + " model");
  if (levels.empty() || replicates < 1) fail(ErrorKind::InvalidSpec, "consistency study needs levels and replicates");
  HausdorffReport report;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<std::vector<HausdorffEntry>> rows(replicates);
    std::vector<std::optional<ConditionalQuantileMap>> maps(replicates);
    detail::parallel_for(replicates, threads, [&](int r) {
      const SimSample s = generate(model, levels[l].n, derive_seed(seed, l * replicates + r));
      RegressionConfig cfg;
      cfg.weights.scheme = WeightScheme::Knn;
      cfg.weights.k = levels[l].k;
      cfg.grid = levels[l].grid;
      cfg.queries = {Vector::Constant(1, x)};
      maps[r] = fit_at(cfg.queries[0], s.X, s.Y, cfg);
      for (double tau : taus) {
        const ContourSet c = contour(*maps[r], tau);
        rows[r].push_back({levels[l].n, r, x, tau, hausdorff(c.vertices, analytic_contour(model, x, tau))});
      }
    });
    for (auto& m : maps) report.maps.push_back(std::move(*m));
    std::vector<double> errors;
    for (auto& row : rows)
      for (auto& e : row) errors.push_back(e.error), report.entries.push_back(e);
    report.median_error.push_back(median(errors));
  }
  report.decreasing = true;
  for (std::size_t l = 1; l < report.median_error.size(); ++l)
    if (!(report.median_error[l] < report.median_error[l - 1])) report.decreasing = false;
  return report;
}

namespace detail {

inline double cross2(const Vector& o, const Vector& a, const Vector& b) {
  return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

/// Convex hull (counter-clockwise, no repeated endpoint) by the monotone chain.
inline std::vector<Vector> convex_hull(std::vector<Vector> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vector& a, const Vector& b) { return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1)); });
  if (pts.size() < 3) return pts;
  std::vector<Vector> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace detail

/**
 * Largest depth of a planar vertex inside the convex hull of the other
 * vertices (distance to the hull boundary); non-positive when every vertex is
 * extreme, i.e. the vertex set is in convex position. Copies of the vertex
 * (such as the closing vertex of a polyline) are excluded from the others.
 */
inline double nonconvexity_margin(const Matrix& vertices) {
  if (vertices.cols() != 2) fail(ErrorKind::InvalidInput, "nonconvexity margin is defined for planar point sets");
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    std::vector<Vector> others;
    for (Eigen::Index j = 0; j < vertices.rows(); ++j)
      if (vertices.row(j) != vertices.row(i)) others.push_back(vertices.row(j).transpose());
    const std::vector<Vector> hull = detail::convex_hull(others);
    if (hull.size() < 3) continue;
    const Vector p = vertices.row(i).transpose();
    double depth = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < hull.size(); ++e) {
      const Vector& a = hull[e];
      const Vector& b = hull[(e + 1) % hull.size()];
      // Signed distance to the edge line, positive on the inner side.
      depth = std::min(depth, detail::cross2(a, b, p) / (b - a).norm());
    }
    best = std::max(best, depth);
  }
  return best;
}

}  // namespace cotq
