#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cotq/regression.hpp"
#include "cotq/simdata.hpp"
#include "cotq/validate.hpp"

namespace cotq {
namespace {

const std::vector<double> kTubeQueries = {-2, -1.6, -1.1, -0.7, -0.2, 0.2, 0.7, 1.1, 1.6, 2};

std::vector<Vector> scalars(const std::vector<double>& xs) {
  std::vector<Vector> out;
  for (double x : xs) out.push_back(Vector::Constant(1, x));
  return out;
}

RegressionConfig knn_config(int k, std::vector<double> xs) {
  RegressionConfig cfg;
  cfg.weights.scheme = WeightScheme::Knn;
  cfg.weights.k = k;
  cfg.taus = {0.2, 0.4, 0.8};
  cfg.queries = scalars(xs);
  return cfg;
}

/// Spherical model, n = 10^4, k = N = 1000 at ten queries across the covariate range.
const RegressionResult& spherical_fit() {
  static const RegressionResult r = [] {
    const SimSample s = gen_spherical(10000, 41);
    return fit_queries(s.X, s.Y, knn_config(1000, kTubeQueries));
  }();
  return r;
}

TEST(FitAt, SingleObservation) {
  Matrix X(1, 1), Y(1, 2);
  X << 0.3;
  Y << 2.0, -1.0;
  RegressionConfig cfg = knn_config(1, {0.0});
  cfg.grid = GridSpec{2, 2, 4, 0, 0};
  const auto map = fit_at(cfg.queries[0], X, Y, cfg);
  for (int i = 0; i < map.size(); ++i) EXPECT_EQ(map.targets.row(i), Y.row(0));
  EXPECT_TRUE(map.degenerate());
  const ContourSet c = contour(map, 0.5);
  for (Eigen::Index v = 0; v < c.vertices.rows(); ++v) EXPECT_EQ(c.vertices.row(v), Y.row(0));
}

TEST(FitAt, DefaultGridMatchesNeighborCount) {
  const SimSample s = gen_spherical(500, 2);
  const auto map = fit_at(Vector::Zero(1), s.X, s.Y, knn_config(100, {0.0}));
  EXPECT_EQ(map.size(), 100);
  EXPECT_EQ(map.effective_support, 100);
}

TEST(FitAt, SphericalContourNearAnalyticCircle) {
  const auto& maps = spherical_fit().maps;
  const ContourSet c = contour(maps[4], 0.4);  // x = -0.2
  const ContourSet d = contour(maps[5], 0.4);  // x = 0.2
  EXPECT_LT(hausdorff(c.vertices, analytic_contour(Model::Spherical, -0.2, 0.4)), 0.25);
  EXPECT_LT(hausdorff(d.vertices, analytic_contour(Model::Spherical, 0.2, 0.4)), 0.25);
  const SimSample s = gen_spherical(10000, 43);
  const auto at_zero = fit_at(Vector::Zero(1), s.X, s.Y, knn_config(1000, {0.0}));
  EXPECT_LT(hausdorff(contour(at_zero, 0.4).vertices, analytic_contour(Model::Spherical, 0.0, 0.4)), 0.25);
}

TEST(FitAt, KernelWeightsIgnoreRowOrder) {
  const SimSample s = gen_banana(300, 5);
  std::vector<int> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  SplitMix64 rng(6);
  for (int i = 299; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  Matrix Xp(300, 1), Yp(300, 2);
  for (int i = 0; i < 300; ++i) Xp.row(i) = s.X.row(perm[i]), Yp.row(i) = s.Y.row(perm[i]);
  RegressionConfig cfg;
  cfg.weights.scheme = WeightScheme::Gaussian;
  cfg.weights.h = 0.4;
  cfg.grid = GridSpec{2, 5, 20, 0, 0};
  cfg.queries = scalars({0.3});
  const auto a = fit_at(cfg.queries[0], s.X, s.Y, cfg);
  const auto b = fit_at(cfg.queries[0], Xp, Yp, cfg);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_EQ(a.potentials, b.potentials);
}

TEST(FitQueries, ValidatesConfiguration) {
  const SimSample s = gen_spherical(100, 1);
  RegressionConfig cfg = knn_config(10, {0.0});
  cfg.taus = {0.4, 0.2};
  EXPECT_THROW(fit_queries(s.X, s.Y, cfg), Error);
  cfg.taus = {0.2, 1.5};
  try {
    fit_queries(s.X, s.Y, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidOrder);
  }
  cfg = knn_config(10, {});
  EXPECT_THROW(fit_queries(s.X, s.Y, cfg), Error);
}

TEST(FitQueries, DegenerateSupportWarns) {
  const SimSample s = gen_spherical(50, 1);
  RegressionConfig cfg = knn_config(2, {0.0, 1.0});
  const RegressionResult r = fit_queries(s.X, s.Y, cfg);
  EXPECT_EQ(r.maps.size(), 2u);
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(FitQueries, ParallelMatchesSequential) {
  const SimSample s = gen_eyelid(2000, 3);
  RegressionConfig cfg = knn_config(200, {-0.8, -0.3, 0.0, 0.4, 0.9});
  const RegressionResult seq = fit_queries(s.X, s.Y, cfg);
  cfg.threads = 4;
  const RegressionResult par = fit_queries(s.X, s.Y, cfg);
  for (std::size_t q = 0; q < seq.maps.size(); ++q) {
    EXPECT_EQ(seq.maps[q].targets, par.maps[q].targets);
    EXPECT_EQ(seq.maps[q].potentials, par.maps[q].potentials);
  }
}

TEST(FitQueries, QueriesAreIndependent) {
  const SimSample s = gen_spherical(1500, 4);
  const RegressionResult both = fit_queries(s.X, s.Y, knn_config(150, {-1.0, 0.5}));
  const RegressionResult one = fit_queries(s.X, s.Y, knn_config(150, {0.5}));
  EXPECT_EQ(both.maps[1].targets, one.maps[0].targets);
  EXPECT_EQ(both.maps[1].potentials, one.maps[0].potentials);
}

TEST(Tube, SingleQuery) {
  const SimSample s = gen_spherical(400, 8);
  const RegressionConfig cfg = knn_config(100, {0.5});
  const Tube t = tube(s.X, s.Y, cfg, 0.4);
  ASSERT_EQ(t.slices.size(), 1u);
  const ContourSet direct = contour(fit_at(cfg.queries[0], s.X, s.Y, cfg), 0.4);
  EXPECT_EQ(t.slices[0].vertices, direct.vertices);
  EXPECT_THROW(tube(s.X, s.Y, cfg, 0.5), Error);
}

TEST(Tube, CentersTrackTheTrendInTheInterior) {
  // Away from the ends of the covariate range a neighborhood of 1000 points
  // spans about +-0.2 around x; at x = +-2 it is one-sided (see README).
  const Tube t = tube(spherical_fit().maps, 0.4);
  for (std::size_t q = 1; q + 1 < kTubeQueries.size(); ++q) {
    const double x = kTubeQueries[q];
    const Matrix& v = t.slices[q].vertices;
    const Eigen::RowVectorXd center = v.topRows(v.rows() - 1).colwise().mean();
    EXPECT_NEAR(center(0), x, 0.3) << "x=" << x;
    EXPECT_NEAR(center(1), x * x, 0.3) << "x=" << x;
  }
}

TEST(Tube, SlicesNest) {
  for (const auto& m : spherical_fit().maps) {
    EXPECT_EQ(count_crossings(m), 0);
    EXPECT_EQ(count_crossings(m, {0.2, 0.4, 0.8}), 0);
  }
  const Tube inner = tube(spherical_fit().maps, 0.2), outer = tube(spherical_fit().maps, 0.8);
  for (std::size_t q = 0; q < inner.slices.size(); ++q)
    for (Eigen::Index v = 0; v < inner.slices[q].vertices.rows(); ++v)
      EXPECT_TRUE(region_contains(spherical_fit().maps[q], inner.slices[q].vertices.row(v).transpose(), 0.8));
  EXPECT_EQ(outer.slices.size(), inner.slices.size());
}

TEST(MedianCurve, ConstantResponses) {
  Matrix X(30, 1), Y(30, 2);
  for (int i = 0; i < 30; ++i) X(i, 0) = i * 0.1, Y(i, 0) = 1.5, Y(i, 1) = -0.5;
  const auto curve = median_curve(X, Y, knn_config(10, {0.0, 1.0, 2.5}));
  ASSERT_EQ(curve.size(), 3u);
  for (const auto& [x, med] : curve) {
    EXPECT_EQ(med(0), 1.5);
    EXPECT_EQ(med(1), -0.5);
  }
}

TEST(MedianCurve, SingleQuery) {
  const SimSample s = gen_spherical(200, 9);
  const auto curve = median_curve(s.X, s.Y, knn_config(50, {0.1}));
  ASSERT_EQ(curve.size(), 1u);
  EXPECT_EQ(curve[0].first(0), 0.1);
}

TEST(MedianCurve, FollowsTheTrendInTheInterior) {
  const auto curve = median_curve(spherical_fit().maps);
  for (std::size_t q = 1; q + 1 < curve.size(); ++q) {
    const double x = curve[q].first(0);
    EXPECT_LT((curve[q].second - Eigen::Vector2d(x, x * x)).norm(), 0.2) << "x=" << x;
  }
}

TEST(LinspaceQueries, Endpoints) {
  const auto q = linspace_queries(-2, 2, 5);
  ASSERT_EQ(q.size(), 5u);
  EXPECT_EQ(q[0](0), -2.0);
  EXPECT_EQ(q[2](0), 0.0);
  EXPECT_EQ(q[4](0), 2.0);
  EXPECT_EQ(linspace_queries(1, 3, 1)[0](0), 2.0);
}

}  // namespace
}  // namespace cotq
