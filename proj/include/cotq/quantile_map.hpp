#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cotq/error.hpp"
#include "cotq/grid.hpp"
#include "cotq/min_norm_point.hpp"
#include "cotq/transport.hpp"
#include "cotq/types.hpp"

namespace cotq {

/// Relative gap under which two affine pieces count as tied.
inline constexpr double kActiveGap = 1e-10;

/**
 * Empirical conditional center-outward quantile map at one covariate value.
 *
 * The map interpolates the grid pairs (G_i, T_i) through the convex
 * piecewise-affine potential psi(u) = max_i <u, T_i> - c_i, where piece i is
 * active at G_i. offsets[i] = psi(G_i) = <G_i, T_i> - c_i gives the conjugate
 * pieces y -> <G_i, y> - psi(G_i) used for ranks.
 */
struct ConditionalQuantileMap {
  SphericalGrid grid;
  Matrix targets;
  std::vector<double> potentials;
  std::vector<double> offsets;
  Vector query_x;
  /// Moreau smoothing parameter; 0 selects the min-norm subgradient.
  double smoothing = 0.0;
  /// Number of data points carrying positive weight.
  int effective_support = 0;

  int dim() const { return grid.dim(); }
  int size() const { return grid.size(); }
  /// Fewer than d + 1 weighted points: every region is flat.
  bool degenerate() const { return effective_support < dim() + 1; }
};

struct ContourSet {
  double tau = 0.0;
  /// Ordered by ray; in the plane the first vertex is repeated at the end.
  Matrix vertices;
  std::vector<int> rays;
  bool closed = false;
  Vector query_x;
};

struct MedianRegion {
  Vector point;
  /// Image of the innermost sphere (and of the origin when the grid has one).
  Matrix ring;
};

/**
 * For each grid point, the min-norm point of the hull of the data points
 * receiving the largest share of its mass (ties within mass_tol).
 */
inline Matrix extract_targets(const TransportPlan& plan, const Matrix& Y, double mass_tol = 1e-9) {
  const int n_grid = plan.num_sources;
  std::vector<double> best(n_grid, -1.0);
  for (const auto& e : plan.entries) best[e.source] = std::max(best[e.source], e.mass);
  std::vector<std::vector<int>> winners(n_grid);
  for (const auto& e : plan.entries)
    if (e.mass >= best[e.source] - mass_tol) winners[e.source].push_back(e.target);

  Matrix targets(n_grid, Y.cols());
  for (int i = 0; i < n_grid; ++i) {
    if (winners[i].empty()) fail(ErrorKind::Internal, "grid point " + std::to_string(i) + " carries no mass in the plan");
    if (winners[i].size() == 1) {
      targets.row(i) = Y.row(winners[i][0]);
      continue;
    }
    Matrix hull(static_cast<Eigen::Index>(winners[i].size()), Y.cols());
    for (std::size_t r = 0; r < winners[i].size(); ++r) hull.row(r) = Y.row(winners[i][r]);
    targets.row(i) = min_norm_point(hull).transpose();
  }
  return targets;
}

/// Largest violation of psi(G_i) >= psi(G_k) + <T_k, G_i - G_k> over all pairs.
inline double max_activity_violation(const SphericalGrid& grid, const Matrix& targets, const std::vector<double>& potentials) {
  const int n = grid.size();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double own = grid.points.row(i).dot(targets.row(i)) - potentials[i];
      const double other = grid.points.row(i).dot(targets.row(k)) - potentials[k];
      worst = std::max(worst, other - own);
    }
  return worst;
}

namespace detail {

/**
 * Complete graph on the grid points with edge k -> i of length
 * <T_k, G_k - G_i> - margin * [T_k != T_i]. Activity of every piece with
 * slack `margin` is feasibility of psi_i - psi_k >= -length(k, i).
 */
struct PotentialGraph {
  Vector own;     // <T_k, G_k>
  Matrix cross;   // cross(k, i) = <T_k, G_i>
  std::vector<int> group;  // equal targets share a group
  double tol = 0.0;

  double length(int from, int to, double margin) const {
    return own(from) - cross(from, to) - (group[from] != group[to] ? margin : 0.0);
  }
};

inline PotentialGraph potential_graph(const SphericalGrid& grid, const Matrix& targets) {
  const int n = grid.size();
  PotentialGraph g;
  g.own = targets.cwiseProduct(grid.points).rowwise().sum();
  g.cross = targets * grid.points.transpose();
  g.tol = 1e-13 * std::max(1.0, g.cross.cwiseAbs().maxCoeff());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](int a, int b) {
    for (Eigen::Index c = 0; c < targets.cols(); ++c)
      if (targets(a, c) != targets(b, c)) return targets(a, c) < targets(b, c);
    return false;
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return row_less(a, b) || (!row_less(b, a) && a < b); });
  g.group.assign(n, 0);
  for (int r = 1; r < n; ++r) g.group[order[r]] = g.group[order[r - 1]] + (row_less(order[r - 1], order[r]) ? 1 : 0);
  return g;
}

/// True when the parent pointers contain a cycle.
inline bool parent_cycle(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<int> mark(n, -1);
  for (int s = 0; s < n; ++s) {
    int v = s;
    while (v >= 0 && mark[v] < 0) mark[v] = s, v = parent[v];
    if (v >= 0 && mark[v] == s) return true;
  }
  return false;
}

/**
 * Queue-based Bellman-Ford from (or, reversed, to) the root. Returns nothing
 * when a negative cycle exists; the parent graph is checked for cycles after
 * every n scans so infeasible margins are rejected early.
 */
inline std::optional<std::vector<double>> potential_distances(const PotentialGraph& g, int root, bool reverse, double margin) {
  const int n = static_cast<int>(g.own.size());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1), visits(n, 0);
  std::vector<char> queued(n, 0);
  std::deque<int> queue{root};
  dist[root] = 0.0;
  queued[root] = 1;
  long long scans = 0;
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop_front();
    queued[k] = 0;
    if (++visits[k] > n) return std::nullopt;
    if (++scans % n == 0 && parent_cycle(parent)) return std::nullopt;
    for (int i = 0; i < n; ++i) {
      if (i == k) continue;
      const double cand = dist[k] + (reverse ? g.length(i, k, margin) : g.length(k, i, margin));
      if (cand < dist[i] - g.tol) {
        dist[i] = cand;
        parent[i] = k;
        if (!queued[i]) queue.push_back(i), queued[i] = 1;
      }
    }
  }
  return dist;
}

}  // namespace detail

/**
 * Potentials c_i making piece i active at G_i (Rockafellar's construction).
 * With psi_i = psi(G_i), activity reads psi_i - psi_k >= <T_k, G_i - G_k>.
 * Shortest paths from a root give the smallest such psi and shortest paths
 * to the root the largest. Plain shortest paths leave many pieces exactly
 * tied at other grid points, so the inequalities between distinct targets
 * are first tightened by the largest margin in a decade search that keeps
 * the graph free of negative cycles, and the midpoint of the two extreme
 * solutions is used. Then c_i = <G_i, T_i> - psi_i, shifted so min c = 0.
 * A negative cycle at zero margin means the pairs are not cyclically monotone.
 */
inline std::vector<double> fit_potentials(const SphericalGrid& grid, const Matrix& targets) {
  const int n = grid.size();
  if (targets.rows() != n || targets.cols() != grid.dim())
    fail(ErrorKind::InvalidInput, "targets must have one row per grid point in the grid dimension");
  const detail::PotentialGraph g = detail::potential_graph(grid, targets);
  int root = 0;
  for (int i = 1; i < n; ++i)
    if (grid.radius[i] < grid.radius[root]) root = i;

  auto from_root = detail::potential_distances(g, root, false, 0.0);
  if (!from_root)
    fail(ErrorKind::InvalidInput, "grid/target pairs are not cyclically monotone (negative cycle in potential graph)");
  double margin = 0.0;
  const double scale = std::max(1.0, targets.cwiseAbs().maxCoeff());
  for (double trial = 1e-2 * scale; trial >= 1e-12 * scale; trial /= 10.0) {
    if (auto d = detail::potential_distances(g, root, false, trial)) {
      from_root = std::move(d);
      margin = trial;
      break;
    }
  }
  auto to_root = detail::potential_distances(g, root, true, margin);
  if (!to_root) fail(ErrorKind::Internal, "reverse potential pass found a negative cycle");

  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) c[i] = g.own(i) - 0.5 * ((*to_root)[i] - (*from_root)[i]);
  const double lowest = *std::min_element(c.begin(), c.end());
  for (double& v : c) v -= lowest;
  return c;
}

inline ConditionalQuantileMap make_quantile_map(SphericalGrid grid, Matrix targets, std::vector<double> potentials,
                                                Vector query_x, double smoothing = 0.0, int effective_support = -1) {
  if (smoothing < 0.0) fail(ErrorKind::InvalidSpec, "smoothing must be >= 0");
  ConditionalQuantileMap map;
  map.offsets.resize(grid.size());
  for (int i = 0; i < grid.size(); ++i) map.offsets[i] = grid.points.row(i).dot(targets.row(i)) - potentials[i];
  map.grid = std::move(grid);
  map.targets = std::move(targets);
  map.potentials = std::move(potentials);
  map.query_x = std::move(query_x);
  map.smoothing = smoothing;
  map.effective_support = effective_support >= 0 ? effective_support : map.size();
  return map;
}

/// Quantile map from an optimal plan between the grid and the data Y.
inline ConditionalQuantileMap quantile_map_from_plan(SphericalGrid grid, const TransportPlan& plan, const Matrix& Y,
                                                     Vector query_x, double smoothing = 0.0) {
  Matrix targets = extract_targets(plan, Y);
  std::vector<double> c = fit_potentials(grid, targets);
  const int support = plan.num_targets - static_cast<int>(plan.dropped_targets.size());
  return make_quantile_map(std::move(grid), std::move(targets), std::move(c), std::move(query_x), smoothing, support);
}

namespace detail {

inline std::vector<int> active_pieces(const ConditionalQuantileMap& map, const Vector& u, Vector& values) {
  values = map.targets * u;
  for (int i = 0; i < map.size(); ++i) values(i) -= map.potentials[i];
  const double top = values.maxCoeff();
  const double cut = top - kActiveGap * std::max(1.0, std::abs(top));
  std::vector<int> active;
  for (int i = 0; i < map.size(); ++i)
    if (values(i) >= cut) active.push_back(i);
  return active;
}

/// Gradient of the Moreau envelope of psi: T * lambda for the simplex weights
/// maximizing sum lambda_i a_i - (eps/2)|T lambda|^2 (accelerated projected
/// gradient, then an exact solve on the detected support).
inline Vector moreau_gradient(const ConditionalQuantileMap& map, const Vector& u) {
  const double eps = map.smoothing;
  Vector a = map.targets * u;
  for (int i = 0; i < map.size(); ++i) a(i) -= map.potentials[i];
  const double r2 = map.targets.rowwise().squaredNorm().maxCoeff();
  const double top = a.maxCoeff();
  std::vector<int> cand;
  for (int i = 0; i < map.size(); ++i)
    if (a(i) >= top - 2.0 * eps * r2 - 1e-12) cand.push_back(i);
  const auto m = static_cast<Eigen::Index>(cand.size());
  if (m == 1) return map.targets.row(cand[0]).transpose();

  Matrix T(m, map.dim());
  Vector ac(m);
  for (Eigen::Index r = 0; r < m; ++r) T.row(r) = map.targets.row(cand[r]), ac(r) = a(cand[r]);
  // Lipschitz constant of the gradient: eps * largest eigenvalue of T^T T (d x d).
  const Eigen::MatrixXd small = T.transpose() * T;
  const double lip = std::max(1e-300, eps * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(small).eigenvalues().maxCoeff());
  const double scale = std::max(1.0, ac.cwiseAbs().maxCoeff());

  auto project = [](const Vector& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      cum += s[i];
      const double t = (cum - 1.0) / static_cast<double>(i + 1);
      if (s[i] - t > 0) theta = t;
    }
    return Vector((v.array() - theta).max(0.0).matrix());
  };
  auto gradient = [&](const Vector& l) { return Vector(eps * (T * (T.transpose() * l)) - ac); };

  Vector lambda = Vector::Zero(m);
  Eigen::Index best = 0;
  ac.maxCoeff(&best);
  lambda(best) = 1.0;
  Vector y = lambda;
  double t = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const Vector next = project(y - gradient(y) / lip);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - lambda);
    lambda = next;
    t = t_next;
    if (it % 16 == 15) {
      // Frank-Wolfe gap bounds the suboptimality.
      const Vector g = gradient(lambda);
      if (g.dot(lambda) - g.minCoeff() < 1e-10 * scale) break;
    }
  }

  // Polish: solve the stationarity system on the support exactly and keep it
  // when it is feasible and no worse.
  std::vector<Eigen::Index> support;
  for (Eigen::Index r = 0; r < m; ++r)
    if (lambda(r) > 1e-9) support.push_back(r);
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd rhs(k + 1);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index q = 0; q < k; ++q) kkt(r, q) = eps * T.row(support[r]).dot(T.row(support[q]));
    kkt(r, k) = 1.0;
    kkt(k, r) = 1.0;
    rhs(r) = ac(support[r]);
  }
  rhs(k) = 1.0;
  const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  if (sol.head(k).minCoeff() >= 0.0 && (kkt * sol - rhs).norm() < 1e-12 * scale) {
    Vector polished = Vector::Zero(m);
    for (Eigen::Index r = 0; r < k; ++r) polished(support[r]) = sol(r);
    auto objective = [&](const Vector& l) { return 0.5 * eps * (T.transpose() * l).squaredNorm() - ac.dot(l); };
    if (objective(polished) <= objective(lambda)) lambda = polished;
  }
  return T.transpose() * lambda;
}

}  // namespace detail

/**
 * Q(u | x). With no smoothing: the min-norm point of the targets whose pieces
 * are active at u. With smoothing eps > 0: the gradient of the Moreau envelope
 * of psi, a (1/eps)-Lipschitz map.
 */
inline Vector evaluate(const ConditionalQuantileMap& map, const Vector& u) {
  if (u.size() != map.dim()) fail(ErrorKind::InvalidInput, "evaluation point has the wrong dimension");
  if (!(u.norm() < 1.0)) fail(ErrorKind::OutOfDomain, "evaluation point must lie in the open unit ball");
  if (map.smoothing > 0.0) return detail::moreau_gradient(map, u);
  Vector values;
  const std::vector<int> active = detail::active_pieces(map, u, values);
  if (active.size() == 1) return map.targets.row(active[0]).transpose();
  Matrix pts(static_cast<Eigen::Index>(active.size()), map.dim());
  for (std::size_t r = 0; r < active.size(); ++r) pts.row(r) = map.targets.row(active[r]);
  return min_norm_point(pts);
}

/// Grid point whose conjugate piece is maximal at y; ties go to the smaller radius, then index.
inline int rank_index(const ConditionalQuantileMap& map, const Vector& y) {
  if (y.size() != map.dim()) fail(ErrorKind::InvalidInput, "point has the wrong dimension");
  Vector values = map.grid.points * y;
  for (int i = 0; i < map.size(); ++i) values(i) -= map.offsets[i];
  const double top = values.maxCoeff();
  const double cut = top - kActiveGap * std::max(1.0, std::abs(top));
  int best = -1;
  for (int i = 0; i < map.size(); ++i) {
    if (values(i) < cut) continue;
    if (best < 0 || map.grid.radius[i] < map.grid.radius[best]) best = i;
  }
  return best;
}

/// Empirical center-outward rank of y, in [0, n_r / (n_r + 1)].
inline double rank(const ConditionalQuantileMap& map, const Vector& y) { return map.grid.radius[rank_index(map, y)]; }

inline bool region_contains(const ConditionalQuantileMap& map, const Vector& y, double tau) {
  return rank(map, y) <= tau + 1e-12;
}

inline void check_order(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", tau);
    fail(ErrorKind::InvalidOrder, std::string("quantile order tau = ") + buf + " must lie in the open interval (0,1)");
  }
}

inline ContourSet contour(const ConditionalQuantileMap& map, double tau) {
  check_order(tau);
  const GridSpec& spec = map.grid.spec;
  ContourSet out;
  out.tau = tau;
  out.query_x = map.query_x;
  int ring = 0;
  for (int j = 1; j <= spec.n_r; ++j)
    if (std::abs(map.grid.ring_radius(j) - tau) <= 1e-12) ring = j;

  const bool close = map.dim() == 2 && spec.n_s > 1;
  const Eigen::Index rows = spec.n_s + (close ? 1 : 0);
  out.vertices.resize(rows, map.dim());
  out.rays.resize(rows);
  for (int s = 0; s < spec.n_s; ++s) {
    if (ring > 0)
      out.vertices.row(s) = map.targets.row((ring - 1) * spec.n_s + s);
    else
      out.vertices.row(s) = evaluate(map, tau * map.grid.directions.row(s).transpose()).transpose();
    out.rays[s] = s;
  }
  if (close) {
    out.vertices.row(spec.n_s) = out.vertices.row(0);
    out.rays[spec.n_s] = 0;
  }
  out.closed = close;
  return out;
}

/**
 * Conditional median. With an origin in the grid the reported point is its
 * target; otherwise it is the centroid of the innermost-sphere image.
 */
inline MedianRegion median_region(const ConditionalQuantileMap& map) {
  const GridSpec& spec = map.grid.spec;
  MedianRegion out;
  const int origins = spec.n_0;
  out.ring.resize(spec.n_s + origins, map.dim());
  for (int s = 0; s < spec.n_s; ++s) out.ring.row(s) = map.targets.row(s);
  const int first_origin = spec.n_r * spec.n_s;
  for (int o = 0; o < origins; ++o) out.ring.row(spec.n_s + o) = map.targets.row(first_origin + o);
  if (origins > 0)
    out.point = map.targets.row(first_origin).transpose();
  else
    out.point = out.ring.topRows(spec.n_s).colwise().mean().transpose();
  return out;
}

/// Largest distance from T_i to the hull of the data points coupled with G_i.
inline double max_hull_gap(const ConditionalQuantileMap& map, const TransportPlan& plan, const Matrix& Y) {
  std::vector<std::vector<int>> support(plan.num_sources);
  for (const auto& e : plan.entries) support[e.source].push_back(e.target);
  double worst = 0.0;
  for (int i = 0; i < plan.num_sources; ++i) {
    Matrix shifted(static_cast<Eigen::Index>(support[i].size()), Y.cols());
    for (std::size_t r = 0; r < support[i].size(); ++r) shifted.row(r) = Y.row(support[i][r]) - map.targets.row(i);
    worst = std::max(worst, min_norm_point(shifted).norm());
  }
  return worst;
}

/// Largest sampled cycle sum over the graph {(G_i, T_i)}.
inline double map_max_cycle_sum(const ConditionalQuantileMap& map, int max_len, int trials, std::uint64_t seed) {
  return max_cycle_sum(map.grid.points, map.targets, max_len, trials, seed);
}

}  // namespace cotq
