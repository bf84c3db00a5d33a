#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cotq/error.hpp"
#include "cotq/network_simplex.hpp"
#include "cotq/rng.hpp"
#include "cotq/types.hpp"

namespace cotq {

/// Dense cost matrices above this many entries are refused.
inline constexpr long long kMaxDenseCostEntries = 40'000'000;
inline constexpr double kMassTolerance = 1e-9;

/**
 * Kantorovich problem between weighted point clouds with cost |y - x|^2 / 2.
 * An empty source_mass means uniform 1/N on the sources.
 */
struct TransportProblem {
  Matrix sources;
  Matrix targets;
  std::vector<double> source_mass;
  std::vector<double> target_mass;
};

struct PlanEntry {
  int source = 0;
  int target = 0;
  double mass = 0.0;
};

struct TransportPlan {
  int num_sources = 0;
  int num_targets = 0;
  /// Support of the coupling, sorted by (source, target).
  std::vector<PlanEntry> entries;
  double objective = 0.0;
  /// Duals with f_i + g_j <= c_ij, equality on the support.
  std::vector<double> source_potential;
  std::vector<double> target_potential;
  /// Targets with zero mass, removed before solving.
  std::vector<int> dropped_targets;
  std::int64_t pivots = 0;
};

struct SolverOptions {
  std::int64_t max_pivots = 0;  // 0 = automatic cap
  long long max_dense_entries = kMaxDenseCostEntries;
};

inline double transport_cost(const Matrix& sources, int i, const Matrix& targets, int j) {
  return 0.5 * (targets.row(j) - sources.row(i)).squaredNorm();
}

namespace detail {

inline std::int64_t lcm_capped(std::int64_t a, std::int64_t b, std::int64_t cap) {
  const std::int64_t g = std::gcd(a, b);
  const std::int64_t q = a / g;
  if (q > cap / b) return -1;
  return q * b;
}

/// Largest-remainder rounding of masses/total onto integers summing to scale.
inline std::vector<std::int64_t> quantize_masses(const std::vector<double>& masses, std::int64_t scale) {
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  std::vector<std::int64_t> out(masses.size());
  std::vector<std::pair<double, std::size_t>> frac(masses.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const long double exact = static_cast<long double>(masses[i]) / total * static_cast<long double>(scale);
    const auto fl = static_cast<std::int64_t>(std::floor(exact));
    out[i] = fl;
    assigned += fl;
    frac[i] = {static_cast<double>(exact - static_cast<long double>(fl)), i};
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < scale && r < frac.size(); ++r, ++assigned) ++out[frac[r].second];
  return out;
}

inline bool all_equal(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

/**
 * Integer scale S for the flows. S is a multiple of 720720 = lcm(1..16) and of
 * the atom count of any uniform marginal, so masses 1/N, 1/k and small
 * rationals are represented exactly.
 */
inline std::int64_t flow_scale(const std::vector<double>& a, const std::vector<double>& b) {
  constexpr std::int64_t kCap = std::int64_t{1} << 50;
  std::int64_t base = 720720;
  std::int64_t uniform_part = 1;
  for (const auto* v : {&a, &b}) {
    if (!v->empty() && all_equal(*v)) {
      const auto count = static_cast<std::int64_t>(v->size());
      const std::int64_t next = lcm_capped(uniform_part, count, kCap);
      if (next > 0) uniform_part = next;
    }
  }
  const std::int64_t combined = lcm_capped(base, uniform_part, kCap);
  base = combined > 0 ? combined : uniform_part;
  return base * (kCap / base);
}

inline void check_marginal(const std::vector<double>& mass, const char* name) {
  double sum = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0) || !std::isfinite(m)) fail(ErrorKind::InvalidInput, std::string(name) + " masses must be finite and >= 0");
    sum += m;
  }
  if (std::abs(sum - 1.0) > kMassTolerance)
    fail(ErrorKind::Infeasible, std::string(name) + " masses sum to " + std::to_string(sum) + ", not 1");
}

}  // namespace detail

/**
 * Exact optimal coupling of the problem via network simplex, with a dual
 * certificate. Deterministic: the same input yields the same basis.
 */
inline TransportPlan solve_exact(const TransportProblem& problem, const SolverOptions& options = {}) {
  const int n_src = static_cast<int>(problem.sources.rows());
  const int n_tgt = static_cast<int>(problem.targets.rows());
  if (n_src < 1 || n_tgt < 1) fail(ErrorKind::InvalidInput, "transport problem needs at least one source and one target");
  if (problem.sources.cols() != problem.targets.cols())
    fail(ErrorKind::InvalidInput, "source and target dimensions differ");
  if (static_cast<int>(problem.target_mass.size()) != n_tgt)
    fail(ErrorKind::InvalidInput, "target mass count does not match target count");

  std::vector<double> src_mass = problem.source_mass;
  if (src_mass.empty()) src_mass.assign(n_src, 1.0 / n_src);
  if (static_cast<int>(src_mass.size()) != n_src) fail(ErrorKind::InvalidInput, "source mass count does not match source count");
  detail::check_marginal(src_mass, "source");
  detail::check_marginal(problem.target_mass, "target");

  TransportPlan plan;
  plan.num_sources = n_src;
  plan.num_targets = n_tgt;

  std::vector<int> kept;
  for (int j = 0; j < n_tgt; ++j) {
    if (problem.target_mass[j] > 0.0)
      kept.push_back(j);
    else
      plan.dropped_targets.push_back(j);
  }
  // Zero-mass sources cannot carry flow; they still receive a dual below.
  std::vector<int> kept_src;
  for (int i = 0; i < n_src; ++i)
    if (src_mass[i] > 0.0) kept_src.push_back(i);

  const auto ns = static_cast<long long>(kept_src.size());
  const auto nt = static_cast<long long>(kept.size());
  if (ns * nt > options.max_dense_entries)
    fail(ErrorKind::Resource, "dense cost matrix of " + std::to_string(ns) + " x " + std::to_string(nt) +
                                  " entries exceeds " + std::to_string(options.max_dense_entries) +
                                  "; use nearest-neighbor weights to bound the support");

  std::vector<double> cost(static_cast<std::size_t>(ns * nt));
  for (long long a = 0; a < ns; ++a)
    for (long long b = 0; b < nt; ++b)
      cost[a * nt + b] = transport_cost(problem.sources, kept_src[a], problem.targets, kept[b]);

  std::vector<double> a_mass(ns), b_mass(nt);
  for (long long a = 0; a < ns; ++a) a_mass[a] = src_mass[kept_src[a]];
  for (long long b = 0; b < nt; ++b) b_mass[b] = problem.target_mass[kept[b]];
  const std::int64_t scale = detail::flow_scale(a_mass, b_mass);
  auto supply = detail::quantize_masses(a_mass, scale);
  auto demand = detail::quantize_masses(b_mass, scale);

  detail::NetworkSimplex solver(static_cast<int>(ns), static_cast<int>(nt), std::move(cost), std::move(supply),
                                std::move(demand));
  solver.run(options.max_pivots);
  plan.pivots = solver.pivots();

  plan.source_potential.assign(n_src, 0.0);
  plan.target_potential.assign(n_tgt, 0.0);
  for (long long a = 0; a < ns; ++a) plan.source_potential[kept_src[a]] = solver.source_potential(static_cast<int>(a));
  for (long long b = 0; b < nt; ++b) plan.target_potential[kept[b]] = solver.target_potential(static_cast<int>(b));
  // Dropped atoms get the largest dual that stays feasible.
  for (int j : plan.dropped_targets) {
    double g = std::numeric_limits<double>::infinity();
    for (int i : kept_src) g = std::min(g, transport_cost(problem.sources, i, problem.targets, j) - plan.source_potential[i]);
    plan.target_potential[j] = g;
  }
  for (int i = 0; i < n_src; ++i) {
    if (src_mass[i] > 0.0) continue;
    double f = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n_tgt; ++j)
      f = std::min(f, transport_cost(problem.sources, i, problem.targets, j) - plan.target_potential[j]);
    plan.source_potential[i] = f;
  }

  const double inv_scale = 1.0 / static_cast<double>(scale);
  for (long long a = 0; a < ns; ++a) {
    for (long long b = 0; b < nt; ++b) {
      const auto f = solver.flow(static_cast<int>(a), static_cast<int>(b));
      if (f <= 0) continue;
      const double mass = static_cast<double>(f) * inv_scale;
      plan.entries.push_back({kept_src[a], kept[b], mass});
      plan.objective += mass * solver.cost(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return plan;
}

/// Largest violation of f_i + g_j <= c_ij over all pairs and of equality on the support.
struct DualCheck {
  double max_infeasibility = 0.0;
  double max_slackness_gap = 0.0;
};

inline DualCheck check_duals(const TransportProblem& problem, const TransportPlan& plan) {
  DualCheck out;
  for (int i = 0; i < plan.num_sources; ++i)
    for (int j = 0; j < plan.num_targets; ++j) {
      const double v = plan.source_potential[i] + plan.target_potential[j] - transport_cost(problem.sources, i, problem.targets, j);
      out.max_infeasibility = std::max(out.max_infeasibility, v);
    }
  for (const auto& e : plan.entries) {
    const double v = plan.source_potential[e.source] + plan.target_potential[e.target] -
                     transport_cost(problem.sources, e.source, problem.targets, e.target);
    out.max_slackness_gap = std::max(out.max_slackness_gap, std::abs(v));
  }
  return out;
}

/**
 * Samples `trials` random cycles of length 2..max_len over the pairs
 * (xs_k, ys_k) and returns the largest cycle sum
 *   sum_l <y_l, x_{l+1} - x_l>  (indices cyclic).
 * A cyclically monotone set has every cycle sum <= 0.
 */
inline double max_cycle_sum(const Matrix& xs, const Matrix& ys, int max_len, int trials, std::uint64_t seed) {
  const auto count = static_cast<std::uint64_t>(xs.rows());
  if (count < 2 || max_len < 2) return 0.0;
  SplitMix64 rng(seed);
  std::vector<Eigen::Index> idx;
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const int len = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len - 1)));
    idx.resize(len);
    for (auto& k : idx) k = static_cast<Eigen::Index>(rng.below(count));
    double sum = 0.0;
    for (int l = 0; l < len; ++l) {
      const auto cur = idx[l];
      const auto nxt = idx[(l + 1) % len];
      sum += ys.row(cur).dot(xs.row(nxt) - xs.row(cur));
    }
    worst = std::max(worst, sum);
  }
  return worst;
}

inline constexpr double kCycleSlack = 1e-8;

inline bool check_cyclical_monotonicity(const TransportProblem& problem, const TransportPlan& plan, int cycle_len_max,
                                        int trials, std::uint64_t seed) {
  if (plan.entries.size() < 2) return true;
  const auto m = static_cast<Eigen::Index>(plan.entries.size());
  Matrix xs(m, problem.sources.cols()), ys(m, problem.targets.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    xs.row(r) = problem.sources.row(plan.entries[r].source);
    ys.row(r) = problem.targets.row(plan.entries[r].target);
  }
  return max_cycle_sum(xs, ys, cycle_len_max, trials, seed) <= kCycleSlack;
}

/**
 * Optimal bijection a_i -> b_{perm[i]} minimizing the sum of squared
 * distances, solved as a transport problem with uniform masses.
 */
inline std::vector<int> solve_assignment(const Matrix& points_a, const Matrix& points_b, const SolverOptions& options = {}) {
  const auto n = points_a.rows();
  if (n != points_b.rows()) fail(ErrorKind::InvalidInput, "assignment needs equally many points on both sides");
  TransportProblem problem{points_a, points_b, {}, std::vector<double>(n, 1.0 / static_cast<double>(n))};
  const TransportPlan plan = solve_exact(problem, options);
  std::vector<int> perm(n, -1);
  for (const auto& e : plan.entries) {
    if (perm[e.source] >= 0) fail(ErrorKind::Internal, "assignment plan splits a source");
    perm[e.source] = e.target;
  }
  for (int j : perm)
    if (j < 0) fail(ErrorKind::Internal, "assignment plan leaves a source unmatched");
  return perm;
}

}  // namespace cotq
