#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cotq/error.hpp"

namespace cotq::detail {

/**
 * Primal network simplex on the complete bipartite graph sources -> targets,
 * with integer supplies and real costs. An artificial root joins every node
 * through a big-M arc; the initial basis is the star around the root.
 *
 * Pivoting follows a fixed arc order (block search over arc ids, leaving arc
 * chosen as the last blocking arc of the cycle), so the basis sequence is a
 * pure function of the input. Keeping the tree strongly feasible this way
 * rules out cycling on degenerate pivots.
 */
class NetworkSimplex {
 public:
  using Flow = std::int64_t;

  NetworkSimplex(int num_sources, int num_targets, std::vector<double> cost, std::vector<Flow> supply,
                 std::vector<Flow> demand)
      : ns_(num_sources),
        nt_(num_targets),
        num_real_(static_cast<std::int64_t>(num_sources) * num_targets),
        cost_(std::move(cost)),
        supply_(std::move(supply)),
        demand_(std::move(demand)) {}

  /// Runs to optimality; throws SolverStall past max_pivots (0 = automatic cap).
  void run(std::int64_t max_pivots = 0) {
    init();
    const std::int64_t cap = max_pivots > 0 ? max_pivots : 50 * num_real_ + 100000;
    int refreshes = 0;
    while (true) {
      std::int64_t entering = find_entering_arc();
      if (entering < 0) {
        // Re-derive potentials from the tree to shed accumulated rounding,
        // then confirm optimality with a full pass.
        if (refreshes > 8) break;
        recompute_potentials();
        ++refreshes;
        entering = find_entering_arc();
        if (entering < 0) break;
      }
      if (pivots_ >= cap)
        fail(ErrorKind::SolverStall, "network simplex exceeded " + std::to_string(cap) + " pivots (" +
                                         std::to_string(ns_) + " sources, " + std::to_string(nt_) + " targets)");
      pivot(entering);
      ++pivots_;
    }
    for (int v = 0; v < ns_ + nt_; ++v)
      if (flow_[num_real_ + v] != 0) fail(ErrorKind::Infeasible, "artificial arc carries flow at optimum");
  }

  Flow flow(int source, int target) const { return flow_[static_cast<std::int64_t>(source) * nt_ + target]; }
  double source_potential(int source) const { return pi_[source]; }
  /// Reduced cost c - pi_s + pi_t >= 0 at optimum, so the target dual is -pi_t.
  double target_potential(int target) const { return -pi_[ns_ + target]; }
  std::int64_t pivots() const { return pivots_; }
  double cost(int source, int target) const { return cost_[static_cast<std::size_t>(source) * nt_ + target]; }

 private:
  int ns_, nt_;
  std::int64_t num_real_;
  std::vector<double> cost_;
  std::vector<Flow> supply_, demand_;

  int root_ = 0;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  std::vector<Flow> flow_;
  std::vector<std::uint8_t> in_tree_;
  std::vector<int> parent_, depth_, first_child_, next_sib_, prev_sib_;
  std::vector<std::int64_t> pred_;
  std::vector<std::uint8_t> up_;  // pred arc points node -> parent
  std::vector<double> pi_;
  std::int64_t next_arc_ = 0;
  std::int64_t block_ = 0;
  std::int64_t pivots_ = 0;

  std::vector<int> path_, stack_;
  std::vector<std::int64_t> old_pred_;
  std::vector<std::uint8_t> old_up_;

  int tail(std::int64_t arc) const {
    if (arc < num_real_) return static_cast<int>(arc / nt_);
    const int v = static_cast<int>(arc - num_real_);
    return v < ns_ ? v : root_;
  }
  int head(std::int64_t arc) const {
    if (arc < num_real_) return ns_ + static_cast<int>(arc % nt_);
    const int v = static_cast<int>(arc - num_real_);
    return v < ns_ ? root_ : v;
  }
  double arc_cost(std::int64_t arc) const { return arc < num_real_ ? cost_[arc] : art_cost_; }

  void init() {
    const int nodes = ns_ + nt_ + 1;
    root_ = ns_ + nt_;
    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    art_cost_ = (max_cost + 1.0) * nodes;
    eps_ = 1e-12 * std::max(1.0, max_cost);

    flow_.assign(num_real_ + ns_ + nt_, 0);
    in_tree_.assign(num_real_, 0);
    parent_.assign(nodes, -1);
    depth_.assign(nodes, 0);
    first_child_.assign(nodes, -1);
    next_sib_.assign(nodes, -1);
    prev_sib_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    up_.assign(nodes, 0);
    pi_.assign(nodes, 0.0);
    for (int v = 0; v < ns_ + nt_; ++v) {
      parent_[v] = root_;
      depth_[v] = 1;
      pred_[v] = num_real_ + v;
      add_child(root_, v);
      if (v < ns_) {
        up_[v] = 1;
        flow_[num_real_ + v] = supply_[v];
        pi_[v] = art_cost_;
      } else {
        up_[v] = 0;
        flow_[num_real_ + v] = demand_[v - ns_];
        pi_[v] = -art_cost_;
      }
    }
    block_ = std::max<std::int64_t>(10, static_cast<std::int64_t>(std::sqrt(static_cast<double>(num_real_))));
    next_arc_ = 0;
    pivots_ = 0;
  }

  void add_child(int p, int c) {
    next_sib_[c] = first_child_[p];
    prev_sib_[c] = -1;
    if (first_child_[p] >= 0) prev_sib_[first_child_[p]] = c;
    first_child_[p] = c;
  }
  void remove_child(int p, int c) {
    if (prev_sib_[c] >= 0)
      next_sib_[prev_sib_[c]] = next_sib_[c];
    else
      first_child_[p] = next_sib_[c];
    if (next_sib_[c] >= 0) prev_sib_[next_sib_[c]] = prev_sib_[c];
    next_sib_[c] = prev_sib_[c] = -1;
  }

  double reduced_cost(std::int64_t arc) const {
    const int s = static_cast<int>(arc / nt_);
    const int t = ns_ + static_cast<int>(arc % nt_);
    return cost_[arc] - pi_[s] + pi_[t];
  }

  std::int64_t find_entering_arc() {
    double best = -eps_;
    std::int64_t best_arc = -1;
    std::int64_t scanned_in_block = 0;
    for (std::int64_t count = 0; count < num_real_; ++count) {
      const std::int64_t arc = next_arc_;
      next_arc_ = (next_arc_ + 1 == num_real_) ? 0 : next_arc_ + 1;
      if (!in_tree_[arc]) {
        const double rc = reduced_cost(arc);
        if (rc < best) {
          best = rc;
          best_arc = arc;
        }
      }
      if (++scanned_in_block == block_) {
        if (best_arc >= 0) return best_arc;
        scanned_in_block = 0;
      }
    }
    return best_arc;
  }

  void pivot(std::int64_t entering) {
    const int p = tail(entering);
    const int q = head(entering);
    int u = p, v = q;
    while (u != v) {
      if (depth_[u] > depth_[v])
        u = parent_[u];
      else if (depth_[v] > depth_[u])
        v = parent_[v];
      else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    const int join = u;

    constexpr Flow kInf = std::numeric_limits<Flow>::max();
    Flow delta = kInf;
    int u_out = -1;
    int side = 0;
    for (int w = p; w != join; w = parent_[w]) {
      if (up_[w] && flow_[pred_[w]] < delta) {
        delta = flow_[pred_[w]];
        u_out = w;
        side = 1;
      }
    }
    for (int w = q; w != join; w = parent_[w]) {
      if (!up_[w] && flow_[pred_[w]] <= delta) {
        delta = flow_[pred_[w]];
        u_out = w;
        side = 2;
      }
    }
    if (u_out < 0) fail(ErrorKind::Internal, "unbounded pivot cycle in transportation network");

    if (delta > 0) {
      for (int w = p; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? -delta : delta;
      for (int w = q; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? delta : -delta;
      flow_[entering] += delta;
    }

    const int u_in = side == 1 ? p : q;
    const int v_in = side == 1 ? q : p;
    const double rc = reduced_cost(entering);
    const double shift = (u_in == p) ? rc : -rc;

    const std::int64_t leaving = pred_[u_out];
    if (leaving < num_real_) in_tree_[leaving] = 0;
    in_tree_[entering] = 1;

    path_.clear();
    for (int w = u_in;; w = parent_[w]) {
      path_.push_back(w);
      if (w == u_out) break;
    }
    const std::size_t k = path_.size();
    old_pred_.resize(k);
    old_up_.resize(k);
    for (std::size_t t = 0; t < k; ++t) {
      old_pred_[t] = pred_[path_[t]];
      old_up_[t] = up_[path_[t]];
    }
    remove_child(parent_[u_out], u_out);
    for (std::size_t t = 0; t + 1 < k; ++t) remove_child(path_[t + 1], path_[t]);

    parent_[u_in] = v_in;
    pred_[u_in] = entering;
    up_[u_in] = (u_in == p) ? 1 : 0;
    add_child(v_in, u_in);
    for (std::size_t t = 0; t + 1 < k; ++t) {
      const int child = path_[t + 1];
      parent_[child] = path_[t];
      pred_[child] = old_pred_[t];
      up_[child] = old_up_[t] ? 0 : 1;
      add_child(path_[t], child);
    }

    stack_.clear();
    stack_.push_back(u_in);
    while (!stack_.empty()) {
      const int w = stack_.back();
      stack_.pop_back();
      depth_[w] = depth_[parent_[w]] + 1;
      pi_[w] += shift;
      for (int c = first_child_[w]; c >= 0; c = next_sib_[c]) stack_.push_back(c);
    }
  }

  void recompute_potentials() {
    pi_[root_] = 0.0;
    stack_.clear();
    for (int c = first_child_[root_]; c >= 0; c = next_sib_[c]) stack_.push_back(c);
    while (!stack_.empty()) {
      const int w = stack_.back();
      stack_.pop_back();
      const double c = arc_cost(pred_[w]);
      pi_[w] = up_[w] ? c + pi_[parent_[w]] : pi_[parent_[w]] - c;
      for (int ch = first_child_[w]; ch >= 0; ch = next_sib_[ch]) stack_.push_back(ch);
    }
  }
};

}  // namespace cotq::detail
