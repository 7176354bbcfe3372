#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <vector>

#include "kgrl/error.hpp"

namespace kgrl::kg {

struct PathResult {
  int hop_count = 0;
  double weight_sum = 0.0;
  std::vector<int> path;
};

struct SearchStats {
  long long settled = 0;    // nodes finalized by a fresh heap pop
  long long touched = 0;    // distinct nodes ever reached
  long long peak_live = 0;  // max simultaneous heap entries
};

struct SearchOptions {
  // Reward queries stop once dst settles; the full-sweep mode exists for the
  // complexity benchmark, which measures target-independent global search.
  bool early_exit = true;
};

// Min-hop Dijkstra on a binary heap. Among equal-hop paths the smaller
// weight_sum wins, then the lexicographically smaller node sequence, which
// pins down one deterministic answer. Returns nullopt when dst is not
// reachable (or not present in g).
template <typename G>
std::optional<PathResult> shortest_path(const G& g, int src, int dst,
                                        SearchStats* stats = nullptr, SearchOptions opts = {}) {
  if (!g.contains(src)) throw std::invalid_argument("shortest_path: src not in graph");
  SearchStats local_stats;
  SearchStats& st = stats ? *stats : local_stats;
  st = SearchStats{};

  struct Entry {
    int hops;
    double weight;
    std::vector<int> path;  // src..node
    bool operator>(const Entry& o) const {
      if (hops != o.hops) return hops > o.hops;
      if (weight != o.weight) return weight > o.weight;
      return path > o.path;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  struct Best {
    int hops;
    double weight;
    std::vector<int> path;
    bool known = false;
  };
  std::vector<Best> best;
  auto best_slot = [&](int node) -> Best& {
    if (static_cast<size_t>(node) >= best.size()) best.resize(node + 1);
    return best[static_cast<size_t>(node)];
  };

  auto better = [](int hops, double weight, const std::vector<int>& path, const Best& b) {
    if (!b.known) return true;
    if (hops != b.hops) return hops < b.hops;
    if (weight != b.weight) return weight < b.weight;
    return path < b.path;
  };

  heap.push({0, 0.0, {src}});
  best_slot(src) = {0, 0.0, {src}, true};
  st.touched = 1;
  std::vector<char> settled;
  auto is_settled = [&](int node) {
    return static_cast<size_t>(node) < settled.size() && settled[static_cast<size_t>(node)];
  };
  auto mark_settled = [&](int node) {
    if (static_cast<size_t>(node) >= settled.size()) settled.resize(node + 1, 0);
    settled[static_cast<size_t>(node)] = 1;
  };

  std::optional<PathResult> found;
  while (!heap.empty()) {
    st.peak_live = std::max(st.peak_live, static_cast<long long>(heap.size()));
    Entry e = heap.top();
    heap.pop();
    int node = e.path.back();
    if (is_settled(node)) continue;
    mark_settled(node);
    ++st.settled;

    if (node == dst) {
      found = PathResult{e.hops, e.weight, e.path};
      if (opts.early_exit) return found;
    }

    g.for_neighbors(node, [&](int j, double w) {
      if (is_settled(j)) return;
      int nh = e.hops + 1;
      double nw = e.weight + w;
      Best& b = best_slot(j);
      std::vector<int> np = e.path;
      np.push_back(j);
      if (better(nh, nw, np, b)) {
        if (!b.known) ++st.touched;
        b = {nh, nw, np, true};
        heap.push({nh, nw, std::move(np)});
      }
    });
  }
  return found;
}

// r = 100/sqrt(hop_count + epsilon) * weight_sum, clamped to [0, r_max].
// A zero-hop result (src == dst) earns the full r_max; unreachable earns 0.
inline double graph_reward(const std::optional<PathResult>& pr, double epsilon,
                           double r_max = 100.0) {
  if (!(epsilon > 0.0)) throw ConfigError("graph_reward: epsilon must be > 0");
  if (!pr) return 0.0;
  if (pr->hop_count == 0) return r_max;
  double r = 100.0 / std::sqrt(static_cast<double>(pr->hop_count) + epsilon) * pr->weight_sum;
  return std::clamp(r, 0.0, r_max);
}

}  // namespace kgrl::kg
