#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgrl/error.hpp"
#include "kgrl/graph.hpp"
#include "kgrl/shortest_path.hpp"

namespace kgrl::bench {

struct BenchConfig {
  int degree = 4;         // random neighbours drawn per node
  int center_items = 20;  // consumed-item set the local network grows from
  int repeats = 30;
  int levels = 5;
  std::vector<int> item_counts = {1000, 10000};

  void validate() const {
    if (degree < 1) throw ConfigError("bench: degree must be >= 1");
    if (center_items < 1) throw ConfigError("bench: center_items must be >= 1");
    if (repeats < 1) throw ConfigError("bench: repeats must be >= 1");
    if (levels < 1) throw ConfigError("bench: levels must be >= 1");
    if (item_counts.empty()) throw ConfigError("bench: item_counts must not be empty");
    for (int n : item_counts)
      if (n <= center_items + degree)
        throw ConfigError("bench: item_counts entries must exceed center_items + degree");
  }
};

struct BenchRecord {
  std::string mode;  // "local" or "global"
  int items = 0;
  int level = 0;
  bool reachable = true;
  int hops = -1;
  long long wall_ns = 0;  // median over repeats
  long long nodes_touched = 0;
  long long peak_live = 0;
};

// Symmetric random graph: each node draws `degree` distinct partners, so
// every node ends with at least `degree` neighbours. Unit edge weights.
inline kg::UserSpecificGraph bench_graph(int n_items, int degree, uint64_t seed) {
  if (n_items < degree + 2) throw ConfigError("bench_graph: too few items for the degree");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n_items - 1);
  std::vector<std::set<int>> adj(n_items);
  for (int i = 0; i < n_items; ++i) {
    int added = 0;
    while (added < degree) {
      int j = pick(rng);
      if (j == i || adj[i].count(j)) continue;
      adj[i].insert(j);
      adj[j].insert(i);
      ++added;
    }
  }
  kg::UserSpecificGraph g(0, n_items);
  for (int i = 0; i < n_items; ++i) {
    std::vector<std::pair<int, double>> edges;
    for (int j : adj[i]) edges.push_back({j, 1.0});
    g.set_edges(i, std::move(edges));
  }
  return g;
}

inline std::vector<int> bfs_distances(const kg::UserSpecificGraph& g, int src) {
  std::vector<int> dist(g.n_nodes(), -1);
  std::deque<int> q;
  dist[src] = 0;
  q.push_back(src);
  while (!q.empty()) {
    int node = q.front();
    q.pop_front();
    g.for_neighbors(node, [&](int j, double) {
      if (dist[j] < 0) {
        dist[j] = dist[node] + 1;
        q.push_back(j);
      }
    });
  }
  return dist;
}

namespace detail {

template <typename G>
inline BenchRecord timed_search(const G& g, int src, int dst, int repeats) {
  kg::SearchStats stats;
  std::vector<long long> walls;
  std::optional<kg::PathResult> pr;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    pr = kg::shortest_path(g, src, dst, &stats, kg::SearchOptions{/*early_exit=*/false});
    auto t1 = std::chrono::steady_clock::now();
    walls.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  }
  std::sort(walls.begin(), walls.end());
  BenchRecord rec;
  rec.reachable = pr.has_value();
  rec.hops = pr ? pr->hop_count : -1;
  rec.wall_ns = walls[walls.size() / 2];
  rec.nodes_touched = stats.touched;
  rec.peak_live = stats.peak_live;
  return rec;
}

}  // namespace detail

// For each graph size and neighbour level: plant a target at exactly that
// BFS distance from the consumed-item set, then sweep the local subgraph and
// the full graph with the same target-independent search. Local subgraph
// construction is excluded from timing; the agent maintains it incrementally.
inline std::vector<BenchRecord> bench_search(const BenchConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::vector<BenchRecord> out;
  for (int n_items : cfg.item_counts) {
    kg::UserSpecificGraph g = bench_graph(n_items, cfg.degree, seed ^ (0x9e37u + n_items));

    std::mt19937_64 rng(seed + n_items);
    std::vector<int> all(n_items);
    for (int i = 0; i < n_items; ++i) all[i] = i;
    std::vector<int> centers;
    for (int c = 0; c < cfg.center_items; ++c) {
      std::uniform_int_distribution<int> pick(c, n_items - 1);
      std::swap(all[c], all[pick(rng)]);
      centers.push_back(all[c]);
    }
    std::sort(centers.begin(), centers.end());

    // multi-source distances from the centre set
    std::vector<int> dist(n_items, -1);
    std::deque<int> q;
    for (int c : centers) {
      dist[c] = 0;
      q.push_back(c);
    }
    while (!q.empty()) {
      int node = q.front();
      q.pop_front();
      g.for_neighbors(node, [&](int j, double) {
        if (dist[j] < 0) {
          dist[j] = dist[node] + 1;
          q.push_back(j);
        }
      });
    }

    for (int level = 1; level <= cfg.levels; ++level) {
      int target = -1;
      for (int i = 0; i < n_items; ++i)
        if (dist[i] == level) {
          target = i;
          break;
        }
      if (target < 0) {
        for (const char* mode : {"local", "global"}) {
          BenchRecord rec;
          rec.mode = mode;
          rec.items = n_items;
          rec.level = level;
          rec.reachable = false;
          out.push_back(rec);
        }
        continue;
      }

      // start from the centre that realizes the planted distance; every
      // shortest path from it stays inside the depth-`level` subgraph
      std::vector<int> from_target = bfs_distances(g, target);
      int src = centers[0];
      for (int c : centers)
        if (from_target[c] >= 0 && (from_target[src] < 0 || from_target[c] < from_target[src]))
          src = c;

      kg::LocalSubgraph local(&g, centers);
      local.expand_to(level);

      BenchRecord lrec = detail::timed_search(local, src, target, cfg.repeats);
      lrec.mode = "local";
      lrec.items = n_items;
      lrec.level = level;
      out.push_back(lrec);

      BenchRecord grec = detail::timed_search(g, src, target, cfg.repeats);
      grec.mode = "global";
      grec.items = n_items;
      grec.level = level;
      out.push_back(grec);
    }
  }
  return out;
}

inline std::string bench_csv(const std::vector<BenchRecord>& records) {
  std::string out = "mode,items,level,reachable,hops,wall_ns,nodes_touched,peak_live\n";
  char buf[256];
  for (const BenchRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%d,%lld,%lld,%lld\n", r.mode.c_str(), r.items,
                  r.level, r.reachable ? 1 : 0, r.hops, r.wall_ns, r.nodes_touched, r.peak_live);
    out += buf;
  }
  return out;
}

}  // namespace kgrl::bench
