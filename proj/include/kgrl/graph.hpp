#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kgrl/dataset.hpp"
#include "kgrl/error.hpp"
#include "kgrl/tensor.hpp"

namespace kgrl::kg {

inline double relation_score(const std::vector<double>& user_vec,
                             const std::vector<double>& relation_vec) {
  if (user_vec.size() != relation_vec.size())
    throw std::invalid_argument("relation_score: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < user_vec.size(); ++i) s += user_vec[i] * relation_vec[i];
  return s;
}

// Global entity graph over undirected (head, relation, tail) links, plus one
// learned-at-init embedding row per relation type.
class KnowledgeGraph {
 public:
  KnowledgeGraph(int n_entities, int n_relations, const std::vector<data::RelationTriple>& triples,
                 int dim, uint64_t seed)
      : n_entities_(n_entities), n_relations_(n_relations), adj_(n_entities) {
    std::mt19937_64 rng(seed);
    relation_emb_ = nn::uniform_tensor(std::max(n_relations, 1), dim,
                                       1.0 / std::sqrt(static_cast<double>(dim)), rng);
    for (const auto& t : triples) {
      if (t.head == t.tail) throw DataError("knowledge graph: self-loop triple");
      if (t.head < 0 || t.head >= n_entities || t.tail < 0 || t.tail >= n_entities)
        throw DataError("knowledge graph: entity index out of range");
      if (t.relation < 0 || t.relation >= n_relations)
        throw DataError("knowledge graph: relation index out of range");
      adj_[t.head].push_back({t.tail, t.relation});
      adj_[t.tail].push_back({t.head, t.relation});
    }
    for (auto& lst : adj_) {
      std::sort(lst.begin(), lst.end());
      lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
  }

  explicit KnowledgeGraph(const data::Dataset& d, int dim, uint64_t seed)
      : KnowledgeGraph(d.n_entities, std::max(d.n_relations, 1), d.triples, dim, seed) {}

  int n_entities() const { return n_entities_; }
  int n_relations() const { return n_relations_; }
  const nn::Tensor2& relation_embeddings() const { return relation_emb_; }
  const std::vector<std::pair<int, int>>& neighbors(int entity) const { return adj_.at(entity); }

 private:
  int n_entities_;
  int n_relations_;
  std::vector<std::vector<std::pair<int, int>>> adj_;  // (neighbour, relation), sorted
  nn::Tensor2 relation_emb_;
};

enum class Normalization { Softmax, Ratio };

// Item-item graph for one user. Every item is a node; weights over each
// neighbourhood are normalized to sum to 1 (softmax by default).
class UserSpecificGraph {
 public:
  UserSpecificGraph(int owner, int n_items) : owner_(owner), adj_(n_items) {}

  int owner() const { return owner_; }
  int n_nodes() const { return static_cast<int>(adj_.size()); }
  bool contains(int i) const { return i >= 0 && i < n_nodes(); }

  const std::vector<std::pair<int, double>>& edges(int i) const { return adj_.at(i); }

  template <typename Fn>
  void for_neighbors(int i, Fn fn) const {
    for (const auto& [j, w] : adj_.at(i)) fn(j, w);
  }

  void set_edges(int i, std::vector<std::pair<int, double>> edges) {
    adj_.at(i) = std::move(edges);
  }

  long long n_edges() const {
    long long n = 0;
    for (const auto& lst : adj_) n += static_cast<long long>(lst.size());
    return n;
  }

 private:
  int owner_;
  std::vector<std::vector<std::pair<int, double>>> adj_;
};

// Raw scores are the user's inner products with relation embeddings; parallel
// relations between the same item pair contribute their maximum score. Ratio
// mode clamps negatives to zero and falls back to uniform on a zero sum.
inline UserSpecificGraph build_user_graph(const KnowledgeGraph& kg,
                                          const std::vector<double>& user_vec, int n_items,
                                          Normalization norm = Normalization::Softmax,
                                          int owner = -1) {
  if (n_items > kg.n_entities())
    throw std::invalid_argument("build_user_graph: more items than entities");
  const nn::Tensor2& rel = kg.relation_embeddings();
  if (static_cast<int>(user_vec.size()) != rel.cols)
    throw std::invalid_argument("build_user_graph: user vector dimension mismatch");

  UserSpecificGraph g(owner, n_items);
  std::vector<double> rel_score(kg.n_relations());
  for (int r = 0; r < kg.n_relations(); ++r) {
    double s = 0.0;
    for (int c = 0; c < rel.cols; ++c) s += user_vec[c] * rel.at(r, c);
    rel_score[r] = s;
  }

  for (int i = 0; i < n_items; ++i) {
    std::vector<std::pair<int, double>> raw;  // (neighbour, max score), neighbours ascending
    for (const auto& [j, r] : kg.neighbors(i)) {
      if (j >= n_items) continue;
      double s = rel_score[r];
      if (!raw.empty() && raw.back().first == j)
        raw.back().second = std::max(raw.back().second, s);
      else
        raw.push_back({j, s});
    }
    if (raw.empty()) continue;

    std::vector<std::pair<int, double>> weighted = raw;
    if (norm == Normalization::Softmax) {
      double mx = raw[0].second;
      for (const auto& [j, s] : raw) mx = std::max(mx, s);
      double z = 0.0;
      for (auto& [j, s] : weighted) {
        s = std::exp(s - mx);
        z += s;
      }
      for (auto& [j, s] : weighted) s /= z;
    } else {
      double z = 0.0;
      for (auto& [j, s] : weighted) {
        s = std::max(s, 0.0);
        z += s;
      }
      if (z <= 0.0) {
        for (auto& [j, s] : weighted) s = 1.0 / weighted.size();
      } else {
        for (auto& [j, s] : weighted) s /= z;
      }
    }
    g.set_edges(i, std::move(weighted));
  }
  return g;
}

// Level-by-level neighbourhood of the user's interacted items. Keeps a
// membership mask over the parent graph; edges are the induced ones.
class LocalSubgraph {
 public:
  LocalSubgraph(const UserSpecificGraph* parent, std::vector<int> centers)
      : parent_(parent), member_(parent->n_nodes(), 0) {
    std::sort(centers.begin(), centers.end());
    centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
    for (int c : centers) {
      if (!parent->contains(c)) throw std::invalid_argument("LocalSubgraph: center out of range");
      member_[c] = 1;
    }
    centers_ = centers;
    nodes_ = centers;
    frontier_ = centers;
  }

  int depth() const { return depth_; }
  const std::vector<int>& centers() const { return centers_; }
  const std::vector<int>& nodes() const { return nodes_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  bool contains(int i) const {
    return i >= 0 && i < static_cast<int>(member_.size()) && member_[i];
  }

  void expand() {
    std::vector<int> next;
    for (int u : frontier_)
      parent_->for_neighbors(u, [&](int v, double) {
        if (!member_[v]) {
          member_[v] = 1;
          next.push_back(v);
        }
      });
    std::sort(next.begin(), next.end());
    nodes_.insert(nodes_.end(), next.begin(), next.end());
    std::inplace_merge(nodes_.begin(), nodes_.end() - next.size(), nodes_.end());
    frontier_ = std::move(next);
    ++depth_;
  }

  void expand_to(int target_depth) {
    while (depth_ < target_depth) expand();
  }

  template <typename Fn>
  void for_neighbors(int i, Fn fn) const {
    parent_->for_neighbors(i, [&](int j, double w) {
      if (member_[j]) fn(j, w);
    });
  }

  long long n_edges() const {
    long long n = 0;
    for (int i : nodes_)
      for_neighbors(i, [&](int, double) { ++n; });
    return n;
  }

 private:
  const UserSpecificGraph* parent_;
  std::vector<int> centers_, nodes_, frontier_;
  std::vector<char> member_;
  int depth_ = 0;
};

// Debug/replay dump: one JSON header line, then src,dst,weight lines.
inline void save_graph(const std::string& path, const UserSpecificGraph& g) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  nlohmann::json header = {
      {"owner", g.owner()}, {"nodes", g.n_nodes()}, {"edges", g.n_edges()}};
  os << header.dump() << "\n";
  for (int i = 0; i < g.n_nodes(); ++i)
    for (const auto& [j, w] : g.edges(i)) os << i << "," << j << "," << data::detail::fmt_double(w) << "\n";
}

inline UserSpecificGraph load_graph(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(path + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad header: " + e.what());
  }
  UserSpecificGraph g(header.at("owner").get<int>(), header.at("nodes").get<int>());
  std::vector<std::vector<std::pair<int, double>>> adj(g.n_nodes());
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    std::string trimmed = data::detail::strip(line);
    if (trimmed.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    auto fields = data::detail::split_fields(trimmed);
    if (fields.size() != 3) throw DataError(where + ": expected 3 fields");
    int src = static_cast<int>(data::detail::parse_int(fields[0], where));
    int dst = static_cast<int>(data::detail::parse_int(fields[1], where));
    if (src < 0 || src >= g.n_nodes() || dst < 0 || dst >= g.n_nodes())
      throw DataError(where + ": node out of range");
    adj[src].push_back({dst, data::detail::parse_double(fields[2], where)});
  }
  for (int i = 0; i < g.n_nodes(); ++i) g.set_edges(i, std::move(adj[i]));
  return g;
}

}  // namespace kgrl::kg
