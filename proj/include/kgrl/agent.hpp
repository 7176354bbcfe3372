#pragma once

// Actor network (state encoder + policy head), critic network (MLP over
// state/action/GCN summary of the local knowledge network), and the
// continuous-action-to-item mapping.

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgrl/error.hpp"
#include "kgrl/graph.hpp"
#include "kgrl/layers.hpp"
#include "kgrl/param_store.hpp"
#include "kgrl/shortest_path.hpp"
#include "kgrl/tape.hpp"
#include "kgrl/tensor.hpp"

namespace kgrl::agent {

enum class Variant { M, M_A, M_K };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::M: return "M";
    case Variant::M_A: return "M-A";
    default: return "M-K";
  }
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "M") return Variant::M;
  if (name == "M-A") return Variant::M_A;
  if (name == "M-K") return Variant::M_K;
  throw ConfigError("unknown ablation variant '" + name + "' (expected M, M-A or M-K)");
}

enum class QMode { Learned, Formula };

struct AgentConfig {
  int n_items = 0;
  int d = 16;        // embedding and action dimension
  int window = 5;    // l, max recent items in a state
  int fc_hidden = 32;
  int critic_hidden = 32;
  int gcn_hidden = 16;
  Variant variant = Variant::M;
  QMode q_mode = QMode::Learned;
  double epsilon = 0.01;  // reward epsilon, used by the formula q-mode
  double r_max = 100.0;

  void validate() const {
    if (n_items < 1) throw ConfigError("agent requires at least one item");
    if (d < 1) throw ConfigError("embedding dimension must be >= 1");
    if (window < 1) throw ConfigError("state window must be >= 1");
    if (fc_hidden < 1 || critic_hidden < 1 || gcn_hidden < 1)
      throw ConfigError("hidden layer sizes must be >= 1");
    if (epsilon <= 0.0) throw ConfigError("reward epsilon must be > 0");
    if (r_max <= 0.0) throw ConfigError("r_max must be > 0");
  }
};

struct ActionVector {
  std::vector<double> value;
  int resolved = -1;
};

// Dense view of the graph neighbourhood the critic convolves over. Nodes are
// item indices; adjacency is binary and symmetric (weights steer the reward,
// not the convolution); features are a frozen copy of the embedding rows.
struct LocalKnowledgeNetwork {
  std::vector<int> nodes;
  std::map<int, int> row_of;
  nn::Tensor2 adjacency;
  nn::Tensor2 features;
  const kg::LocalSubgraph* local = nullptr;
  const kg::UserSpecificGraph* full = nullptr;

  bool contains(int item) const { return row_of.count(item) > 0; }
};

class Agent {
 public:
  Agent(const AgentConfig& cfg, unsigned long long seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.d));
    auto weight = [&](nn::ParamStore& s, const std::string& name, int r, int c) {
      s.add_uniform(name, r, c, bound, rng);
    };
    auto zero = [](nn::ParamStore& s, const std::string& name, int r, int c) {
      s.add(name, r, c);  // Tensor2 zero-fills
    };

    weight(actor_, "m", cfg_.n_items, cfg_.d);
    weight(actor_, "p", cfg_.window, cfg_.d);
    if (cfg_.variant != Variant::M_A) {
      weight(actor_, "wq", cfg_.d, cfg_.d);
      weight(actor_, "wk", cfg_.d, cfg_.d);
      weight(actor_, "wv", cfg_.d, cfg_.d);
    }
    weight(actor_, "fc1_w", cfg_.d, cfg_.fc_hidden);
    zero(actor_, "fc1_b", 1, cfg_.fc_hidden);
    weight(actor_, "fc2_w", cfg_.fc_hidden, cfg_.d);
    zero(actor_, "fc2_b", 1, cfg_.d);

    weight(critic_, "w1", 3 * cfg_.d, cfg_.critic_hidden);
    zero(critic_, "b1", 1, cfg_.critic_hidden);
    weight(critic_, "w2", cfg_.critic_hidden, 1);
    zero(critic_, "b2", 1, 1);

    weight(kg_, "g0", cfg_.d, cfg_.gcn_hidden);
    weight(kg_, "g1", cfg_.gcn_hidden, cfg_.d);

    actor_target_ = actor_;
    critic_target_ = critic_;
    noise_rng_.seed(seed + 0x9e3779b97f4a7c15ull);
  }

  const AgentConfig& config() const { return cfg_; }

  // Replaces the random item embedding with a provided representation (for
  // example the simulator's [factors | bias] rows). The target copy follows so
  // TD targets start from the same geometry.
  void init_embeddings_from(const nn::Tensor2& feats) {
    if (feats.rows != cfg_.n_items || feats.cols != cfg_.d)
      throw ConfigError("init_embeddings_from: expected a " + std::to_string(cfg_.n_items) +
                        "x" + std::to_string(cfg_.d) + " matrix");
    actor_.by_name("m").value = feats;
    actor_target_.by_name("m").value = feats;
  }

  nn::ParamStore& actor() { return actor_; }
  nn::ParamStore& critic() { return critic_; }
  nn::ParamStore& actor_target() { return actor_target_; }
  nn::ParamStore& critic_target() { return critic_target_; }
  nn::ParamStore& kg() { return kg_; }
  const nn::ParamStore& actor() const { return actor_; }
  const nn::ParamStore& critic() const { return critic_; }
  const nn::ParamStore& actor_target() const { return actor_target_; }
  const nn::ParamStore& critic_target() const { return critic_target_; }
  const nn::ParamStore& kg() const { return kg_; }

  // Tape builders. The tape must be bound to an actor-shaped store (online or
  // target); parameters are referenced by name.

  // recent items -> 1 x d state row
  int build_state(nn::Tape& t, const std::vector<int>& items) const {
    if (items.empty()) throw std::invalid_argument("cannot encode an empty state");
    if (static_cast<int>(items.size()) > cfg_.window)
      throw std::invalid_argument("state holds more items than the window allows");
    for (int i : items)
      if (i < 0 || i >= cfg_.n_items) throw std::invalid_argument("state item out of range");

    std::vector<int> positions(items.size());
    std::iota(positions.begin(), positions.end(), 0);
    int e = t.add(t.gather_rows(t.param("m"), items),
                  t.gather_rows(t.param("p"), positions));
    int rows = cfg_.variant == Variant::M_A
                   ? t.mean_rows(e)
                   : nn::attention(t, e, t.param("wq"), t.param("wk"), t.param("wv"));
    int h = t.relu(nn::linear(t, rows, t.param("fc1_w"), t.param("fc1_b")));
    h = t.tanh(nn::linear(t, h, t.param("fc2_w"), t.param("fc2_b")));
    return cfg_.variant == Variant::M_A ? h : t.mean_rows(h);
  }

  // The action is the state representation itself; the tanh encoder keeps
  // every entry inside (-1,1), which bounds the action norm during training.
  int build_action(nn::Tape& t, int state_node) const {
    (void)t;
    return state_node;
  }

  // Q head on a critic-shaped tape; the action enters as a live node so its
  // gradient stays reachable, state and GCN summary enter as constants.
  int build_q(nn::Tape& t, const nn::Tensor2& s_row, int action_node,
              const nn::Tensor2& gcn_row) const {
    int x = t.concat_cols({t.constant(s_row), action_node, t.constant(gcn_row)});
    int h = t.relu(nn::linear(t, x, t.param("w1"), t.param("b1")));
    return nn::linear(t, h, t.param("w2"), t.param("b2"));
  }

  // kg-shaped tape: frozen node features through two GCN layers
  int build_gcn_nodes(nn::Tape& t, const LocalKnowledgeNetwork& lkn) const {
    int a = t.constant(nn::normalized_adjacency(lkn.adjacency));
    int h = nn::gcn_layer(t, a, t.constant(lkn.features), t.param("g0"), nn::Act::Relu);
    return nn::gcn_layer(t, a, h, t.param("g1"), nn::Act::None);
  }

  int build_gcn_summary(nn::Tape& t, const LocalKnowledgeNetwork& lkn) const {
    return t.mean_rows(build_gcn_nodes(t, lkn));
  }

  // Inference wrappers over the builders. Forward passes only read parameter
  // values, so running them on a const store is safe.

  nn::Tensor2 encode_state(const std::vector<int>& items) const {
    return encode_with(actor_, items);
  }

  nn::Tensor2 encode_with(const nn::ParamStore& actor_like, const std::vector<int>& items) const {
    nn::Tape t(const_cast<nn::ParamStore*>(&actor_like));
    return t.value(build_state(t, items));
  }

  nn::Tensor2 policy_with(const nn::ParamStore& actor_like, const std::vector<int>& items) const {
    nn::Tape t(const_cast<nn::ParamStore*>(&actor_like));
    return t.value(build_action(t, build_state(t, items)));
  }

  ActionVector act(const std::vector<int>& items, double noise_scale) {
    if (noise_scale < 0.0) throw ConfigError("noise scale must be >= 0");
    ActionVector a;
    a.value = policy_with(actor_, items).data;
    if (noise_scale > 0.0) {
      std::normal_distribution<double> noise(0.0, noise_scale);
      for (double& v : a.value) v += noise(noise_rng_);
    }
    return a;
  }

  int resolve_item(const std::vector<double>& action, const std::vector<int>& candidates) const {
    if (candidates.empty()) throw std::invalid_argument("cannot resolve an item: no candidates");
    if (static_cast<int>(action.size()) != cfg_.d)
      throw std::invalid_argument("action dimension mismatch");
    const nn::Tensor2& m = actor_.by_name("m").value;
    int best = -1;
    double best_score = 0.0;
    for (int i : candidates) {
      if (i < 0 || i >= cfg_.n_items) throw std::invalid_argument("candidate out of range");
      double s = 0.0;
      for (int k = 0; k < cfg_.d; ++k) s += action[k] * m.at(i, k);
      if (best < 0 || s > best_score || (s == best_score && i < best)) {
        best = i;
        best_score = s;
      }
    }
    return best;
  }

  LocalKnowledgeNetwork make_lkn(const kg::LocalSubgraph& g) const {
    LocalKnowledgeNetwork lkn;
    lkn.local = &g;
    lkn.nodes = g.nodes();
    finish_lkn(lkn, [&](int i, auto fn) { g.for_neighbors(i, fn); });
    return lkn;
  }

  LocalKnowledgeNetwork make_lkn(const kg::UserSpecificGraph& g) const {
    LocalKnowledgeNetwork lkn;
    lkn.full = &g;
    lkn.nodes.resize(g.n_nodes());
    std::iota(lkn.nodes.begin(), lkn.nodes.end(), 0);
    finish_lkn(lkn, [&](int i, auto fn) { g.for_neighbors(i, fn); });
    return lkn;
  }

  nn::Tensor2 gcn_summary(const LocalKnowledgeNetwork& lkn) const {
    nn::Tape t(const_cast<nn::ParamStore*>(&kg_));
    return t.value(build_gcn_summary(t, lkn));
  }

  double critic_q(const nn::Tensor2& s_row, const ActionVector& a,
                  const LocalKnowledgeNetwork& lkn, int target_item) const {
    return critic_q_with(critic_, s_row, a, lkn, target_item);
  }

  double critic_q_with(const nn::ParamStore& critic_like, const nn::Tensor2& s_row,
                       const ActionVector& a, const LocalKnowledgeNetwork& lkn,
                       int target_item) const {
    if (cfg_.q_mode == QMode::Formula) return formula_q(a, lkn, target_item);
    if (static_cast<int>(a.value.size()) != cfg_.d)
      throw std::invalid_argument("action dimension mismatch");
    nn::Tape t(const_cast<nn::ParamStore*>(&critic_like));
    int an = t.constant(nn::Tensor2(1, cfg_.d, a.value));
    return t.value(build_q(t, s_row, an, gcn_summary(lkn))).at(0, 0);
  }

  void save(const std::string& path) const {
    nn::save_checkpoint(path, {{"actor", &actor_},
                               {"critic", &critic_},
                               {"actor_target", &actor_target_},
                               {"critic_target", &critic_target_},
                               {"kg", &kg_}});
  }

  void load(const std::string& path) {
    std::map<std::string, nn::ParamStore> sections = nn::load_checkpoint(path);
    auto need = [&](const char* name) -> const nn::ParamStore& {
      auto it = sections.find(name);
      if (it == sections.end())
        throw DataError("checkpoint is missing section '" + std::string(name) + "'");
      return it->second;
    };
    actor_.copy_values_from(need("actor"));
    critic_.copy_values_from(need("critic"));
    actor_target_.copy_values_from(need("actor_target"));
    critic_target_.copy_values_from(need("critic_target"));
    kg_.copy_values_from(need("kg"));
  }

 private:
  template <typename ForNeighbors>
  void finish_lkn(LocalKnowledgeNetwork& lkn, ForNeighbors for_neighbors) const {
    const int n = static_cast<int>(lkn.nodes.size());
    for (int r = 0; r < n; ++r) lkn.row_of[lkn.nodes[r]] = r;
    lkn.adjacency = nn::Tensor2(n, n, 0.0);
    lkn.features = nn::Tensor2(n, cfg_.d, 0.0);
    const nn::Tensor2& m = actor_.by_name("m").value;
    for (int r = 0; r < n; ++r) {
      const int i = lkn.nodes[r];
      if (i < 0 || i >= cfg_.n_items)
        throw std::invalid_argument("knowledge network node is not an item");
      for (int k = 0; k < cfg_.d; ++k) lkn.features.at(r, k) = m.at(i, k);
      for_neighbors(i, [&](int j, double) {
        auto it = lkn.row_of.find(j);
        if (it != lkn.row_of.end()) lkn.adjacency.at(r, it->second) = 1.0;
      });
    }
  }

  double formula_q(const ActionVector& a, const LocalKnowledgeNetwork& lkn,
                   int target_item) const {
    if (a.resolved < 0) throw std::invalid_argument("formula q-mode needs a resolved item");
    std::optional<kg::PathResult> path;
    if (lkn.local != nullptr) {
      if (lkn.local->contains(a.resolved) && lkn.local->contains(target_item))
        path = kg::shortest_path(*lkn.local, a.resolved, target_item);
    } else if (lkn.full != nullptr) {
      if (lkn.full->contains(a.resolved) && lkn.full->contains(target_item))
        path = kg::shortest_path(*lkn.full, a.resolved, target_item);
    } else {
      throw std::invalid_argument("knowledge network has no backing graph");
    }
    return kg::graph_reward(path, cfg_.epsilon, cfg_.r_max);
  }

  AgentConfig cfg_;
  nn::ParamStore actor_, critic_, actor_target_, critic_target_, kg_;
  std::mt19937_64 noise_rng_;
};

}  // namespace kgrl::agent
