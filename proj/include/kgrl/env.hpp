#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include <json.hpp>

#include "kgrl/dataset.hpp"
#include "kgrl/error.hpp"
#include "kgrl/graph.hpp"
#include "kgrl/lmf.hpp"
#include "kgrl/shortest_path.hpp"

namespace kgrl::sim {

struct EnvConfig {
  int window = 5;                 // l, recent-item history length
  double gamma = 0.99;
  int episode_steps = 10;         // T
  double click_threshold = 0.5;   // p*
  double epsilon = 0.01;          // reward denominator guard
  double r_max = 100.0;
  bool stochastic_feedback = false;
  kg::Normalization normalization = kg::Normalization::Softmax;
  uint64_t seed = 1;

  void validate() const {
    if (window < 1) throw ConfigError("env: window must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("env: gamma must be in [0,1]");
    if (episode_steps < 1) throw ConfigError("env: episode_steps must be >= 1");
    if (!(click_threshold > 0.0 && click_threshold < 1.0))
      throw ConfigError("env: click_threshold must be in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("env: epsilon must be > 0");
    if (!(r_max > 0.0)) throw ConfigError("env: r_max must be > 0");
  }
};

struct EpisodeState {
  int user = -1;
  std::vector<int> items;     // oldest -> newest, length <= window
  std::vector<int> feedback;  // 1 = positive; only positives ever enter
};

struct StepResult {
  bool clicked = false;
  double reward = 0.0;
  bool terminal = false;
  bool early_terminal = false;  // candidate pool emptied before T steps
  int target = -1;              // the i_t this step was scored against
};

// Simulated user: LMF decides clicks, the user-specific graph prices the
// distance between the recommendation and the teacher-forced target item.
class Environment {
 public:
  Environment(const data::Dataset& d, const LmfModel& lmf, const kg::KnowledgeGraph& graph,
              EnvConfig cfg)
      : data_(&d), lmf_(&lmf), kg_(&graph), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    int rep = graph.relation_embeddings().cols;
    if (lmf.factors() != rep && lmf.factors() + 1 != rep)
      throw ConfigError(
          "env: relation embedding dimension must equal the LMF factor count, or exceed it "
          "by one when the representation carries the item-bias channel");
    if (lmf.n_users() != d.n_users || lmf.n_items() != d.n_items)
      throw ConfigError("env: LMF shape does not match the dataset");

    relevant_train_.resize(d.n_users);
    auto by_user = data::interactions_by_user(d);
    for (int u = 0; u < d.n_users; ++u) {
      std::vector<char> seen(d.n_items, 0);
      for (int idx : by_user[u]) {
        const auto& it = d.interactions[idx];
        if (it.split == data::Split::Train && it.relevant && !seen[it.item]) {
          seen[it.item] = 1;
          relevant_train_[u].push_back(it.item);
        }
      }
    }
  }

  const EnvConfig& config() const { return cfg_; }
  int n_users() const { return data_->n_users; }
  int n_items() const { return data_->n_items; }
  const data::Dataset& dataset() const { return *data_; }
  const LmfModel& lmf() const { return *lmf_; }

  bool user_eligible(int u) const { return !relevant_train_[u].empty(); }
  std::vector<int> eligible_users() const {
    std::vector<int> out;
    for (int u = 0; u < n_users(); ++u)
      if (user_eligible(u)) out.push_back(u);
    return out;
  }
  const std::vector<int>& relevant_train_items(int u) const { return relevant_train_.at(u); }

  // User vector in the stack's representation dimension. When that dimension
  // exceeds the factor count by one, the extra channel is a constant 1 so it
  // pairs with item-bias entries folded into item representations.
  std::vector<double> user_rep(int u) const {
    if (u < 0 || u >= n_users()) throw std::invalid_argument("env: user out of range");
    int rep = kg_->relation_embeddings().cols;
    std::vector<double> v = lmf_->user_vector(u);
    v.resize(rep, 1.0);
    return v;
  }

  const kg::UserSpecificGraph& user_graph(int u) {
    auto it = graph_cache_.find(u);
    if (it == graph_cache_.end())
      it = graph_cache_
               .emplace(u, kg::build_user_graph(*kg_, user_rep(u), n_items(),
                                                cfg_.normalization, u))
               .first;
    return it->second;
  }

  bool active() const { return active_; }
  const EpisodeState& state() const { return state_; }
  int steps_done() const { return steps_done_; }

  // Initial state: the user's earliest relevant train items, up to the window.
  EpisodeState reset(int user) {
    if (user < 0 || user >= n_users()) throw std::invalid_argument("env: user out of range");
    const auto& list = relevant_train_[user];
    if (list.empty()) throw DataError("env: user has no relevant training interactions");

    state_.user = user;
    state_.items.clear();
    state_.feedback.clear();
    used_.assign(n_items(), 0);
    int take = std::min<int>(cfg_.window, static_cast<int>(list.size()));
    for (int k = 0; k < take; ++k) {
      state_.items.push_back(list[k]);
      state_.feedback.push_back(1);
      used_[list[k]] = 1;
    }
    target_pos_ = static_cast<size_t>(take);
    steps_done_ = 0;
    active_ = true;
    return state_;
  }

  bool is_candidate(int i) const { return i >= 0 && i < n_items() && !used_[i]; }

  std::vector<int> candidate_items() const {
    std::vector<int> out;
    for (int i = 0; i < n_items(); ++i)
      if (!used_[i]) out.push_back(i);
    return out;
  }

  // Teacher-forced target: next unseen relevant train item; once the log runs
  // out, the candidate the simulator itself likes best.
  int current_target() {
    const auto& list = relevant_train_[state_.user];
    while (target_pos_ < list.size() && used_[list[target_pos_]]) ++target_pos_;
    if (target_pos_ < list.size()) return list[target_pos_];
    int best = -1;
    double best_p = -1.0;
    for (int i = 0; i < n_items(); ++i) {
      if (used_[i]) continue;
      double p = lmf_->predict(state_.user, i);
      if (p > best_p) {
        best_p = p;
        best = i;
      }
    }
    return best;
  }

  StepResult step(int item) {
    if (!active_) throw std::logic_error("env: step on a terminated episode");
    if (!is_candidate(item))
      throw std::invalid_argument("env: recommended item is not a candidate");

    StepResult res;
    res.target = current_target();

    double p = lmf_->predict(state_.user, item);
    if (cfg_.stochastic_feedback) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      res.clicked = u(rng_) < p;
    } else {
      res.clicked = p > cfg_.click_threshold;
    }

    const auto& g = user_graph(state_.user);
    auto pr = kg::shortest_path(g, item, res.target);
    res.reward = kg::graph_reward(pr, cfg_.epsilon, cfg_.r_max);

    if (res.clicked) {
      state_.items.push_back(item);
      state_.feedback.push_back(1);
      if (static_cast<int>(state_.items.size()) > cfg_.window) {
        state_.items.erase(state_.items.begin());
        state_.feedback.erase(state_.feedback.begin());
      }
    }
    used_[item] = 1;

    ++steps_done_;
    if (steps_done_ >= cfg_.episode_steps) {
      res.terminal = true;
    } else if (candidate_items().empty()) {
      res.terminal = true;
      res.early_terminal = true;
    }
    if (res.terminal) active_ = false;
    return res;
  }

 private:
  const data::Dataset* data_;
  const LmfModel* lmf_;
  const kg::KnowledgeGraph* kg_;
  EnvConfig cfg_;
  std::mt19937_64 rng_;

  std::vector<std::vector<int>> relevant_train_;
  std::map<int, kg::UserSpecificGraph> graph_cache_;

  bool active_ = false;
  EpisodeState state_;
  std::vector<char> used_;
  size_t target_pos_ = 0;
  int steps_done_ = 0;
};

inline nlohmann::json transition_json(const EpisodeState& before, int action,
                                      const StepResult& res, const EpisodeState& after) {
  return {{"user", before.user},   {"state", before.items},     {"action", action},
          {"reward", res.reward},  {"clicked", res.clicked},    {"target", res.target},
          {"next_state", after.items}, {"terminal", res.terminal}};
}

}  // namespace kgrl::sim
