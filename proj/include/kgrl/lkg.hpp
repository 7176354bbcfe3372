#pragma once

// Local knowledge network training: reward-budgeted subgraph expansion plus
// GCN gradient steps on a user-interest cross-entropy loss.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "kgrl/agent.hpp"
#include "kgrl/error.hpp"
#include "kgrl/graph.hpp"
#include "kgrl/optim.hpp"
#include "kgrl/tape.hpp"

namespace kgrl::rl {

struct LkgConfig {
  double depth_scale = 25.0;  // reward units per expansion level
  int max_depth = 4;
  double tolerance = 1e-4;  // loss-delta convergence threshold
  int stable_window = 5;    // consecutive deltas that must sit under tolerance
  int max_iters = 20;       // per train() call

  void validate() const {
    if (depth_scale <= 0.0) throw ConfigError("depth_scale must be > 0");
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
    if (tolerance <= 0.0) throw ConfigError("convergence tolerance must be > 0");
    if (stable_window < 1) throw ConfigError("stable_window must be >= 1");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  }
};

// summed binary cross-entropy; predictions clamped away from {0,1} so the
// logs stay finite, with the clamp count reported for logging
inline double lkg_loss(const std::vector<double>& labels, const std::vector<double>& predicted,
                       long long* clamped = nullptr) {
  if (labels.size() != predicted.size())
    throw std::invalid_argument("labels and predictions differ in length");
  const double lo = 1e-7, hi = 1.0 - 1e-7;
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double p = predicted[i];
    if (p < lo || p > hi) {
      p = std::clamp(p, lo, hi);
      if (clamped != nullptr) ++*clamped;
    }
    loss -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return loss;
}

// One instance per user. The subgraph persists and only ever grows; the
// reward storage keeps every observed reward and budgets depth by min(P).
class LkgTrainer {
 public:
  LkgTrainer(const kg::UserSpecificGraph* graph, std::vector<int> centers, const LkgConfig& cfg)
      : cfg_(cfg), sub_(graph, std::move(centers)) {
    cfg_.validate();
  }

  void observe_reward(double r) { rewards_.push_back(r); }
  const std::vector<double>& rewards() const { return rewards_; }
  const kg::LocalSubgraph& subgraph() const { return sub_; }
  const std::vector<double>& loss_trace() const { return trace_; }
  bool converged() const { return converged_; }
  long long clamp_events() const { return clamp_events_; }

  int depth_budget() const {
    if (rewards_.empty()) return 0;
    const double r = *std::min_element(rewards_.begin(), rewards_.end());
    const int b = static_cast<int>(std::floor(r / cfg_.depth_scale));
    return std::clamp(b, 0, cfg_.max_depth);
  }

  // expand one level per iteration while the budget allows, one GCN gradient
  // step per iteration; stops once the loss deltas settle under tolerance
  double train(agent::Agent& ag, const std::set<int>& positive_items,
               const std::vector<double>& user_vec, nn::Adam& opt) {
    if (static_cast<int>(user_vec.size()) != ag.config().d)
      throw ConfigError("user embedding dimension must match the agent embedding dimension");
    if (converged_) return trace_.empty() ? 0.0 : trace_.back();
    for (int iter = 0; iter < cfg_.max_iters && !converged_; ++iter) {
      if (sub_.depth() < depth_budget()) sub_.expand();
      const double loss = gcn_step(ag, positive_items, user_vec, opt);
      if (!std::isfinite(loss)) throw DataError("local knowledge training diverged");
      trace_.push_back(loss);
      if (static_cast<int>(trace_.size()) > cfg_.stable_window) {
        bool stable = true;
        for (int k = 0; k < cfg_.stable_window; ++k) {
          const std::size_t i = trace_.size() - 1 - k;
          if (std::abs(trace_[i] - trace_[i - 1]) >= cfg_.tolerance) {
            stable = false;
            break;
          }
        }
        converged_ = stable;
      }
    }
    return trace_.back();
  }

 private:
  double gcn_step(agent::Agent& ag, const std::set<int>& positive_items,
                  const std::vector<double>& user_vec, nn::Adam& opt) {
    agent::LocalKnowledgeNetwork lkn = ag.make_lkn(sub_);
    const int n = static_cast<int>(lkn.nodes.size());
    const int d = ag.config().d;

    nn::Tape t(&ag.kg());
    int reps = ag.build_gcn_nodes(t, lkn);
    int scores = t.matmul(reps, t.constant(nn::Tensor2(d, 1, user_vec)));
    const nn::Tensor2& s = t.value(scores);

    std::vector<double> labels(n), predicted(n);
    nn::Tensor2 seed(n, 1);
    for (int r = 0; r < n; ++r) {
      labels[r] = positive_items.count(lkn.nodes[r]) ? 1.0 : 0.0;
      predicted[r] = 1.0 / (1.0 + std::exp(-s.at(r, 0)));
      seed.at(r, 0) = predicted[r] - labels[r];  // exact BCE gradient at the logit
    }
    const double loss = lkg_loss(labels, predicted, &clamp_events_);
    t.backward(scores, seed);
    opt.step(ag.kg());
    return loss;
  }

  LkgConfig cfg_;
  kg::LocalSubgraph sub_;
  std::vector<double> rewards_;
  std::vector<double> trace_;
  long long clamp_events_ = 0;
  bool converged_ = false;
};

}  // namespace kgrl::rl
