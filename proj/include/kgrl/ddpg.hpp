#pragma once

// Actor-critic training loop: replay-driven critic regression onto TD targets
// from frozen target networks, sampled policy-gradient actor ascent, local
// knowledge network updates, and soft target tracking.

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "kgrl/agent.hpp"
#include "kgrl/env.hpp"
#include "kgrl/error.hpp"
#include "kgrl/lkg.hpp"
#include "kgrl/metrics.hpp"
#include "kgrl/optim.hpp"
#include "kgrl/replay.hpp"

namespace kgrl::rl {

struct DdpgConfig {
  double gamma = 0.99;
  double tau = 0.01;
  int batch = 32;
  std::size_t buffer_capacity = 100000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double kg_lr = 1e-3;
  double noise_scale = 0.1;
  double noise_decay = 1.0;  // per-episode multiplier on the exploration sigma
  int lkg_every = 1;  // run the local-KG hook every k-th update step
  LkgConfig lkg;
  int eval_k = 10;
  int probe_users = 5;  // per-episode precision probes
  int checkpoint_every = 0;

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0,1]");
    if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must lie in (0,1]");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (buffer_capacity < static_cast<std::size_t>(batch))
      throw ConfigError("replay capacity must be >= batch size");
    if (actor_lr <= 0.0 || critic_lr <= 0.0 || kg_lr <= 0.0)
      throw ConfigError("learning rates must be > 0");
    if (noise_scale < 0.0) throw ConfigError("noise scale must be >= 0");
    if (noise_decay <= 0.0 || noise_decay > 1.0) throw ConfigError("noise decay must lie in (0,1]");
    if (lkg_every < 1) throw ConfigError("lkg_every must be >= 1");
    if (eval_k < 1) throw ConfigError("eval_k must be >= 1");
    if (probe_users < 0) throw ConfigError("probe_users must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    lkg.validate();
  }
};

// Exploration sigma for a given episode under the configured anneal schedule.
inline double noise_sigma(const DdpgConfig& cfg, int episode) {
  return cfg.noise_scale * std::pow(cfg.noise_decay, episode);
}

struct StepRow {
  int episode = 0;
  int step = 0;
  double reward = 0.0;
  double critic_loss = std::nan("");
  double lkg_loss = std::nan("");
  double actor_grad_norm = std::nan("");
  std::size_t buffer_size = 0;
  bool updated = false;  // false during replay warmup
};

struct EpisodeRow {
  int episode = 0;
  int user = -1;
  double mean_reward = 0.0;
  double mean_critic_loss = std::nan("");
  double precision_at_k = std::nan("");
};

struct TrainingLog {
  std::vector<StepRow> steps;
  std::vector<EpisodeRow> episodes;
  std::vector<std::string> phase_trace;  // per-update ordering instrumentation
  long long warmup_skips = 0;

  std::string steps_csv() const {
    std::string out = "episode,step,reward,critic_loss,lkg_loss,actor_grad_norm,buffer_size\n";
    char buf[256];
    for (const StepRow& r : steps) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%zu\n", r.episode, r.step,
                    r.reward, r.critic_loss, r.lkg_loss, r.actor_grad_norm, r.buffer_size);
      out += buf;
    }
    return out;
  }

  std::string episodes_csv() const {
    std::string out = "episode,user,mean_reward,mean_critic_loss,precision_at_k\n";
    char buf[256];
    for (const EpisodeRow& r : episodes) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", r.episode, r.user,
                    r.mean_reward, r.mean_critic_loss, r.precision_at_k);
      out += buf;
    }
    return out;
  }
};

inline void soft_update(const nn::ParamStore& online, nn::ParamStore& target, double tau) {
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must lie in (0,1]");
  for (const nn::Param& p : online.params()) {
    nn::Tensor2& tv = target.by_name(p.name).value;
    if (!tv.same_shape(p.value)) throw std::invalid_argument("target shape mismatch: " + p.name);
    for (std::size_t i = 0; i < tv.data.size(); ++i)
      tv.data[i] = tau * p.value.data[i] + (1.0 - tau) * tv.data[i];
  }
}

class DdpgTrainer {
 public:
  DdpgTrainer(agent::Agent& ag, sim::Environment& env, const DdpgConfig& cfg,
              unsigned long long seed)
      : agent_(ag),
        env_(env),
        cfg_(cfg),
        buffer_(cfg.buffer_capacity, seed),
        actor_opt_(cfg.actor_lr),
        critic_opt_(cfg.critic_lr),
        kg_opt_(cfg.kg_lr) {
    cfg_.validate();
    if (env_.lmf().factors() != ag.config().d && env_.lmf().factors() + 1 != ag.config().d)
      throw ConfigError(
          "simulator factor count must match the agent embedding dimension, or be one less "
          "when the embedding carries the item-bias channel (user vectors feed the knowledge "
          "loss)");
    if (env_.n_items() != ag.config().n_items)
      throw ConfigError("agent and environment disagree on the item count");
  }

  ReplayBuffer& buffer() { return buffer_; }

  // Timing harnesses drop cached per-user graph summaries so repeated critic
  // steps pay the full convolution cost each time.
  void clear_summary_cache() { summaries_.clear(); }
  const DdpgConfig& config() const { return cfg_; }

  LkgTrainer& lkg_for(int user) {
    auto it = lkg_.find(user);
    if (it == lkg_.end()) {
      // the episode bootstrap window (earliest relevant train items) seeds the
      // local neighbourhood; computed directly so a live episode is untouched
      const std::vector<int>& rel = env_.relevant_train_items(user);
      if (rel.empty()) throw DataError("user has no relevant training history");
      const std::size_t take =
          std::min<std::size_t>(rel.size(), static_cast<std::size_t>(env_.config().window));
      std::vector<int> centers(rel.begin(), rel.begin() + take);
      it = lkg_.emplace(user, std::make_unique<LkgTrainer>(&env_.user_graph(user),
                                                           std::move(centers), cfg_.lkg))
               .first;
    }
    return *it->second;
  }

  // critic view of the user's graph neighbourhood; the M-K ablation convolves
  // over the whole user graph instead of the grown local subgraph
  agent::LocalKnowledgeNetwork lkn_for(int user) {
    if (agent_.config().variant == agent::Variant::M_K)
      return agent_.make_lkn(env_.user_graph(user));
    return agent_.make_lkn(lkg_for(user).subgraph());
  }

  double critic_loss(const std::vector<const Transition*>& batch) {
    return critic_pass(batch, false);
  }

  double critic_update(const std::vector<const Transition*>& batch) {
    const double loss = critic_pass(batch, true);
    critic_opt_.step(agent_.critic());
    return loss;
  }

  // fills the actor gradient slots with the negated sampled policy gradient
  // (gradient flows through the action path only; the critic's state and
  // graph-summary inputs stay fixed) and returns its L2 norm
  double actor_gradients(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    agent_.actor().zero_grads();
    for (const Transition* tr : batch) {
      const nn::Tensor2 s_row = agent_.encode_state(tr->items_before);
      const nn::Tensor2& g_row = summary_for(tr->user);

      nn::Tape ct(&agent_.critic());
      int an = ct.input(nn::Tensor2(1, agent_.config().d,
                                    agent_.policy_with(agent_.actor(), tr->items_before).data));
      int q = agent_.build_q(ct, s_row, an, g_row);
      ct.backward(q, nn::Tensor2(1, 1, inv_n));
      nn::Tensor2 ga = ct.grad(an);

      // optimizers minimize, so feed the negated action gradient through the actor
      for (double& v : ga.data) v = -v;
      nn::Tape at(&agent_.actor());
      at.backward(agent_.build_action(at, agent_.build_state(at, tr->items_before)), ga);
    }
    double sq = 0.0;
    for (const nn::Param& p : agent_.actor().params())
      for (double g : p.grad.data) sq += g * g;
    return std::sqrt(sq);
  }

  // ascends batch-mean Q(S, phi(S)); returns the pre-step gradient L2 norm
  double actor_update(const std::vector<const Transition*>& batch) {
    const double norm = actor_gradients(batch);
    actor_opt_.step(agent_.actor());
    agent_.critic().zero_grads();  // scratch gradients from the action-gradient passes
    return norm;
  }

  void update_targets() {
    soft_update(agent_.actor(), agent_.actor_target(), cfg_.tau);
    soft_update(agent_.critic(), agent_.critic_target(), cfg_.tau);
  }

  // Algorithm-2 hook for one user; returns the knowledge loss
  double lkg_step(int user) {
    LkgTrainer& lt = lkg_for(user);
    const std::vector<int>& pos = env_.relevant_train_items(user);
    return lt.train(agent_, std::set<int>(pos.begin(), pos.end()), env_.user_rep(user),
                    kg_opt_);
  }

  TrainingLog train(int episodes, const std::string& checkpoint_dir = "") {
    if (episodes < 0) throw ConfigError("episode count must be >= 0");
    TrainingLog log;
    if (episodes == 0) return log;
    const std::vector<int>& users = env_.eligible_users();
    if (users.empty()) throw DataError("no user has relevant training history");

    long long update_steps = 0;
    for (int ep = 0; ep < episodes; ++ep) {
      const int user = users[static_cast<std::size_t>(ep) % users.size()];
      lkg_for(user);  // seed the local trainer before the episode resets below
      sim::EpisodeState state = env_.reset(user);

      const double sigma = noise_sigma(cfg_, ep);
      double reward_sum = 0.0, loss_sum = 0.0;
      int steps = 0, updates = 0;
      while (env_.active()) {
        agent::ActionVector a = agent_.act(state.items, sigma);
        a.resolved = agent_.resolve_item(a.value, env_.candidate_items());
        sim::StepResult res = env_.step(a.resolved);
        const sim::EpisodeState& next = env_.state();

        buffer_.push(
            {user, state.items, next.items, a.value, res.reward, res.terminal, res.target});
        lkg_for(user).observe_reward(res.reward);

        StepRow row;
        row.episode = ep;
        row.step = ++steps;
        row.reward = res.reward;
        row.buffer_size = buffer_.size();
        if (buffer_.size() >= static_cast<std::size_t>(cfg_.batch)) {
          summaries_.clear();  // embeddings moved last step; recompute per user
          auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch));
          row.critic_loss = critic_update(batch);
          log.phase_trace.push_back("critic");
          if (update_steps % cfg_.lkg_every == 0) {
            row.lkg_loss = lkg_step(user);
            summaries_.clear();
            log.phase_trace.push_back("lkg");
          }
          row.actor_grad_norm = actor_update(batch);
          log.phase_trace.push_back("actor");
          update_targets();
          log.phase_trace.push_back("targets");
          row.updated = true;
          ++update_steps;
          loss_sum += row.critic_loss;
          ++updates;
        } else {
          ++log.warmup_skips;
        }
        log.steps.push_back(row);
        reward_sum += res.reward;
        state = next;
      }

      EpisodeRow erow;
      erow.episode = ep;
      erow.user = user;
      erow.mean_reward = steps > 0 ? reward_sum / steps : 0.0;
      if (updates > 0) erow.mean_critic_loss = loss_sum / updates;
      erow.precision_at_k = probe_precision();
      log.episodes.push_back(erow);

      if (cfg_.checkpoint_every > 0 && !checkpoint_dir.empty() &&
          (ep + 1) % cfg_.checkpoint_every == 0)
        agent_.save(checkpoint_dir + "/checkpoint_ep" + std::to_string(ep + 1) + ".bin");
    }
    return log;
  }

  // greedy top-k recommendation for a user from the current deterministic policy
  std::vector<int> recommend(int user, int k) {
    sim::EpisodeState state = env_.reset(user);
    agent::ActionVector a = agent_.act(state.items, 0.0);
    std::vector<int> candidates = env_.candidate_items();
    const nn::Tensor2& m = agent_.actor().by_name("m").value;
    std::vector<std::pair<double, int>> scored;
    scored.reserve(candidates.size());
    for (int i : candidates) {
      double s = 0.0;
      for (int kk = 0; kk < agent_.config().d; ++kk) s += a.value[kk] * m.at(i, kk);
      scored.push_back({-s, i});  // negated score: ascending sort, index breaks ties upward
    }
    std::sort(scored.begin(), scored.end());
    std::vector<int> out;
    for (int p = 0; p < k && p < static_cast<int>(scored.size()); ++p)
      out.push_back(scored[p].second);
    return out;
  }

 private:
  const nn::Tensor2& summary_for(int user) {
    auto it = summaries_.find(user);
    if (it == summaries_.end()) it = summaries_.emplace(user, agent_.gcn_summary(lkn_for(user))).first;
    return it->second;
  }

  double critic_pass(const std::vector<const Transition*>& batch, bool with_grads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    if (with_grads) agent_.critic().zero_grads();
    double loss = 0.0;
    for (const Transition* tr : batch) {
      double xi = 0.0;
      if (!tr->terminal) {
        // TD bootstrap comes from the frozen target networks
        const nn::Tensor2 s2 = agent_.encode_with(agent_.actor_target(), tr->items_after);
        agent::ActionVector a2;
        a2.value = agent_.policy_with(agent_.actor_target(), tr->items_after).data;
        if (agent_.config().q_mode == agent::QMode::Formula) {
          a2.resolved = agent_.resolve_item(a2.value, all_items());
          xi = agent_.critic_q_with(agent_.critic_target(), s2, a2, lkn_for(tr->user),
                                    tr->target);
        } else {
          nn::Tape tt(&agent_.critic_target());
          int an2 = tt.constant(nn::Tensor2(1, agent_.config().d, a2.value));
          xi = tt.value(agent_.build_q(tt, s2, an2, summary_for(tr->user))).at(0, 0);
        }
      }
      const double y = tr->reward + cfg_.gamma * xi;

      const nn::Tensor2 s1 = agent_.encode_state(tr->items_before);
      nn::Tape t(&agent_.critic());
      int an = t.constant(nn::Tensor2(1, agent_.config().d, tr->action));
      int qn = agent_.build_q(t, s1, an, summary_for(tr->user));
      const double q = t.value(qn).at(0, 0);
      const double err = q - y;
      loss += err * err * inv_n;
      if (with_grads) t.backward(qn, nn::Tensor2(1, 1, 2.0 * err * inv_n));
    }
    return loss;
  }

  const std::vector<int>& all_items() {
    if (all_items_.empty()) {
      all_items_.resize(env_.n_items());
      std::iota(all_items_.begin(), all_items_.end(), 0);
    }
    return all_items_;
  }

  double probe_precision() {
    const std::vector<int>& users = env_.eligible_users();
    const int n = std::min<int>(cfg_.probe_users, static_cast<int>(users.size()));
    if (n == 0) return std::nan("");
    double sum = 0.0;
    int counted = 0;
    for (int i = 0; i < n; ++i) {
      const int user = users[i];
      std::set<int> relevant;
      for (const auto& it : env_.dataset().interactions)
        if (it.user == user && it.split == data::Split::Validation && it.relevant)
          relevant.insert(it.item);
      std::vector<int> ranked = recommend(user, cfg_.eval_k);
      sum += eval::precision_at_k(ranked, relevant, cfg_.eval_k);
      ++counted;
    }
    return counted > 0 ? sum / counted : std::nan("");
  }

  agent::Agent& agent_;
  sim::Environment& env_;
  DdpgConfig cfg_;
  ReplayBuffer buffer_;
  nn::Adam actor_opt_, critic_opt_, kg_opt_;
  std::map<int, std::unique_ptr<LkgTrainer>> lkg_;
  std::map<int, nn::Tensor2> summaries_;  // per-user GCN summaries, one batch's lifetime
  std::vector<int> all_items_;
};

}  // namespace kgrl::rl
