#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgrl/agent.hpp"
#include "kgrl/ddpg.hpp"
#include "kgrl/env.hpp"
#include "kgrl/error.hpp"
#include "kgrl/metrics.hpp"

namespace kgrl::eval {

// Per-user metric averages for one ranking policy on one fitted environment.
// Users whose test split holds no relevant item are skipped, never averaged,
// so reports for different policies share the same denominator.
struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double precision_std = 0.0;
  double recall_std = 0.0;
  double ndcg_std = 0.0;
  int users_evaluated = 0;
  int users_skipped = 0;
};

inline std::set<int> test_relevant_items(const data::Dataset& d, int user) {
  std::set<int> out;
  for (const data::Interaction& it : d.interactions)
    if (it.user == user && it.split == data::Split::Test && it.relevant) out.insert(it.item);
  return out;
}

// Ranking pool: every item the user has not already consumed during the
// train or validation phases. Test items stay in so the ranker can find them.
inline std::vector<int> eval_candidates(const data::Dataset& d, int user) {
  std::vector<char> seen(d.n_items, 0);
  for (const data::Interaction& it : d.interactions)
    if (it.user == user && it.split != data::Split::Test) seen[it.item] = 1;
  std::vector<int> out;
  for (int i = 0; i < d.n_items; ++i)
    if (!seen[i]) out.push_back(i);
  return out;
}

// Returns up to k items, best first, drawn from candidates.
using RankerFn = std::function<std::vector<int>(int user, const std::vector<int>& candidates,
                                                int k)>;

inline MetricReport evaluate_ranker(const sim::Environment& env, const RankerFn& ranker,
                                    int k = 10) {
  if (k < 1) throw ConfigError("evaluate: k must be >= 1");
  const data::Dataset& d = env.dataset();
  std::vector<double> ps, rs, ns;
  MetricReport rep;
  for (int user : env.eligible_users()) {
    std::set<int> relevant = test_relevant_items(d, user);
    std::vector<int> candidates = eval_candidates(d, user);
    if (relevant.empty() || candidates.empty()) {
      ++rep.users_skipped;
      continue;
    }
    std::vector<int> ranked = ranker(user, candidates, k);
    ps.push_back(precision_at_k(ranked, relevant, k));
    auto r = recall_at_k(ranked, relevant, k);
    auto n = ndcg_at_k(ranked, relevant, k);
    rs.push_back(*r);  // non-empty relevant set guarantees a value
    ns.push_back(*n);
  }
  if (ps.empty()) throw DataError("evaluate: no users with test-split relevance");

  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / v.size());
  };
  mean_std(ps, rep.precision, rep.precision_std);
  mean_std(rs, rep.recall, rep.recall_std);
  mean_std(ns, rep.ndcg, rep.ndcg_std);
  rep.users_evaluated = static_cast<int>(ps.size());
  return rep;
}

// One deterministic policy action per slot, resolved without replacement.
inline std::vector<int> agent_rank(agent::Agent& ag, sim::Environment& env, int user,
                                   std::vector<int> candidates, int k) {
  env.reset(user);
  std::vector<int> out;
  for (int slot = 0; slot < k && !candidates.empty(); ++slot) {
    agent::ActionVector a = ag.act(env.state().items, 0.0);
    int pick = ag.resolve_item(a.value, candidates);
    out.push_back(pick);
    candidates.erase(std::find(candidates.begin(), candidates.end(), pick));
  }
  return out;
}

inline MetricReport evaluate_agent(agent::Agent& ag, sim::Environment& env, int k = 10) {
  RankerFn fn = [&](int user, const std::vector<int>& candidates, int kk) {
    return agent_rank(ag, env, user, candidates, kk);
  };
  return evaluate_ranker(env, fn, k);
}

inline MetricReport evaluate_random(const sim::Environment& env, int k, uint64_t seed) {
  std::mt19937_64 rng(seed);
  RankerFn fn = [&rng](int, const std::vector<int>& candidates, int kk) {
    std::vector<int> pool = candidates;
    std::shuffle(pool.begin(), pool.end(), rng);
    if (static_cast<int>(pool.size()) > kk) pool.resize(kk);
    return pool;
  };
  return evaluate_ranker(env, fn, k);
}

// Upper reference: ranks by the simulator's own preference scores.
inline MetricReport evaluate_oracle(const sim::Environment& env, int k) {
  const sim::LmfModel& m = env.lmf();
  RankerFn fn = [&m](int user, const std::vector<int>& candidates, int kk) {
    std::vector<std::pair<double, int>> scored;
    for (int i : candidates) scored.push_back({-m.score(user, i), i});
    std::sort(scored.begin(), scored.end());
    std::vector<int> out;
    for (int s = 0; s < kk && s < static_cast<int>(scored.size()); ++s)
      out.push_back(scored[s].second);
    return out;
  };
  return evaluate_ranker(env, fn, k);
}

struct AblationConfig {
  int d = 8;
  int window = 5;
  int fc_hidden = 16;
  int critic_hidden = 16;
  int gcn_hidden = 8;
  sim::EnvConfig env;
  rl::DdpgConfig ddpg;
  int episodes = 50;
  int k = 10;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int timing_repeats = 9;
  bool lmf_embed_init = false;  // start embeddings from the simulator's [factors | bias] rows

  void validate() const {
    if (episodes < 1) throw ConfigError("ablation: episodes must be >= 1");
    if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
    if (timing_repeats < 1) throw ConfigError("ablation: timing_repeats must be >= 1");
    env.validate();
    ddpg.validate();
  }
};

struct VariantReport {
  std::string variant;
  long long actor_params = 0;
  long long critic_params = 0;
  int seeds_run = 0;
  double precision_mean = 0.0, precision_std = 0.0;
  double recall_mean = 0.0, recall_std = 0.0;
  double ndcg_mean = 0.0, ndcg_std = 0.0;
  double critic_step_median_ms = 0.0;
};

inline long long param_count(const nn::ParamStore& s) {
  long long n = 0;
  for (const auto& p : s.params()) n += static_cast<long long>(p.value.rows) * p.value.cols;
  return n;
}

inline VariantReport run_variant(agent::Variant v, const data::Dataset& d,
                                 const sim::LmfModel& lmf, const kg::KnowledgeGraph& g,
                                 const AblationConfig& cfg) {
  cfg.validate();
  VariantReport rep;
  rep.variant = agent::variant_name(v);

  std::vector<double> ps, rs, ns;
  std::vector<double> step_ms;
  for (uint64_t seed : cfg.seeds) {
    sim::EnvConfig ec = cfg.env;
    ec.seed = seed;
    sim::Environment env(d, lmf, g, ec);

    agent::AgentConfig ac;
    ac.n_items = d.n_items;
    ac.d = cfg.d;
    ac.window = cfg.window;
    ac.fc_hidden = cfg.fc_hidden;
    ac.critic_hidden = cfg.critic_hidden;
    ac.gcn_hidden = cfg.gcn_hidden;
    ac.variant = v;
    agent::Agent ag(ac, seed);
    if (cfg.lmf_embed_init) ag.init_embeddings_from(sim::lmf_embedding(lmf));
    rep.actor_params = param_count(ag.actor());
    rep.critic_params = param_count(ag.critic());

    rl::DdpgTrainer trainer(ag, env, cfg.ddpg, seed);
    trainer.train(cfg.episodes);

    // median wall time of one critic update on a fresh cache, per seed
    if (trainer.buffer().size() >= static_cast<size_t>(cfg.ddpg.batch)) {
      std::vector<double> samples;
      for (int r = 0; r < cfg.timing_repeats; ++r) {
        auto batch = trainer.buffer().sample(cfg.ddpg.batch);
        trainer.clear_summary_cache();
        auto t0 = std::chrono::steady_clock::now();
        trainer.critic_update(batch);
        auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::sort(samples.begin(), samples.end());
      step_ms.push_back(samples[samples.size() / 2]);
    }

    MetricReport mr = evaluate_agent(ag, env, cfg.k);
    ps.push_back(mr.precision);
    rs.push_back(mr.recall);
    ns.push_back(mr.ndcg);
    ++rep.seeds_run;
  }

  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / v.size());
  };
  mean_std(ps, rep.precision_mean, rep.precision_std);
  mean_std(rs, rep.recall_mean, rep.recall_std);
  mean_std(ns, rep.ndcg_mean, rep.ndcg_std);
  if (!step_ms.empty()) {
    std::sort(step_ms.begin(), step_ms.end());
    rep.critic_step_median_ms = step_ms[step_ms.size() / 2];
  }
  return rep;
}

inline std::vector<VariantReport> run_ablation(const data::Dataset& d, const sim::LmfModel& lmf,
                                               const kg::KnowledgeGraph& g,
                                               const AblationConfig& cfg) {
  std::vector<VariantReport> out;
  for (agent::Variant v : {agent::Variant::M, agent::Variant::M_A, agent::Variant::M_K})
    out.push_back(run_variant(v, d, lmf, g, cfg));
  return out;
}

inline std::string ablation_csv(const std::vector<VariantReport>& rows) {
  std::string out =
      "variant,actor_params,critic_params,seeds,precision_mean,precision_std,"
      "recall_mean,recall_std,ndcg_mean,ndcg_std,critic_step_median_ms\n";
  char buf[512];
  for (const VariantReport& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.variant.c_str(), r.actor_params, r.critic_params, r.seeds_run,
                  r.precision_mean, r.precision_std, r.recall_mean, r.recall_std, r.ndcg_mean,
                  r.ndcg_std, r.critic_step_median_ms);
    out += buf;
  }
  return out;
}

inline std::string metrics_csv(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::string out =
      "policy,precision,precision_std,recall,recall_std,ndcg,ndcg_std,users,skipped\n";
  char buf[512];
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  name.c_str(), r.precision, r.precision_std, r.recall, r.recall_std, r.ndcg,
                  r.ndcg_std, r.users_evaluated, r.users_skipped);
    out += buf;
  }
  return out;
}

}  // namespace kgrl::eval
