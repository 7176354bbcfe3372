#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "kgrl/agent.hpp"
#include "kgrl/dataset.hpp"
#include "kgrl/ddpg.hpp"
#include "kgrl/env.hpp"
#include "kgrl/graph.hpp"
#include "kgrl/lkg.hpp"
#include "kgrl/lmf.hpp"
#include "kgrl/replay.hpp"
#include "oracles.hpp"

using namespace kgrl;
using agent::Agent;
using nn::Tensor2;
using rl::DdpgConfig;
using rl::DdpgTrainer;
using rl::LkgConfig;
using rl::LkgTrainer;
using rl::ReplayBuffer;
using rl::Transition;

namespace {

struct World {
  data::Dataset dataset;
  sim::LmfModel lmf;
  kg::KnowledgeGraph graph;
};

const World& world() {
  static World w = [] {
    data::Dataset d =
        data::split_dataset(data::preprocess(data::generate_synthetic(15, 30, 3, 0.5, 5)), 11);
    sim::LmfConfig lc;
    lc.factors = 4;
    lc.epochs = 60;
    lc.lr = 0.2;
    sim::LmfModel lmf = sim::fit_lmf(d, lc, 3);
    kg::KnowledgeGraph graph(d, 4, 7);
    return World{std::move(d), std::move(lmf), std::move(graph)};
  }();
  return w;
}

sim::EnvConfig env_cfg() {
  sim::EnvConfig cfg;
  cfg.window = 3;
  cfg.episode_steps = 5;
  return cfg;
}

agent::AgentConfig agent_cfg(agent::Variant v = agent::Variant::M) {
  agent::AgentConfig cfg;
  cfg.n_items = world().dataset.n_items;
  cfg.d = 4;
  cfg.window = 3;
  cfg.fc_hidden = 6;
  cfg.critic_hidden = 6;
  cfg.gcn_hidden = 3;
  cfg.variant = v;
  return cfg;
}

DdpgConfig small_ddpg() {
  DdpgConfig cfg;
  cfg.batch = 8;
  cfg.buffer_capacity = 64;
  cfg.probe_users = 2;
  cfg.lkg.max_iters = 3;
  return cfg;
}

struct Rig {
  sim::Environment env;
  Agent ag;
  DdpgTrainer trainer;
  Rig(const DdpgConfig& cfg, unsigned long long seed,
      agent::Variant variant = agent::Variant::M, sim::EnvConfig ec = env_cfg())
      : env(world().dataset, world().lmf, world().graph, ec),
        ag(agent_cfg(variant), seed),
        trainer(ag, env, cfg, seed + 1) {}
};

// transitions sampled from real episode resets so item windows are valid
std::vector<Transition> sample_transitions(sim::Environment& env, int n, double reward = 5.0) {
  std::vector<Transition> out;
  std::vector<int> users = env.eligible_users();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    int user = users[i % users.size()];
    Transition tr;
    tr.user = user;
    tr.items_before = env.reset(user).items;
    tr.items_after = tr.items_before;
    tr.action.resize(4);
    for (double& v : tr.action) v = u(rng);
    tr.reward = reward;
    tr.terminal = false;
    tr.target = env.current_target();
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<const Transition*> refs(const std::vector<Transition>& v) {
  std::vector<const Transition*> out;
  for (const Transition& t : v) out.push_back(&t);
  return out;
}

kg::UserSpecificGraph chain_graph(int n) {
  kg::UserSpecificGraph g(0, n);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> e;
    if (i > 0) e.push_back({i - 1, 0.5});
    if (i + 1 < n) e.push_back({i + 1, 0.5});
    g.set_edges(i, std::move(e));
  }
  return g;
}

bool stores_equal(const nn::ParamStore& a, const nn::ParamStore& b) {
  for (const auto& p : a.params())
    if (p.value.data != b.by_name(p.name).value.data) return false;
  return true;
}

}  // namespace

TEST(replay, fifo_eviction_drops_exactly_the_oldest) {
  ReplayBuffer buf(5, 1);
  for (int i = 0; i < 8; ++i) {
    Transition tr;
    tr.reward = i;
    buf.push(tr);
  }
  EXPECT_EQ(buf.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(buf.at(i).reward, 3.0 + i);
}

TEST(replay, sampling_is_without_replacement) {
  ReplayBuffer buf(100, 2);
  for (int i = 0; i < 50; ++i) {
    Transition tr;
    tr.reward = i;
    buf.push(tr);
  }
  auto batch = buf.sample(20);
  std::set<double> seen;
  for (const Transition* t : batch) seen.insert(t->reward);
  EXPECT_EQ(seen.size(), 20u);
}

TEST(replay, rejects_bad_requests) {
  EXPECT_THROW(ReplayBuffer(0, 1), kgrl::ConfigError);
  ReplayBuffer buf(10, 1);
  Transition tr;
  buf.push(tr);
  EXPECT_THROW(buf.sample(0), std::invalid_argument);
  EXPECT_THROW(buf.sample(2), std::logic_error);
}

TEST(replay, seeded_sampling_reproduces) {
  auto run = [] {
    ReplayBuffer buf(32, 7);
    for (int i = 0; i < 30; ++i) {
      Transition tr;
      tr.reward = i;
      buf.push(tr);
    }
    std::vector<double> ids;
    for (int round = 0; round < 3; ++round)
      for (const Transition* t : buf.sample(8)) ids.push_back(t->reward);
    return ids;
  };
  EXPECT_EQ(run(), run());
}

TEST(lkg_loss, maximum_entropy_prediction_costs_ln2_per_term) {
  std::vector<double> labels = {1, 0, 1, 0, 1, 0};
  std::vector<double> predicted(6, 0.5);
  EXPECT_DOUBLE_EQ(rl::lkg_loss(labels, predicted), 6.0 * std::log(2.0));
}

TEST(lkg_loss, perfect_predictions_clamp_to_a_tiny_loss) {
  std::vector<double> labels = {1, 1, 0, 0};
  std::vector<double> predicted = {1.0, 1.0, 0.0, 0.0};
  long long clamped = 0;
  double loss = rl::lkg_loss(labels, predicted, &clamped);
  EXPECT_LT(loss, 1e-5 * 4);
  EXPECT_EQ(clamped, 4);
}

TEST(lkg_loss, matches_a_per_term_oracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> labels, predicted;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(rng() % 2 ? 1.0 : 0.0);
    predicted.push_back(u(rng));
  }
  long double want = 0.0;
  for (int i = 0; i < 40; ++i)
    want -= labels[i] * std::log((long double)predicted[i]) +
            (1.0L - labels[i]) * std::log(1.0L - (long double)predicted[i]);
  EXPECT_NEAR(rl::lkg_loss(labels, predicted), (double)want, 1e-12);
}

TEST(lkg, depth_budget_follows_the_minimum_reward) {
  kg::UserSpecificGraph g = chain_graph(12);
  LkgConfig cfg;
  LkgTrainer t(&g, {5}, cfg);
  EXPECT_EQ(t.depth_budget(), 0);  // empty storage
  t.observe_reward(80.0);
  EXPECT_EQ(t.depth_budget(), 3);
  t.observe_reward(30.0);  // min drops
  EXPECT_EQ(t.depth_budget(), 1);
  t.observe_reward(990.0);  // min unchanged
  EXPECT_EQ(t.depth_budget(), 1);

  LkgTrainer capped(&g, {5}, cfg);
  capped.observe_reward(990.0);
  EXPECT_EQ(capped.depth_budget(), cfg.max_depth);
  LkgTrainer floor(&g, {5}, cfg);
  floor.observe_reward(10.0);
  EXPECT_EQ(floor.depth_budget(), 0);
}

TEST(lkg, zero_budget_trains_on_the_centers_only) {
  kg::UserSpecificGraph g = chain_graph(12);
  LkgConfig cfg;
  cfg.max_iters = 4;
  LkgTrainer t(&g, {5}, cfg);
  t.observe_reward(10.0);

  Agent ag(agent_cfg(), 3);
  Tensor2 before = ag.kg().by_name("g0").value;
  nn::Adam opt(1e-2);
  double loss = t.train(ag, {5}, {0.3, -0.2, 0.1, 0.4}, opt);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_EQ(t.subgraph().nodes(), (std::vector<int>{5}));
  EXPECT_NE(ag.kg().by_name("g0").value.data, before.data);
}

TEST(lkg, budget_two_grows_the_bfs_ball_of_radius_two) {
  kg::UserSpecificGraph g = chain_graph(12);
  LkgConfig cfg;
  cfg.max_iters = 6;
  LkgTrainer t(&g, {5}, cfg);
  t.observe_reward(60.0);  // budget 2

  Agent ag(agent_cfg(), 3);
  nn::Adam opt(1e-2);
  t.train(ag, {5, 6}, {0.3, -0.2, 0.1, 0.4}, opt);
  EXPECT_EQ(t.subgraph().nodes(), (std::vector<int>{3, 4, 5, 6, 7}));
  EXPECT_EQ(t.subgraph().depth(), 2);
}

TEST(lkg, loss_trace_is_nonincreasing_after_warmup) {
  kg::UserSpecificGraph g = chain_graph(12);
  LkgConfig cfg;
  cfg.max_iters = 40;
  LkgTrainer t(&g, {4, 5}, cfg);
  t.observe_reward(55.0);

  Agent ag(agent_cfg(), 9);
  nn::Adam opt(1e-2);
  t.train(ag, {4, 5, 6}, {0.3, -0.2, 0.1, 0.4}, opt);
  const auto& trace = t.loss_trace();
  ASSERT_GT(trace.size(), 6u);
  for (size_t i = 6; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-4) << i;
}

TEST(lkg, convergence_freezes_further_work) {
  kg::UserSpecificGraph g = chain_graph(12);
  LkgConfig cfg;
  cfg.max_iters = 200;
  cfg.tolerance = 1e-3;
  LkgTrainer t(&g, {5}, cfg);
  t.observe_reward(10.0);

  Agent ag(agent_cfg(), 3);
  nn::Adam opt(1e-2);
  t.train(ag, {5}, {0.3, -0.2, 0.1, 0.4}, opt);
  ASSERT_TRUE(t.converged());
  size_t settled = t.loss_trace().size();
  t.train(ag, {5}, {0.3, -0.2, 0.1, 0.4}, opt);
  EXPECT_EQ(t.loss_trace().size(), settled);
}

TEST(lkg, wrong_user_vector_dimension_is_a_config_error) {
  kg::UserSpecificGraph g = chain_graph(12);
  LkgTrainer t(&g, {5}, LkgConfig{});
  Agent ag(agent_cfg(), 3);
  nn::Adam opt(1e-2);
  EXPECT_THROW(t.train(ag, {5}, {0.3, -0.2}, opt), kgrl::ConfigError);
}

TEST(soft, tau_one_hard_copies_and_tau_half_averages) {
  nn::ParamStore online, target;
  online.add("w", 2, 2);
  target.add("w", 2, 2);
  online.by_name("w").value.fill(2.0);
  target.by_name("w").value.fill(0.0);

  rl::soft_update(online, target, 0.5);
  for (double v : target.by_name("w").value.data) EXPECT_DOUBLE_EQ(v, 1.0);

  target.by_name("w").value.fill(0.0);
  rl::soft_update(online, target, 1.0);
  for (double v : target.by_name("w").value.data) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(soft, gap_contracts_by_one_minus_tau_each_application) {
  nn::ParamStore online, target;
  online.add("w", 1, 1);
  target.add("w", 1, 1);
  online.by_name("w").value.at(0, 0) = 1.0;
  target.by_name("w").value.at(0, 0) = 0.0;
  const double tau = 0.1;
  double gap = 1.0;
  for (int k = 0; k < 10; ++k) {
    rl::soft_update(online, target, tau);
    double next_gap = 1.0 - target.by_name("w").value.at(0, 0);
    EXPECT_NEAR(next_gap / gap, 1.0 - tau, 1e-12);
    gap = next_gap;
  }
}

TEST(soft, tau_outside_unit_interval_is_an_error) {
  nn::ParamStore online, target;
  online.add("w", 1, 1);
  target.add("w", 1, 1);
  EXPECT_THROW(rl::soft_update(online, target, 0.0), kgrl::ConfigError);
  EXPECT_THROW(rl::soft_update(online, target, -0.2), kgrl::ConfigError);
  EXPECT_THROW(rl::soft_update(online, target, 1.5), kgrl::ConfigError);
}

TEST(critic, zero_networks_make_the_loss_the_squared_reward) {
  DdpgConfig cfg = small_ddpg();
  cfg.gamma = 0.0;
  Rig rig(cfg, 21);
  for (const char* name : {"w1", "b1", "w2", "b2"}) rig.ag.critic().by_name(name).value.fill(0.0);
  std::vector<Transition> batch = sample_transitions(rig.env, 6, 5.0);
  EXPECT_DOUBLE_EQ(rig.trainer.critic_loss(refs(batch)), 25.0);
}

TEST(critic, gamma_zero_is_pure_reward_regression) {
  DdpgConfig cfg = small_ddpg();
  cfg.gamma = 0.0;
  Rig rig(cfg, 22);
  std::vector<Transition> batch = sample_transitions(rig.env, 6, 3.0);

  double want = 0.0;
  for (const Transition& tr : batch) {
    agent::ActionVector a;
    a.value = tr.action;
    double q = rig.ag.critic_q(rig.ag.encode_state(tr.items_before), a,
                               rig.trainer.lkn_for(tr.user), tr.target);
    want += (q - tr.reward) * (q - tr.reward) / batch.size();
  }
  EXPECT_NEAR(rig.trainer.critic_loss(refs(batch)), want, 1e-10);
}

TEST(critic, batch_of_eight_matches_a_per_sample_oracle) {
  DdpgConfig cfg = small_ddpg();
  cfg.gamma = 0.9;
  Rig rig(cfg, 23);
  std::vector<Transition> batch = sample_transitions(rig.env, 8, 2.0);
  batch[3].terminal = true;
  batch[6].terminal = true;

  double want = 0.0;
  for (const Transition& tr : batch) {
    double xi = 0.0;
    if (!tr.terminal) {
      agent::ActionVector a2;
      a2.value = rig.ag.policy_with(rig.ag.actor_target(), tr.items_after).data;
      xi = rig.ag.critic_q_with(rig.ag.critic_target(),
                                rig.ag.encode_with(rig.ag.actor_target(), tr.items_after), a2,
                                rig.trainer.lkn_for(tr.user), tr.target);
    }
    agent::ActionVector a;
    a.value = tr.action;
    double q = rig.ag.critic_q(rig.ag.encode_state(tr.items_before), a,
                               rig.trainer.lkn_for(tr.user), tr.target);
    double err = q - (tr.reward + 0.9 * xi);
    want += err * err / batch.size();
  }
  EXPECT_NEAR(rig.trainer.critic_loss(refs(batch)), want, 1e-10);
}

TEST(critic, terminal_transitions_drop_the_bootstrap_term) {
  DdpgConfig cfg = small_ddpg();
  cfg.gamma = 1.0;
  Rig rig(cfg, 24);
  std::vector<Transition> batch = sample_transitions(rig.env, 1, 4.0);
  batch[0].terminal = true;

  agent::ActionVector a;
  a.value = batch[0].action;
  double q = rig.ag.critic_q(rig.ag.encode_state(batch[0].items_before), a,
                             rig.trainer.lkn_for(batch[0].user), batch[0].target);
  EXPECT_NEAR(rig.trainer.critic_loss(refs(batch)), (q - 4.0) * (q - 4.0), 1e-12);
}

TEST(critic, empty_batch_throws) {
  Rig rig(small_ddpg(), 25);
  EXPECT_THROW(rig.trainer.critic_loss({}), std::invalid_argument);
  EXPECT_THROW(rig.trainer.actor_update({}), std::invalid_argument);
}

TEST(critic, repeated_updates_reduce_the_loss_on_a_fixed_batch) {
  DdpgConfig cfg = small_ddpg();
  cfg.gamma = 0.0;
  Rig rig(cfg, 26);
  std::vector<Transition> batch = sample_transitions(rig.env, 8, 10.0);
  auto b = refs(batch);
  double before = rig.trainer.critic_loss(b);
  for (int i = 0; i < 30; ++i) rig.trainer.critic_update(b);
  EXPECT_LT(rig.trainer.critic_loss(b), before);
}

TEST(actor, constant_critic_in_a_leaves_the_actor_unchanged) {
  Rig rig(small_ddpg(), 27);
  // zero the action block of the first critic layer: rows d..2d-1
  nn::Tensor2& w1 = rig.ag.critic().by_name("w1").value;
  for (int r = 4; r < 8; ++r)
    for (int c = 0; c < w1.cols; ++c) w1.at(r, c) = 0.0;

  std::vector<Transition> batch = sample_transitions(rig.env, 4);
  std::vector<Tensor2> before;
  for (const auto& p : rig.ag.actor().params()) before.push_back(p.value);
  double norm = rig.trainer.actor_update(refs(batch));
  EXPECT_DOUBLE_EQ(norm, 0.0);
  size_t i = 0;
  for (const auto& p : rig.ag.actor().params()) EXPECT_EQ(p.value.data, before[i++].data);
}

TEST(actor, sampled_policy_gradient_matches_finite_differences) {
  Rig rig(small_ddpg(), 28);
  std::vector<Transition> batch = sample_transitions(rig.env, 3);
  auto b = refs(batch);

  // the critic state and graph inputs stay fixed; only the action path varies
  std::vector<Tensor2> s_rows, g_rows;
  for (const Transition& tr : batch) {
    s_rows.push_back(rig.ag.encode_state(tr.items_before));
    g_rows.push_back(rig.ag.gcn_summary(rig.trainer.lkn_for(tr.user)));
  }
  auto mean_q = [&] {
    double s = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      nn::Tape t(&rig.ag.critic());
      int an = t.constant(
          nn::Tensor2(1, 4, rig.ag.policy_with(rig.ag.actor(), batch[i].items_before).data));
      s += t.value(rig.ag.build_q(t, s_rows[i], an, g_rows[i])).at(0, 0);
    }
    return s / batch.size();
  };

  auto loss_fn = [&](nn::ParamStore&) {
    rig.trainer.actor_gradients(b);  // fills the actor grad slots
    return -mean_q();                // trainer stores the ascent direction negated
  };
  oracles::FdReport rep = oracles::check_gradients(rig.ag.actor(), loss_fn);
  EXPECT_GE(rep.checked, 20);
  EXPECT_LT(rep.max_rel_err, 1e-4);
}

TEST(actor, small_step_does_not_decrease_the_batch_q) {
  DdpgConfig cfg = small_ddpg();
  cfg.actor_lr = 1e-4;
  Rig rig(cfg, 29);
  std::vector<Transition> batch = sample_transitions(rig.env, 6);
  auto b = refs(batch);

  std::vector<Tensor2> s_rows, g_rows;
  for (const Transition& tr : batch) {
    s_rows.push_back(rig.ag.encode_state(tr.items_before));
    g_rows.push_back(rig.ag.gcn_summary(rig.trainer.lkn_for(tr.user)));
  }
  auto mean_q = [&] {
    double s = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      nn::Tape t(&rig.ag.critic());
      int an = t.constant(
          nn::Tensor2(1, 4, rig.ag.policy_with(rig.ag.actor(), batch[i].items_before).data));
      s += t.value(rig.ag.build_q(t, s_rows[i], an, g_rows[i])).at(0, 0);
    }
    return s / batch.size();
  };

  double before = mean_q();
  rig.trainer.actor_update(b);
  EXPECT_GE(mean_q(), before - 1e-12);
}

TEST(trainer, noise_sigma_follows_a_geometric_anneal) {
  DdpgConfig cfg;
  cfg.noise_scale = 0.5;
  cfg.noise_decay = 0.9;
  EXPECT_DOUBLE_EQ(rl::noise_sigma(cfg, 0), 0.5);
  EXPECT_DOUBLE_EQ(rl::noise_sigma(cfg, 3), 0.5 * 0.9 * 0.9 * 0.9);

  cfg.noise_decay = 1.0;  // default: constant exploration
  EXPECT_DOUBLE_EQ(rl::noise_sigma(cfg, 250), 0.5);
}

TEST(trainer, noise_decay_outside_the_unit_interval_is_rejected) {
  DdpgConfig cfg = small_ddpg();
  cfg.noise_decay = 0.0;
  EXPECT_THROW(cfg.validate(), kgrl::ConfigError);
  cfg.noise_decay = 1.2;
  EXPECT_THROW(cfg.validate(), kgrl::ConfigError);
  cfg.noise_decay = 1.0;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(trainer, rejects_mismatched_components) {
  DdpgConfig cfg = small_ddpg();
  sim::Environment env(world().dataset, world().lmf, world().graph, env_cfg());

  agent::AgentConfig wide = agent_cfg();
  wide.d = 8;  // simulator has 4 factors
  Agent mismatched(wide, 1);
  EXPECT_THROW(DdpgTrainer(mismatched, env, cfg, 1), kgrl::ConfigError);

  agent::AgentConfig wrong_items = agent_cfg();
  wrong_items.n_items = world().dataset.n_items + 5;
  Agent extra(wrong_items, 1);
  EXPECT_THROW(DdpgTrainer(extra, env, cfg, 1), kgrl::ConfigError);

  DdpgConfig bad = small_ddpg();
  bad.tau = 0.0;
  Agent ok(agent_cfg(), 1);
  EXPECT_THROW(DdpgTrainer(ok, env, bad, 1), kgrl::ConfigError);
}

TEST(train, zero_episodes_returns_an_empty_log_and_touches_nothing) {
  Rig rig(small_ddpg(), 31);
  std::vector<Tensor2> before;
  for (const auto& p : rig.ag.actor().params()) before.push_back(p.value);
  rl::TrainingLog log = rig.trainer.train(0);
  EXPECT_TRUE(log.steps.empty());
  EXPECT_TRUE(log.episodes.empty());
  size_t i = 0;
  for (const auto& p : rig.ag.actor().params()) EXPECT_EQ(p.value.data, before[i++].data);
}

TEST(train, fixed_seed_reproduces_logs_and_parameters) {
  auto run = [] {
    Rig rig(small_ddpg(), 33);
    rl::TrainingLog log = rig.trainer.train(4);
    return std::make_pair(log.steps_csv() + log.episodes_csv(),
                          rig.ag.actor().by_name("m").value.data);
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(train, warmup_steps_are_logged_but_do_not_update) {
  DdpgConfig cfg = small_ddpg();
  cfg.batch = 12;
  Rig rig(cfg, 35);
  rl::TrainingLog log = rig.trainer.train(4);
  ASSERT_FALSE(log.steps.empty());
  long long skips = 0;
  for (const rl::StepRow& r : log.steps) {
    EXPECT_EQ(r.updated, r.buffer_size >= 12u);
    if (!r.updated) {
      EXPECT_TRUE(std::isnan(r.critic_loss));
      EXPECT_TRUE(std::isnan(r.actor_grad_norm));
      ++skips;
    } else {
      EXPECT_TRUE(std::isfinite(r.critic_loss));
      EXPECT_TRUE(std::isfinite(r.actor_grad_norm));
    }
  }
  EXPECT_GT(skips, 0);
  EXPECT_EQ(skips, log.warmup_skips);
}

TEST(train, update_phases_run_in_algorithm_order) {
  Rig rig(small_ddpg(), 37);
  rl::TrainingLog log = rig.trainer.train(4);
  ASSERT_FALSE(log.phase_trace.empty());
  ASSERT_EQ(log.phase_trace.size() % 4, 0u);
  for (size_t i = 0; i < log.phase_trace.size(); i += 4) {
    EXPECT_EQ(log.phase_trace[i], "critic");
    EXPECT_EQ(log.phase_trace[i + 1], "lkg");
    EXPECT_EQ(log.phase_trace[i + 2], "actor");
    EXPECT_EQ(log.phase_trace[i + 3], "targets");
  }
}

TEST(train, lkg_every_amortizes_the_knowledge_hook) {
  DdpgConfig cfg = small_ddpg();
  cfg.lkg_every = 3;
  Rig rig(cfg, 39);
  rl::TrainingLog log = rig.trainer.train(5);
  long long updates = 0, hooks = 0;
  for (const rl::StepRow& r : log.steps) {
    if (r.updated) {
      ++updates;
      if (!std::isnan(r.lkg_loss)) ++hooks;
    }
  }
  ASSERT_GT(updates, 3);
  EXPECT_EQ(hooks, (updates + 2) / 3);
  long long traced = 0;
  for (const std::string& p : log.phase_trace)
    if (p == "lkg") ++traced;
  EXPECT_EQ(traced, hooks);
}

TEST(train, episode_rows_aggregate_their_step_rewards) {
  Rig rig(small_ddpg(), 41);
  rl::TrainingLog log = rig.trainer.train(3);
  ASSERT_EQ(log.episodes.size(), 3u);
  for (const rl::EpisodeRow& er : log.episodes) {
    double sum = 0.0;
    int n = 0;
    for (const rl::StepRow& sr : log.steps)
      if (sr.episode == er.episode) {
        sum += sr.reward;
        ++n;
      }
    ASSERT_GT(n, 0);
    EXPECT_NEAR(er.mean_reward, sum / n, 1e-12);
    if (!std::isnan(er.precision_at_k)) {
      EXPECT_GE(er.precision_at_k, 0.0);
      EXPECT_LE(er.precision_at_k, 1.0);
    }
  }
}

TEST(train, checkpoints_land_every_k_episodes) {
  DdpgConfig cfg = small_ddpg();
  cfg.checkpoint_every = 2;
  Rig rig(cfg, 43);
  std::string dir = testing::TempDir() + "ckpt_test";
  std::filesystem::create_directories(dir);
  rig.trainer.train(4, dir);
  EXPECT_TRUE(std::filesystem::exists(dir + "/checkpoint_ep2.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/checkpoint_ep4.bin"));

  Agent fresh(agent_cfg(), 77);
  fresh.load(dir + "/checkpoint_ep4.bin");
  EXPECT_TRUE(stores_equal(fresh.actor(), rig.ag.actor()));
  std::filesystem::remove_all(dir);
}

TEST(train, step_csv_has_the_pinned_column_header) {
  Rig rig(small_ddpg(), 45);
  rl::TrainingLog log = rig.trainer.train(1);
  EXPECT_EQ(log.steps_csv().substr(0, log.steps_csv().find('\n')),
            "episode,step,reward,critic_loss,lkg_loss,actor_grad_norm,buffer_size");
}

TEST(trainer, bias_channel_agent_trains_against_a_narrower_simulator) {
  // simulator has 4 factors; representation dimension 5 carries [factors | bias]
  kg::KnowledgeGraph wide(world().dataset, 5, 7);
  sim::Environment env(world().dataset, world().lmf, wide, env_cfg());

  agent::AgentConfig cfg = agent_cfg();
  cfg.d = 5;
  Agent ag(cfg, 21);
  ag.init_embeddings_from(sim::lmf_embedding(world().lmf));

  DdpgTrainer trainer(ag, env, small_ddpg(), 21);
  rl::TrainingLog log = trainer.train(2);
  EXPECT_EQ(log.episodes.size(), 2u);
  for (const rl::StepRow& s : log.steps) EXPECT_TRUE(std::isfinite(s.reward));
}
