#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgrl/bench.hpp"
#include "kgrl/config.hpp"
#include "kgrl/ddpg.hpp"
#include "kgrl/env.hpp"
#include "kgrl/evaluate.hpp"
#include "kgrl/lmf.hpp"

namespace {

namespace fs = std::filesystem;
using kgrl::RunConfig;

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 1;
  std::string out = ".";
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "config file, JSON or key=value lines");
  sub->add_option("--seed", args.seed, "run seed")->default_val(1);
  sub->add_option("--out", args.out, "output directory")->default_val(".");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig() : RunConfig::from_file(args.config_path);
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw kgrl::DataError("cannot write " + path.string());
  os << content;
}

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[256];
  std::string out;
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

std::string iso_now() {
  std::time_t t = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const std::string& command, const CommonArgs& args, const RunConfig& cfg,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = args.seed;
  j["out"] = args.out;
  j["config"] = cfg.to_json();
  j["git"] = git_describe();
  j["created"] = iso_now();
  j["outputs"] = outputs;
  write_file(fs::path(args.out) / "manifest.json", j.dump(2) + "\n");
}

kgrl::data::Dataset dataset_for(const RunConfig& cfg, uint64_t seed) {
  if (cfg.dataset_path.empty())
    throw kgrl::ConfigError("this subcommand needs dataset_path in the config");
  (void)seed;
  return kgrl::data::load_dataset_dir(cfg.dataset_path);
}

kgrl::sim::LmfModel simulator_for(const RunConfig& cfg, const kgrl::data::Dataset& d,
                                  uint64_t seed) {
  if (!cfg.sim_path.empty()) {
    kgrl::sim::LmfModel m = kgrl::sim::load_lmf(cfg.sim_path);
    if (m.n_users() != d.n_users || m.n_items() != d.n_items ||
        m.factors() != cfg.lmf_config().factors)
      throw kgrl::ConfigError("simulator at " + cfg.sim_path +
                              " does not match the dataset shape or d");
    return m;
  }
  return kgrl::sim::fit_lmf(d, cfg.lmf_config(), seed);
}

int cmd_ingest(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.input_path.empty()) throw kgrl::ConfigError("ingest needs input_path in the config");
  kgrl::data::FileFormat fmt = cfg.input_format == "ratings"
                                   ? kgrl::data::FileFormat::TabularRatings
                                   : kgrl::data::FileFormat::TripleList;
  kgrl::data::Dataset d = kgrl::data::load_dataset(cfg.input_path, fmt);
  if (!cfg.triples_path.empty()) kgrl::data::attach_triples(d, cfg.triples_path);
  d = kgrl::data::split_dataset(
      kgrl::data::preprocess(std::move(d), cfg.min_interactions, cfg.relevance_threshold),
      args.seed);
  fs::create_directories(fs::path(args.out) / "dataset");
  kgrl::data::save_dataset((fs::path(args.out) / "dataset").string(), d);
  write_manifest("ingest", args, cfg, {"dataset"});
  std::printf("ingested %zu interactions, %d users, %d items\n", d.interactions.size(),
              d.n_users, d.n_items);
  return 0;
}

int cmd_synth(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  kgrl::data::Dataset d = kgrl::data::generate_synthetic(
      cfg.synth_users, cfg.synth_items, cfg.synth_relations, cfg.synth_density, args.seed);
  d = kgrl::data::split_dataset(
      kgrl::data::preprocess(std::move(d), cfg.min_interactions, cfg.relevance_threshold),
      args.seed);
  fs::create_directories(fs::path(args.out) / "dataset");
  kgrl::data::save_dataset((fs::path(args.out) / "dataset").string(), d);
  write_manifest("synth", args, cfg, {"dataset"});
  std::printf("synthesized %zu interactions, %d users, %d items, %zu triples\n",
              d.interactions.size(), d.n_users, d.n_items, d.triples.size());
  return 0;
}

int cmd_fit_sim(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  kgrl::data::Dataset d = dataset_for(cfg, args.seed);
  kgrl::sim::LmfModel m = kgrl::sim::fit_lmf(d, cfg.lmf_config(), args.seed);
  kgrl::sim::save_lmf((fs::path(args.out) / "simulator.json").string(), m);

  std::string curve = "epoch,log_loss\n";
  char buf[64];
  for (size_t e = 0; e < m.training_curve.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, m.training_curve[e]);
    curve += buf;
  }
  write_file(fs::path(args.out) / "fit_curve.csv", curve);
  write_manifest("fit-sim", args, cfg, {"simulator.json", "fit_curve.csv"});
  std::printf("fitted simulator: %d factors, final log-loss %.6f\n", m.factors(),
              m.training_curve.back());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  kgrl::data::Dataset d = dataset_for(cfg, args.seed);
  kgrl::sim::LmfModel m = simulator_for(cfg, d, args.seed);
  kgrl::kg::KnowledgeGraph graph(d, cfg.d, args.seed);
  kgrl::sim::Environment env(d, m, graph, cfg.env_config(args.seed));

  kgrl::agent::Agent ag(cfg.agent_config(d.n_items), args.seed);
  if (cfg.embed_init == "lmf") ag.init_embeddings_from(kgrl::sim::lmf_embedding(m));
  kgrl::rl::DdpgTrainer trainer(ag, env, cfg.ddpg_config(), args.seed);
  kgrl::rl::TrainingLog log = trainer.train(cfg.episodes, args.out);

  write_file(fs::path(args.out) / "training_steps.csv", log.steps_csv());
  write_file(fs::path(args.out) / "training_episodes.csv", log.episodes_csv());
  ag.save((fs::path(args.out) / "checkpoint.bin").string());
  write_manifest("train", args, cfg,
                 {"training_steps.csv", "training_episodes.csv", "checkpoint.bin"});

  double mean_reward = 0.0;
  for (const kgrl::rl::EpisodeRow& r : log.episodes) mean_reward += r.mean_reward;
  if (!log.episodes.empty()) mean_reward /= log.episodes.size();
  std::printf("trained %d episodes, mean episode reward %.4f, warmup skips %lld\n",
              cfg.episodes, mean_reward, log.warmup_skips);
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.checkpoint.empty())
    throw kgrl::ConfigError("evaluate needs checkpoint in the config");
  kgrl::data::Dataset d = dataset_for(cfg, args.seed);
  kgrl::sim::LmfModel m = simulator_for(cfg, d, args.seed);
  kgrl::kg::KnowledgeGraph graph(d, cfg.d, args.seed);
  kgrl::sim::Environment env(d, m, graph, cfg.env_config(args.seed));

  kgrl::agent::Agent ag(cfg.agent_config(d.n_items), args.seed);
  ag.load(cfg.checkpoint);

  std::vector<std::pair<std::string, kgrl::eval::MetricReport>> rows;
  rows.push_back({"agent", kgrl::eval::evaluate_agent(ag, env, cfg.eval_k)});
  rows.push_back({"random", kgrl::eval::evaluate_random(env, cfg.eval_k, args.seed)});
  rows.push_back({"oracle", kgrl::eval::evaluate_oracle(env, cfg.eval_k)});
  write_file(fs::path(args.out) / "metrics.csv", kgrl::eval::metrics_csv(rows));
  write_manifest("evaluate", args, cfg, {"metrics.csv"});
  std::printf("agent precision@%d %.4f (random %.4f, oracle %.4f) over %d users\n", cfg.eval_k,
              rows[0].second.precision, rows[1].second.precision, rows[2].second.precision,
              rows[0].second.users_evaluated);
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  kgrl::data::Dataset d = dataset_for(cfg, args.seed);
  kgrl::sim::LmfModel m = simulator_for(cfg, d, args.seed);
  kgrl::kg::KnowledgeGraph graph(d, cfg.d, args.seed);

  std::vector<kgrl::eval::VariantReport> rows =
      kgrl::eval::run_ablation(d, m, graph, cfg.ablation_config(args.seed));
  write_file(fs::path(args.out) / "ablation.csv", kgrl::eval::ablation_csv(rows));
  write_manifest("ablate", args, cfg, {"ablation.csv"});
  for (const kgrl::eval::VariantReport& r : rows)
    std::printf("%-4s ndcg %.4f +- %.4f, critic step %.4f ms\n", r.variant.c_str(), r.ndcg_mean,
                r.ndcg_std, r.critic_step_median_ms);
  return 0;
}

int cmd_bench(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  std::vector<kgrl::bench::BenchRecord> recs =
      kgrl::bench::bench_search(cfg.bench_config(), args.seed);
  write_file(fs::path(args.out) / "bench.csv", kgrl::bench::bench_csv(recs));
  write_manifest("bench", args, cfg, {"bench.csv"});
  std::printf("benchmarked %zu records across %zu graph sizes\n", recs.size(),
              cfg.bench_config().item_counts.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-graph-guided interactive recommender"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string command;
  for (const char* name : {"ingest", "synth", "fit-sim", "train", "evaluate", "ablate", "bench"}) {
    CLI::App* sub = app.add_subcommand(name, "");
    add_common(sub, args);
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::filesystem::create_directories(args.out);
    if (command == "ingest") return cmd_ingest(args);
    if (command == "synth") return cmd_synth(args);
    if (command == "fit-sim") return cmd_fit_sim(args);
    if (command == "train") return cmd_train(args);
    if (command == "evaluate") return cmd_evaluate(args);
    if (command == "ablate") return cmd_ablate(args);
    if (command == "bench") return cmd_bench(args);
    std::cerr << "unknown subcommand\n";
    return 2;
  } catch (const kgrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kgrl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
