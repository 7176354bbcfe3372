#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgrl/agent.hpp"
#include "kgrl/bench.hpp"
#include "kgrl/ddpg.hpp"
#include "kgrl/env.hpp"
#include "kgrl/error.hpp"
#include "kgrl/evaluate.hpp"

namespace kgrl {

namespace cfg_detail {

inline long long as_int(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (d == static_cast<long long>(d)) return static_cast<long long>(d);
  }
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    size_t pos = 0;
    try {
      long long out = std::stoll(s, &pos);
      if (pos == s.size()) return out;
    } catch (...) {
    }
  }
  throw ConfigError("config key " + key + ": expected an integer, got " + v.dump());
}

inline double as_double(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    size_t pos = 0;
    try {
      double out = std::stod(s, &pos);
      if (pos == s.size()) return out;
    } catch (...) {
    }
  }
  throw ConfigError("config key " + key + ": expected a number, got " + v.dump());
}

inline bool as_bool(const nlohmann::json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  if (v.is_number_integer()) {
    long long n = v.get<long long>();
    if (n == 0 || n == 1) return n == 1;
  }
  throw ConfigError("config key " + key + ": expected a boolean, got " + v.dump());
}

inline std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  throw ConfigError("config key " + key + ": expected a string, got " + v.dump());
}

inline std::vector<long long> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<long long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t a = tok.find_first_not_of(" \t");
    size_t b = tok.find_last_not_of(" \t");
    if (a == std::string::npos) throw ConfigError("config key " + key + ": empty list entry");
    tok = tok.substr(a, b - a + 1);
    size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &pos);
    } catch (...) {
      pos = 0;
    }
    if (pos != tok.size())
      throw ConfigError("config key " + key + ": bad integer '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("config key " + key + ": empty list");
  return out;
}

}  // namespace cfg_detail

inline agent::QMode q_mode_from_name(const std::string& s) {
  if (s == "learned") return agent::QMode::Learned;
  if (s == "formula") return agent::QMode::Formula;
  throw ConfigError("unknown q_mode: " + s);
}

inline kg::Normalization normalization_from_name(const std::string& s) {
  if (s == "softmax") return kg::Normalization::Softmax;
  if (s == "ratio") return kg::Normalization::Ratio;
  throw ConfigError("unknown normalization: " + s);
}

// Flat bag of every tunable the pipeline exposes. Loads from JSON or from
// key=value lines; unknown keys are rejected so typos fail loudly.
struct RunConfig {
  // artifact plumbing between subcommands
  std::string input_path;                // raw interaction log for ingest
  std::string triples_path;              // optional relation triples for ingest
  std::string dataset_path;              // saved dataset directory
  std::string sim_path;                  // saved simulator model
  std::string input_format = "ratings";  // ratings | triples
  int synth_users = 50;
  int synth_items = 200;
  int synth_relations = 4;
  double synth_density = 0.3;
  int min_interactions = 10;
  double relevance_threshold = 3.0;

  // simulator; factor count follows d so simulator, relation embeddings and
  // agent all live in one space
  int lmf_epochs = 200;
  double lmf_lr = 0.05;
  double lmf_reg = 1e-3;

  // environment
  int window = 5;
  double gamma = 0.99;
  int episode_steps = 10;
  double click_threshold = 0.5;
  double epsilon = 0.01;
  double r_max = 100.0;
  bool stochastic_feedback = false;
  std::string normalization = "softmax";  // softmax | ratio

  // agent
  int d = 16;
  int fc_hidden = 32;
  int critic_hidden = 32;
  int gcn_hidden = 16;
  std::string variant = "M";        // M | M-A | M-K
  std::string q_mode = "learned";   // learned | formula
  std::string embed_init = "lmf";   // lmf | random; lmf folds the item bias in, so the
                                    // simulator is fitted with d-1 factors

  // ddpg
  double tau = 0.01;
  int batch = 32;
  int buffer_capacity = 100000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double kg_lr = 1e-3;
  double noise_scale = 0.1;
  double noise_decay = 1.0;
  int lkg_every = 1;
  int episodes = 300;
  int checkpoint_every = 0;
  int probe_users = 5;

  // local knowledge network
  double depth_scale = 25.0;
  int max_depth = 4;
  double lkg_tolerance = 1e-4;
  int lkg_stable_window = 5;
  int lkg_max_iters = 20;

  // evaluation / ablation
  int eval_k = 10;
  std::string seeds = "1,2,3,4,5";
  int ablate_episodes = 50;
  int timing_repeats = 9;
  std::string checkpoint;

  // complexity benchmark
  int bench_degree = 4;
  int bench_center_items = 20;
  int bench_repeats = 30;
  int bench_levels = 5;
  std::string bench_items = "1000,10000";

  void set(const std::string& key, const nlohmann::json& v) {
    using namespace cfg_detail;
    if (key == "input_path") input_path = as_string(v, key);
    else if (key == "triples_path") triples_path = as_string(v, key);
    else if (key == "dataset_path") dataset_path = as_string(v, key);
    else if (key == "sim_path") sim_path = as_string(v, key);
    else if (key == "input_format") input_format = as_string(v, key);
    else if (key == "synth_users") synth_users = static_cast<int>(as_int(v, key));
    else if (key == "synth_items") synth_items = static_cast<int>(as_int(v, key));
    else if (key == "synth_relations") synth_relations = static_cast<int>(as_int(v, key));
    else if (key == "synth_density") synth_density = as_double(v, key);
    else if (key == "min_interactions") min_interactions = static_cast<int>(as_int(v, key));
    else if (key == "relevance_threshold") relevance_threshold = as_double(v, key);
    else if (key == "lmf_epochs") lmf_epochs = static_cast<int>(as_int(v, key));
    else if (key == "lmf_lr") lmf_lr = as_double(v, key);
    else if (key == "lmf_reg") lmf_reg = as_double(v, key);
    else if (key == "window") window = static_cast<int>(as_int(v, key));
    else if (key == "gamma") gamma = as_double(v, key);
    else if (key == "episode_steps") episode_steps = static_cast<int>(as_int(v, key));
    else if (key == "click_threshold") click_threshold = as_double(v, key);
    else if (key == "epsilon") epsilon = as_double(v, key);
    else if (key == "r_max") r_max = as_double(v, key);
    else if (key == "stochastic_feedback") stochastic_feedback = as_bool(v, key);
    else if (key == "normalization") normalization = as_string(v, key);
    else if (key == "d") d = static_cast<int>(as_int(v, key));
    else if (key == "fc_hidden") fc_hidden = static_cast<int>(as_int(v, key));
    else if (key == "critic_hidden") critic_hidden = static_cast<int>(as_int(v, key));
    else if (key == "gcn_hidden") gcn_hidden = static_cast<int>(as_int(v, key));
    else if (key == "variant") variant = as_string(v, key);
    else if (key == "q_mode") q_mode = as_string(v, key);
    else if (key == "embed_init") embed_init = as_string(v, key);
    else if (key == "tau") tau = as_double(v, key);
    else if (key == "batch") batch = static_cast<int>(as_int(v, key));
    else if (key == "buffer_capacity") buffer_capacity = static_cast<int>(as_int(v, key));
    else if (key == "actor_lr") actor_lr = as_double(v, key);
    else if (key == "critic_lr") critic_lr = as_double(v, key);
    else if (key == "kg_lr") kg_lr = as_double(v, key);
    else if (key == "noise_scale") noise_scale = as_double(v, key);
    else if (key == "noise_decay") noise_decay = as_double(v, key);
    else if (key == "lkg_every") lkg_every = static_cast<int>(as_int(v, key));
    else if (key == "episodes") episodes = static_cast<int>(as_int(v, key));
    else if (key == "checkpoint_every") checkpoint_every = static_cast<int>(as_int(v, key));
    else if (key == "probe_users") probe_users = static_cast<int>(as_int(v, key));
    else if (key == "depth_scale") depth_scale = as_double(v, key);
    else if (key == "max_depth") max_depth = static_cast<int>(as_int(v, key));
    else if (key == "lkg_tolerance") lkg_tolerance = as_double(v, key);
    else if (key == "lkg_stable_window") lkg_stable_window = static_cast<int>(as_int(v, key));
    else if (key == "lkg_max_iters") lkg_max_iters = static_cast<int>(as_int(v, key));
    else if (key == "eval_k") eval_k = static_cast<int>(as_int(v, key));
    else if (key == "seeds") seeds = as_string(v, key);
    else if (key == "ablate_episodes") ablate_episodes = static_cast<int>(as_int(v, key));
    else if (key == "timing_repeats") timing_repeats = static_cast<int>(as_int(v, key));
    else if (key == "checkpoint") checkpoint = as_string(v, key);
    else if (key == "bench_degree") bench_degree = static_cast<int>(as_int(v, key));
    else if (key == "bench_center_items") bench_center_items = static_cast<int>(as_int(v, key));
    else if (key == "bench_repeats") bench_repeats = static_cast<int>(as_int(v, key));
    else if (key == "bench_levels") bench_levels = static_cast<int>(as_int(v, key));
    else if (key == "bench_items") bench_items = as_string(v, key);
    else throw ConfigError("unknown config key: " + key);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["input_path"] = input_path;
    j["triples_path"] = triples_path;
    j["dataset_path"] = dataset_path;
    j["sim_path"] = sim_path;
    j["input_format"] = input_format;
    j["synth_users"] = synth_users;
    j["synth_items"] = synth_items;
    j["synth_relations"] = synth_relations;
    j["synth_density"] = synth_density;
    j["min_interactions"] = min_interactions;
    j["relevance_threshold"] = relevance_threshold;
    j["lmf_epochs"] = lmf_epochs;
    j["lmf_lr"] = lmf_lr;
    j["lmf_reg"] = lmf_reg;
    j["window"] = window;
    j["gamma"] = gamma;
    j["episode_steps"] = episode_steps;
    j["click_threshold"] = click_threshold;
    j["epsilon"] = epsilon;
    j["r_max"] = r_max;
    j["stochastic_feedback"] = stochastic_feedback;
    j["normalization"] = normalization;
    j["d"] = d;
    j["fc_hidden"] = fc_hidden;
    j["critic_hidden"] = critic_hidden;
    j["gcn_hidden"] = gcn_hidden;
    j["variant"] = variant;
    j["q_mode"] = q_mode;
    j["embed_init"] = embed_init;
    j["tau"] = tau;
    j["batch"] = batch;
    j["buffer_capacity"] = buffer_capacity;
    j["actor_lr"] = actor_lr;
    j["critic_lr"] = critic_lr;
    j["kg_lr"] = kg_lr;
    j["noise_scale"] = noise_scale;
    j["noise_decay"] = noise_decay;
    j["lkg_every"] = lkg_every;
    j["episodes"] = episodes;
    j["checkpoint_every"] = checkpoint_every;
    j["probe_users"] = probe_users;
    j["depth_scale"] = depth_scale;
    j["max_depth"] = max_depth;
    j["lkg_tolerance"] = lkg_tolerance;
    j["lkg_stable_window"] = lkg_stable_window;
    j["lkg_max_iters"] = lkg_max_iters;
    j["eval_k"] = eval_k;
    j["seeds"] = seeds;
    j["ablate_episodes"] = ablate_episodes;
    j["timing_repeats"] = timing_repeats;
    j["checkpoint"] = checkpoint;
    j["bench_degree"] = bench_degree;
    j["bench_center_items"] = bench_center_items;
    j["bench_repeats"] = bench_repeats;
    j["bench_levels"] = bench_levels;
    j["bench_items"] = bench_items;
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    RunConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) c.set(it.key(), it.value());
    return c;
  }

  // Accepts a JSON object or key=value lines ('#' starts a comment).
  static RunConfig from_text(const std::string& text) {
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config JSON parse failure: ") + e.what());
      }
      return from_json(j);
    }
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      size_t a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      size_t b = line.find_last_not_of(" \t\r");
      line = line.substr(a, b - a + 1);
      size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      std::string key = line.substr(0, eq);
      std::string val = line.substr(eq + 1);
      auto trim = [](std::string s) {
        size_t x = s.find_first_not_of(" \t");
        if (x == std::string::npos) return std::string();
        size_t y = s.find_last_not_of(" \t");
        return s.substr(x, y - x + 1);
      };
      c.set(trim(key), nlohmann::json(trim(val)));
    }
    return c;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
  }

  sim::LmfConfig lmf_config() const {
    sim::LmfConfig c;
    // with lmf embedding init the bias channel takes one dimension, so the
    // factor count drops by one to keep the full representation at d
    c.factors = embed_init == "lmf" ? d - 1 : d;
    c.epochs = lmf_epochs;
    c.lr = lmf_lr;
    c.reg = lmf_reg;
    return c;
  }

  sim::EnvConfig env_config(uint64_t seed) const {
    sim::EnvConfig c;
    c.window = window;
    c.gamma = gamma;
    c.episode_steps = episode_steps;
    c.click_threshold = click_threshold;
    c.epsilon = epsilon;
    c.r_max = r_max;
    c.stochastic_feedback = stochastic_feedback;
    c.normalization = normalization_from_name(normalization);
    c.seed = seed;
    return c;
  }

  agent::AgentConfig agent_config(int n_items) const {
    agent::AgentConfig c;
    c.n_items = n_items;
    c.d = d;
    c.window = window;
    c.fc_hidden = fc_hidden;
    c.critic_hidden = critic_hidden;
    c.gcn_hidden = gcn_hidden;
    c.variant = agent::variant_from_name(variant);
    c.q_mode = q_mode_from_name(q_mode);
    c.epsilon = epsilon;
    c.r_max = r_max;
    return c;
  }

  rl::DdpgConfig ddpg_config() const {
    rl::DdpgConfig c;
    c.gamma = gamma;
    c.tau = tau;
    c.batch = batch;
    c.buffer_capacity = buffer_capacity;
    c.actor_lr = actor_lr;
    c.critic_lr = critic_lr;
    c.kg_lr = kg_lr;
    c.noise_scale = noise_scale;
    c.noise_decay = noise_decay;
    c.lkg_every = lkg_every;
    c.lkg.depth_scale = depth_scale;
    c.lkg.max_depth = max_depth;
    c.lkg.tolerance = lkg_tolerance;
    c.lkg.stable_window = lkg_stable_window;
    c.lkg.max_iters = lkg_max_iters;
    c.eval_k = eval_k;
    c.probe_users = probe_users;
    c.checkpoint_every = checkpoint_every;
    return c;
  }

  bench::BenchConfig bench_config() const {
    bench::BenchConfig c;
    c.degree = bench_degree;
    c.center_items = bench_center_items;
    c.repeats = bench_repeats;
    c.levels = bench_levels;
    c.item_counts.clear();
    for (long long v : cfg_detail::parse_int_list(bench_items, "bench_items"))
      c.item_counts.push_back(static_cast<int>(v));
    return c;
  }

  std::vector<uint64_t> seed_list() const {
    std::vector<uint64_t> out;
    for (long long v : cfg_detail::parse_int_list(seeds, "seeds")) {
      if (v < 0) throw ConfigError("config key seeds: seeds must be >= 0");
      out.push_back(static_cast<uint64_t>(v));
    }
    return out;
  }

  eval::AblationConfig ablation_config(uint64_t base_seed) const {
    eval::AblationConfig c;
    c.d = d;
    c.window = window;
    c.fc_hidden = fc_hidden;
    c.critic_hidden = critic_hidden;
    c.gcn_hidden = gcn_hidden;
    c.env = env_config(base_seed);
    c.ddpg = ddpg_config();
    c.episodes = ablate_episodes;
    c.k = eval_k;
    c.seeds = seed_list();
    c.timing_repeats = timing_repeats;
    c.lmf_embed_init = embed_init == "lmf";
    return c;
  }

  void validate() const {
    if (input_format != "ratings" && input_format != "triples")
      throw ConfigError("unknown input_format: " + input_format);
    if (embed_init != "lmf" && embed_init != "random")
      throw ConfigError("unknown embed_init: " + embed_init);
    if (embed_init == "lmf" && d < 2)
      throw ConfigError("embed_init=lmf needs d >= 2 (one dimension holds the bias)");
    if (synth_users < 1 || synth_items < 2 || synth_relations < 1)
      throw ConfigError("synthetic data needs >= 1 user, >= 2 items, >= 1 relation");
    if (!(synth_density > 0.0 && synth_density <= 1.0))
      throw ConfigError("synth_density must be in (0,1]");
    if (min_interactions < 1) throw ConfigError("min_interactions must be >= 1");
    if (lmf_epochs < 1) throw ConfigError("lmf_epochs must be >= 1");
    if (!(lmf_lr > 0.0)) throw ConfigError("lmf_lr must be > 0");
    if (lmf_reg < 0.0) throw ConfigError("lmf_reg must be >= 0");
    if (ablate_episodes < 1) throw ConfigError("ablate_episodes must be >= 1");
    if (timing_repeats < 1) throw ConfigError("timing_repeats must be >= 1");
    if (episodes < 0) throw ConfigError("episodes must be >= 0");
    env_config(1).validate();
    agent_config(std::max(synth_items, 2)).validate();
    ddpg_config().validate();
    bench_config().validate();
    seed_list();
  }
};

}  // namespace kgrl
