#pragma once

#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <json.hpp>

#include "kgrl/dataset.hpp"
#include "kgrl/error.hpp"
#include "kgrl/tensor.hpp"

namespace kgrl::sim {

// Click-probability model sigma(x_u . y_i + b_u + b_i) fitted to binary
// relevance labels.
struct LmfModel {
  nn::Tensor2 user_factors;
  nn::Tensor2 item_factors;
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  std::vector<double> training_curve;  // mean log-loss per epoch

  int factors() const { return user_factors.cols; }
  int n_users() const { return user_factors.rows; }
  int n_items() const { return item_factors.rows; }

  double score(int u, int i) const {
    double s = user_bias[u] + item_bias[i];
    for (int k = 0; k < user_factors.cols; ++k) s += user_factors.at(u, k) * item_factors.at(i, k);
    return s;
  }
  double predict(int u, int i) const { return 1.0 / (1.0 + std::exp(-score(u, i))); }

  std::vector<double> user_vector(int u) const {
    std::vector<double> v(user_factors.cols);
    for (int k = 0; k < user_factors.cols; ++k) v[k] = user_factors.at(u, k);
    return v;
  }
};

struct LmfConfig {
  int factors = 16;
  int epochs = 200;
  double lr = 0.05;
  double reg = 1e-3;
};

// Full-batch gradient ascent on the regularized logistic likelihood of the
// train split's relevance flags. Gradients are averaged over interactions so
// the learning rate is insensitive to dataset size; biases stay unregularized.
inline LmfModel fit_lmf(const data::Dataset& d, const LmfConfig& cfg, uint64_t seed) {
  if (cfg.factors < 1) throw ConfigError("fit_lmf: factors must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("fit_lmf: epochs must be >= 1");

  std::vector<int> train;
  for (int i = 0; i < static_cast<int>(d.interactions.size()); ++i)
    if (d.interactions[i].split == data::Split::Train) train.push_back(i);
  if (train.empty()) throw DataError("fit_lmf: train split is empty");

  std::mt19937_64 rng(seed);
  double bound = 1.0 / std::sqrt(static_cast<double>(cfg.factors));
  LmfModel m;
  m.user_factors = nn::uniform_tensor(d.n_users, cfg.factors, bound, rng);
  m.item_factors = nn::uniform_tensor(d.n_items, cfg.factors, bound, rng);
  m.user_bias.assign(d.n_users, 0.0);
  m.item_bias.assign(d.n_items, 0.0);

  nn::Tensor2 gu(d.n_users, cfg.factors), gi(d.n_items, cfg.factors);
  std::vector<double> gbu(d.n_users), gbi(d.n_items);

  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    gu.fill(0.0);
    gi.fill(0.0);
    std::fill(gbu.begin(), gbu.end(), 0.0);
    std::fill(gbi.begin(), gbi.end(), 0.0);

    double loss = 0.0;
    for (int idx : train) {
      const auto& it = d.interactions[idx];
      double s = m.score(it.user, it.item);
      double y = it.relevant ? 1.0 : 0.0;
      // softplus(s) - y*s, evaluated without overflow
      loss += std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0) - y * s;
      double g = y - 1.0 / (1.0 + std::exp(-s));
      for (int k = 0; k < cfg.factors; ++k) {
        gu.at(it.user, k) += g * m.item_factors.at(it.item, k);
        gi.at(it.item, k) += g * m.user_factors.at(it.user, k);
      }
      gbu[it.user] += g;
      gbi[it.item] += g;
    }
    loss *= inv_n;
    if (!std::isfinite(loss))
      throw DataError("fit_lmf: training diverged; reduce the learning rate");

    for (int u = 0; u < d.n_users; ++u) {
      for (int k = 0; k < cfg.factors; ++k)
        m.user_factors.at(u, k) +=
            cfg.lr * (gu.at(u, k) * inv_n - cfg.reg * m.user_factors.at(u, k));
      m.user_bias[u] += cfg.lr * gbu[u] * inv_n;
    }
    for (int i = 0; i < d.n_items; ++i) {
      for (int k = 0; k < cfg.factors; ++k)
        m.item_factors.at(i, k) +=
            cfg.lr * (gi.at(i, k) * inv_n - cfg.reg * m.item_factors.at(i, k));
      m.item_bias[i] += cfg.lr * gbi[i] * inv_n;
    }
    if (!m.user_factors.all_finite() || !m.item_factors.all_finite())
      throw DataError("fit_lmf: training diverged; reduce the learning rate");
    m.training_curve.push_back(loss);
  }
  return m;
}

// JSON persistence; nlohmann round-trips doubles exactly, so a saved model
// reloads bit-identical.
inline void save_lmf(const std::string& path, const LmfModel& m) {
  nlohmann::json j;
  j["factors"] = m.factors();
  j["user_factors"] = m.user_factors.data;
  j["item_factors"] = m.item_factors.data;
  j["n_users"] = m.n_users();
  j["n_items"] = m.n_items();
  j["user_bias"] = m.user_bias;
  j["item_bias"] = m.item_bias;
  j["training_curve"] = m.training_curve;
  std::ofstream os(path);
  if (!os) throw DataError("save_lmf: cannot open " + path);
  os << j.dump(2) << "\n";
}

inline LmfModel load_lmf(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("load_lmf: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_lmf: " + path + ": " + e.what());
  }
  LmfModel m;
  try {
    int factors = j.at("factors").get<int>();
    int n_users = j.at("n_users").get<int>();
    int n_items = j.at("n_items").get<int>();
    m.user_factors = nn::Tensor2(n_users, factors, j.at("user_factors").get<std::vector<double>>());
    m.item_factors = nn::Tensor2(n_items, factors, j.at("item_factors").get<std::vector<double>>());
    m.user_bias = j.at("user_bias").get<std::vector<double>>();
    m.item_bias = j.at("item_bias").get<std::vector<double>>();
    m.training_curve = j.at("training_curve").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_lmf: " + path + ": " + e.what());
  }
  if (static_cast<int>(m.user_bias.size()) != m.n_users() ||
      static_cast<int>(m.item_bias.size()) != m.n_items())
    throw DataError("load_lmf: " + path + ": bias sizes disagree with factor shapes");
  return m;
}

// Item representation [factors | bias]: folding the bias in as one more
// dimension lets an inner product against [user factors | 1] reproduce the
// model's full per-item score.
inline nn::Tensor2 lmf_embedding(const LmfModel& m) {
  nn::Tensor2 out(m.n_items(), m.factors() + 1, 0.0);
  for (int i = 0; i < m.n_items(); ++i) {
    for (int k = 0; k < m.factors(); ++k) out.at(i, k) = m.item_factors.at(i, k);
    out.at(i, m.factors()) = m.item_bias[i];
  }
  return out;
}

}  // namespace kgrl::sim
