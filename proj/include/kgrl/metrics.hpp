#pragma once

// Ranking metrics over a recommended list and a relevant-item set.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

namespace kgrl::eval {

inline int hits_in_top_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  int hits = 0;
  const int top = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int p = 0; p < top; ++p) hits += relevant.count(ranked[p]) ? 1 : 0;
  return hits;
}

inline double precision_at_k(const std::vector<int>& ranked, const std::set<int>& relevant,
                             int k) {
  return static_cast<double>(hits_in_top_k(ranked, relevant, k)) / static_cast<double>(k);
}

// users with no relevant items carry no recall signal; callers count the skips
inline std::optional<double> recall_at_k(const std::vector<int>& ranked,
                                         const std::set<int>& relevant, int k) {
  if (relevant.empty()) return std::nullopt;
  return static_cast<double>(hits_in_top_k(ranked, relevant, k)) /
         static_cast<double>(relevant.size());
}

// binary gains: DCG = sum over positions p (1-based) of rel_p / log2(p + 1)
inline double dcg_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  double dcg = 0.0;
  const int top = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int p = 0; p < top; ++p)
    if (relevant.count(ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg;
}

// ideal DCG places one relevant item at each of the first min(k, |relevant|) slots
inline std::optional<double> ndcg_at_k(const std::vector<int>& ranked,
                                       const std::set<int>& relevant, int k) {
  if (relevant.empty()) return std::nullopt;
  double idcg = 0.0;
  const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
  for (int p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg_at_k(ranked, relevant, k) / idcg;
}

}  // namespace kgrl::eval
