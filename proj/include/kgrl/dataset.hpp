#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgrl/error.hpp"

namespace kgrl::data {

enum class Split { Train, Validation, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  throw std::logic_error("split_name: bad enum");
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw DataError("unknown split label: " + s);
}

struct Interaction {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  long long timestamp = 0;
  bool relevant = false;
  Split split = Split::Train;
};

struct RelationTriple {
  int head = 0;
  int relation = 0;
  int tail = 0;
};

// Indices are contiguous and 0-based; *_ids map an index back to the original
// id from the source file. Entities 0..n_items-1 are the items themselves.
struct Dataset {
  std::vector<Interaction> interactions;
  std::vector<RelationTriple> triples;
  int n_users = 0;
  int n_items = 0;
  int n_relations = 0;
  int n_entities = 0;
  std::vector<long long> user_ids;
  std::vector<long long> item_ids;
  std::vector<long long> entity_ids;
  bool preprocessed = false;
  double relevance_threshold = 3.0;
  long long split_seed = -1;
};

enum class FileFormat { TabularRatings, TripleList };

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline long long parse_int(const std::string& raw, const std::string& where) {
  std::string s = strip(raw);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError(where + ": not an integer: '" + raw + "'");
  return v;
}

inline double parse_double(const std::string& raw, const std::string& where) {
  std::string s = strip(raw);
  if (s.empty()) throw DataError(where + ": empty numeric field");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    throw DataError(where + ": not a finite number: '" + raw + "'");
  return v;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline int intern(std::map<long long, int>& index, std::vector<long long>& ids, long long orig) {
  auto it = index.find(orig);
  if (it != index.end()) return it->second;
  int id = static_cast<int>(ids.size());
  index.emplace(orig, id);
  ids.push_back(orig);
  return id;
}

}  // namespace detail

// Tabular ratings: `user,item,rating,timestamp` per line; a first line whose
// first non-space character is not a digit is treated as a header and skipped.
// Triple list: `head,relation,tail` per line with the same header rule.
inline Dataset load_dataset(const std::string& path, FileFormat format) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);

  Dataset d;
  std::map<long long, int> user_index, item_index, entity_index, relation_index;
  std::vector<long long> relation_ids;

  std::string line;
  int line_no = 0;
  int records = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string trimmed = detail::strip(line);
    if (trimmed.empty()) continue;
    if (line_no == 1 && !std::isdigit(static_cast<unsigned char>(trimmed[0])) &&
        trimmed[0] != '-')
      continue;
    std::string where = path + ":" + std::to_string(line_no);
    auto fields = detail::split_fields(trimmed);
    if (format == FileFormat::TabularRatings) {
      if (fields.size() != 4) throw DataError(where + ": expected 4 fields, got " +
                                              std::to_string(fields.size()));
      Interaction it;
      it.user = detail::intern(user_index, d.user_ids, detail::parse_int(fields[0], where));
      it.item = detail::intern(item_index, d.item_ids, detail::parse_int(fields[1], where));
      it.rating = detail::parse_double(fields[2], where);
      it.timestamp = detail::parse_int(fields[3], where);
      d.interactions.push_back(it);
    } else {
      if (fields.size() != 3) throw DataError(where + ": expected 3 fields, got " +
                                              std::to_string(fields.size()));
      RelationTriple t;
      t.head = detail::intern(entity_index, d.entity_ids, detail::parse_int(fields[0], where));
      t.relation = detail::intern(relation_index, relation_ids, detail::parse_int(fields[1], where));
      t.tail = detail::intern(entity_index, d.entity_ids, detail::parse_int(fields[2], where));
      if (t.head == t.tail) throw DataError(where + ": self-loop triple");
      d.triples.push_back(t);
    }
    ++records;
  }
  if (records == 0) throw DataError("no records in " + path);

  d.n_users = static_cast<int>(d.user_ids.size());
  d.n_items = static_cast<int>(d.item_ids.size());
  d.n_relations = static_cast<int>(relation_ids.size());
  if (format == FileFormat::TabularRatings) {
    d.entity_ids = d.item_ids;
    d.n_entities = d.n_items;
  } else {
    d.n_entities = static_cast<int>(d.entity_ids.size());
  }
  return d;
}

// Adds `head,relation,tail` triples to a ratings dataset. Heads/tails whose
// original id matches an item id resolve to that item; anything else becomes a
// fresh entity index past the item range.
inline void attach_triples(Dataset& d, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);

  std::map<long long, int> entity_index;
  for (int i = 0; i < static_cast<int>(d.entity_ids.size()); ++i)
    entity_index.emplace(d.entity_ids[i], i);
  std::map<long long, int> relation_index;
  std::vector<long long> relation_ids;

  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string trimmed = detail::strip(line);
    if (trimmed.empty()) continue;
    if (line_no == 1 && !std::isdigit(static_cast<unsigned char>(trimmed[0])) &&
        trimmed[0] != '-')
      continue;
    std::string where = path + ":" + std::to_string(line_no);
    auto fields = detail::split_fields(trimmed);
    if (fields.size() != 3)
      throw DataError(where + ": expected 3 fields, got " + std::to_string(fields.size()));
    RelationTriple t;
    t.head = detail::intern(entity_index, d.entity_ids, detail::parse_int(fields[0], where));
    t.relation = detail::intern(relation_index, relation_ids, detail::parse_int(fields[1], where));
    t.tail = detail::intern(entity_index, d.entity_ids, detail::parse_int(fields[2], where));
    if (t.head == t.tail) throw DataError(where + ": self-loop triple");
    d.triples.push_back(t);
  }
  d.n_entities = static_cast<int>(d.entity_ids.size());
  d.n_relations = std::max(d.n_relations, static_cast<int>(relation_ids.size()));
}

// Scales ratings to [0,5] (min-max over the whole dataset), drops users with
// fewer than min_interactions records in a single pass, re-indexes the kept
// users, and sets relevance = rating > threshold.
inline Dataset preprocess(Dataset d, int min_interactions = 10,
                          double relevance_threshold = 3.0) {
  if (d.interactions.empty()) throw DataError("empty dataset after filtering");

  double lo = d.interactions[0].rating, hi = lo;
  for (const auto& it : d.interactions) {
    lo = std::min(lo, it.rating);
    hi = std::max(hi, it.rating);
  }
  for (auto& it : d.interactions)
    it.rating = hi > lo ? 5.0 * (it.rating - lo) / (hi - lo) : 2.5;

  std::vector<int> counts(d.n_users, 0);
  for (const auto& it : d.interactions) ++counts[it.user];

  std::vector<int> remap(d.n_users, -1);
  std::vector<long long> kept_ids;
  for (int u = 0; u < d.n_users; ++u)
    if (counts[u] >= min_interactions) {
      remap[u] = static_cast<int>(kept_ids.size());
      kept_ids.push_back(d.user_ids[u]);
    }
  if (kept_ids.empty()) throw DataError("empty dataset after filtering");

  std::vector<Interaction> kept;
  kept.reserve(d.interactions.size());
  for (auto it : d.interactions)
    if (remap[it.user] >= 0) {
      it.user = remap[it.user];
      it.relevant = it.rating > relevance_threshold;
      kept.push_back(it);
    }

  d.interactions = std::move(kept);
  d.user_ids = std::move(kept_ids);
  d.n_users = static_cast<int>(d.user_ids.size());
  d.preprocessed = true;
  d.relevance_threshold = relevance_threshold;
  return d;
}

// Per-user 70/10/20 assignment by largest-remainder quotas over a seeded
// shuffle, so each user's bucket sizes are within one interaction of the exact
// shares and every user keeps at least one training record. Users with fewer
// than 3 interactions go entirely to train.
inline Dataset split_dataset(Dataset d, uint64_t seed) {
  std::vector<std::vector<int>> by_user(d.n_users);
  for (int i = 0; i < static_cast<int>(d.interactions.size()); ++i)
    by_user[d.interactions[i].user].push_back(i);

  std::mt19937_64 rng(seed);
  for (int u = 0; u < d.n_users; ++u) {
    auto& idxs = by_user[u];
    int n = static_cast<int>(idxs.size());
    if (n == 0) continue;
    if (n < 3) {
      for (int i : idxs) d.interactions[i].split = Split::Train;
      continue;
    }
    std::shuffle(idxs.begin(), idxs.end(), rng);
    // integer largest remainder over shares 7/10, 1/10, 2/10
    const int numer[3] = {7, 1, 2};
    int take[3], rem[3];
    int assigned = 0;
    for (int b = 0; b < 3; ++b) {
      take[b] = numer[b] * n / 10;
      rem[b] = numer[b] * n % 10;
      assigned += take[b];
    }
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int a, int b) {
      if (rem[a] != rem[b]) return rem[a] > rem[b];
      return a < b;
    });
    for (int k = 0; k < n - assigned; ++k) ++take[order[k]];
    if (take[0] == 0) {
      int donor = take[2] >= take[1] ? 2 : 1;
      --take[donor];
      ++take[0];
    }
    int pos = 0;
    for (int b = 0; b < 3; ++b)
      for (int k = 0; k < take[b]; ++k)
        d.interactions[idxs[pos++]].split = static_cast<Split>(b);
  }
  d.split_seed = static_cast<long long>(seed);
  return d;
}

// Planted rank-8 generator: ratings follow a low-rank factor model plus noise,
// triples connect each item to its two nearest planted neighbours plus a 20%
// dose of uniform noise edges. Everything derives from the one seed.
inline Dataset generate_synthetic(int n_users, int n_items, int n_relations, double density,
                                  uint64_t seed) {
  if (n_users < 1 || n_items < 2 || n_relations < 1)
    throw ConfigError("generate_synthetic: need at least 1 user, 2 items, 1 relation");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must be in (0,1]");

  const int rank = 8;
  const int min_per_user = 10;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);

  std::vector<std::vector<double>> ufac(n_users, std::vector<double>(rank));
  std::vector<std::vector<double>> ifac(n_items, std::vector<double>(rank));
  for (auto& row : ufac)
    for (double& v : row) v = uni(rng);
  for (auto& row : ifac)
    for (double& v : row) v = uni(rng);
  // per-item popularity so items have a global quality axis on top of the
  // personalized factor term
  std::vector<double> ibias(n_items);
  for (double& v : ibias) v = 1.5 * uni(rng);

  Dataset d;
  d.n_users = n_users;
  d.n_items = n_items;
  d.n_relations = n_relations;
  d.n_entities = n_items;
  for (int u = 0; u < n_users; ++u) d.user_ids.push_back(u);
  for (int i = 0; i < n_items; ++i) d.item_ids.push_back(i);
  d.entity_ids = d.item_ids;

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int u = 0; u < n_users; ++u) {
    std::vector<int> chosen;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      chosen.clear();
      for (int i = 0; i < n_items; ++i)
        if (coin(rng) < density) chosen.push_back(i);
      if (static_cast<int>(chosen.size()) >= min_per_user) break;
    }
    if (static_cast<int>(chosen.size()) < min_per_user)
      throw DataError("generate_synthetic: density too low to reach 10 interactions per user");
    std::shuffle(chosen.begin(), chosen.end(), rng);
    for (int pos = 0; pos < static_cast<int>(chosen.size()); ++pos) {
      Interaction it;
      it.user = u;
      it.item = chosen[pos];
      double score = ibias[chosen[pos]];
      for (int k = 0; k < rank; ++k) score += ufac[u][k] * ifac[chosen[pos]][k];
      it.rating = score + noise(rng);
      it.timestamp = pos;
      d.interactions.push_back(it);
    }
  }

  // similarity edges: top-2 planted neighbours per item
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n_items; ++i) {
    std::vector<std::pair<double, int>> scored;
    for (int j = 0; j < n_items; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (int k = 0; k < rank; ++k) s += ifac[i][k] * ifac[j][k];
      scored.push_back({s, j});
    }
    std::partial_sort(scored.begin(), scored.begin() + 2, scored.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (int k = 0; k < 2; ++k) pairs.push_back({i, scored[k].second});
  }
  int n_noise = static_cast<int>(std::lround(0.2 * n_items));
  std::uniform_int_distribution<int> pick(0, n_items - 1);
  for (int k = 0; k < n_noise; ++k) {
    int a = pick(rng), b = pick(rng);
    if (a != b) pairs.push_back({a, b});
  }
  std::vector<std::pair<int, int>> dedup;
  for (auto [a, b] : pairs) dedup.push_back({std::min(a, b), std::max(a, b)});
  std::sort(dedup.begin(), dedup.end());
  dedup.erase(std::unique(dedup.begin(), dedup.end()), dedup.end());
  std::uniform_int_distribution<int> rel(0, n_relations - 1);
  for (auto [a, b] : dedup) d.triples.push_back({a, rel(rng), b});
  return d;
}

inline void save_dataset(const std::string& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);

  std::ofstream ic(dir + "/interactions.csv");
  if (!ic) throw DataError("cannot write " + dir + "/interactions.csv");
  for (const auto& it : d.interactions)
    ic << d.user_ids[it.user] << "," << d.item_ids[it.item] << ","
       << detail::fmt_double(it.rating) << "," << it.timestamp << "," << split_name(it.split)
       << "\n";

  std::ofstream tc(dir + "/triples.csv");
  if (!tc) throw DataError("cannot write " + dir + "/triples.csv");
  for (const auto& t : d.triples)
    tc << d.entity_ids[t.head] << "," << t.relation << "," << d.entity_ids[t.tail] << "\n";

  nlohmann::json meta = {
      {"n_users", d.n_users},
      {"n_items", d.n_items},
      {"n_relations", d.n_relations},
      {"n_entities", d.n_entities},
      {"user_ids", d.user_ids},
      {"item_ids", d.item_ids},
      {"entity_ids", d.entity_ids},
      {"preprocessed", d.preprocessed},
      {"relevance_threshold", d.relevance_threshold},
      {"split_seed", d.split_seed},
  };
  std::ofstream mj(dir + "/meta.json");
  if (!mj) throw DataError("cannot write " + dir + "/meta.json");
  mj << meta.dump(2) << "\n";
}

inline Dataset load_dataset_dir(const std::string& dir) {
  std::ifstream mj(dir + "/meta.json");
  if (!mj) throw DataError("cannot open " + dir + "/meta.json");
  nlohmann::json meta;
  try {
    mj >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir + "/meta.json: " + e.what());
  }

  Dataset d;
  d.n_users = meta.at("n_users").get<int>();
  d.n_items = meta.at("n_items").get<int>();
  d.n_relations = meta.at("n_relations").get<int>();
  d.n_entities = meta.at("n_entities").get<int>();
  d.user_ids = meta.at("user_ids").get<std::vector<long long>>();
  d.item_ids = meta.at("item_ids").get<std::vector<long long>>();
  d.entity_ids = meta.at("entity_ids").get<std::vector<long long>>();
  d.preprocessed = meta.at("preprocessed").get<bool>();
  d.relevance_threshold = meta.at("relevance_threshold").get<double>();
  d.split_seed = meta.at("split_seed").get<long long>();

  std::map<long long, int> user_index, entity_index;
  for (int i = 0; i < d.n_users; ++i) user_index.emplace(d.user_ids[i], i);
  for (int i = 0; i < d.n_entities; ++i) entity_index.emplace(d.entity_ids[i], i);

  std::ifstream ic(dir + "/interactions.csv");
  if (!ic) throw DataError("cannot open " + dir + "/interactions.csv");
  std::string line;
  int line_no = 0;
  while (std::getline(ic, line)) {
    ++line_no;
    std::string trimmed = detail::strip(line);
    if (trimmed.empty()) continue;
    std::string where = dir + "/interactions.csv:" + std::to_string(line_no);
    auto fields = detail::split_fields(trimmed);
    if (fields.size() != 5) throw DataError(where + ": expected 5 fields");
    Interaction it;
    auto uit = user_index.find(detail::parse_int(fields[0], where));
    auto iit = entity_index.find(detail::parse_int(fields[1], where));
    if (uit == user_index.end()) throw DataError(where + ": user id not in meta.json");
    if (iit == entity_index.end() || iit->second >= d.n_items)
      throw DataError(where + ": item id not in meta.json");
    it.user = uit->second;
    it.item = iit->second;
    it.rating = detail::parse_double(fields[2], where);
    it.timestamp = detail::parse_int(fields[3], where);
    it.split = split_from_name(detail::strip(fields[4]));
    it.relevant = d.preprocessed && it.rating > d.relevance_threshold;
    d.interactions.push_back(it);
  }

  std::ifstream tc(dir + "/triples.csv");
  if (tc) {
    line_no = 0;
    while (std::getline(tc, line)) {
      ++line_no;
      std::string trimmed = detail::strip(line);
      if (trimmed.empty()) continue;
      std::string where = dir + "/triples.csv:" + std::to_string(line_no);
      auto fields = detail::split_fields(trimmed);
      if (fields.size() != 3) throw DataError(where + ": expected 3 fields");
      auto hit = entity_index.find(detail::parse_int(fields[0], where));
      auto tit = entity_index.find(detail::parse_int(fields[2], where));
      if (hit == entity_index.end() || tit == entity_index.end())
        throw DataError(where + ": entity id not in meta.json");
      d.triples.push_back(
          {hit->second, static_cast<int>(detail::parse_int(fields[1], where)), tit->second});
    }
  }
  return d;
}

// Interaction indices per user sorted by timestamp (stable on ties).
inline std::vector<std::vector<int>> interactions_by_user(const Dataset& d) {
  std::vector<std::vector<int>> out(d.n_users);
  for (int i = 0; i < static_cast<int>(d.interactions.size()); ++i)
    out[d.interactions[i].user].push_back(i);
  for (auto& v : out)
    std::stable_sort(v.begin(), v.end(), [&](int a, int b) {
      return d.interactions[a].timestamp < d.interactions[b].timestamp;
    });
  return out;
}

}  // namespace kgrl::data
