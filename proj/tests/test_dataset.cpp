#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "kgrl/dataset.hpp"

using namespace kgrl::data;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  std::string path = testing::TempDir() + name;
  std::ofstream os(path);
  os << body;
  return path;
}

Dataset tiny_user_dataset(const std::vector<std::pair<int, int>>& user_counts_ratings_base) {
  // builds one interaction list from (user, count) pairs, ratings spread 0..5
  Dataset d;
  int next_ts = 0;
  for (size_t u = 0; u < user_counts_ratings_base.size(); ++u) {
    d.user_ids.push_back(static_cast<long long>(u));
    for (int k = 0; k < user_counts_ratings_base[u].second; ++k) {
      Interaction it;
      it.user = static_cast<int>(u);
      it.item = k % 4;
      it.rating = (k % 6);
      it.timestamp = next_ts++;
      d.interactions.push_back(it);
    }
  }
  d.n_users = static_cast<int>(user_counts_ratings_base.size());
  d.n_items = 4;
  d.n_entities = 4;
  for (int i = 0; i < 4; ++i) d.item_ids.push_back(i);
  d.entity_ids = d.item_ids;
  return d;
}

}  // namespace

TEST(load, reindexes_users_and_items_by_first_appearance) {
  std::string path = write_temp("ratings_small.csv",
                                "7,100,4.5,11\n"
                                "9,100,2.0,12\n"
                                "7,100,3.0,13\n");
  Dataset d = load_dataset(path, FileFormat::TabularRatings);
  EXPECT_EQ(d.n_users, 2);
  EXPECT_EQ(d.n_items, 1);
  ASSERT_EQ(d.interactions.size(), 3u);
  EXPECT_EQ(d.interactions[0].user, 0);
  EXPECT_EQ(d.interactions[1].user, 1);
  EXPECT_EQ(d.interactions[2].user, 0);
  EXPECT_EQ(d.user_ids[0], 7);
  EXPECT_EQ(d.user_ids[1], 9);
  EXPECT_EQ(d.item_ids[0], 100);
}

TEST(load, header_line_is_skipped) {
  std::string path = write_temp("ratings_header.csv",
                                "user,item,rating,timestamp\n"
                                "1,2,3.0,4\n");
  Dataset d = load_dataset(path, FileFormat::TabularRatings);
  EXPECT_EQ(d.interactions.size(), 1u);
}

TEST(load, non_numeric_rating_names_the_line) {
  std::string path = write_temp("ratings_bad.csv",
                                "1,2,3.0,4\n"
                                "1,2,oops,5\n");
  try {
    load_dataset(path, FileFormat::TabularRatings);
    FAIL() << "expected DataError";
  } catch (const kgrl::DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(load, empty_file_is_an_error) {
  std::string path = write_temp("ratings_empty.csv", "");
  EXPECT_THROW(load_dataset(path, FileFormat::TabularRatings), kgrl::DataError);
}

TEST(load, triple_list_interns_entities_and_relations) {
  std::string path = write_temp("triples_small.csv",
                                "10,0,20\n"
                                "20,1,30\n");
  Dataset d = load_dataset(path, FileFormat::TripleList);
  EXPECT_EQ(d.n_entities, 3);
  EXPECT_EQ(d.n_relations, 2);
  ASSERT_EQ(d.triples.size(), 2u);
  EXPECT_EQ(d.triples[0].head, 0);
  EXPECT_EQ(d.triples[0].tail, 1);
  EXPECT_EQ(d.triples[1].head, 1);
  EXPECT_EQ(d.triples[1].tail, 2);
}

TEST(load, attach_triples_extends_entity_space_past_items) {
  std::string ratings = write_temp("ratings_for_triples.csv", "1,100,4.0,1\n1,200,2.0,2\n");
  std::string triples = write_temp("triples_for_ratings.csv",
                                   "100,0,200\n"
                                   "100,1,999\n");
  Dataset d = load_dataset(ratings, FileFormat::TabularRatings);
  attach_triples(d, triples);
  EXPECT_EQ(d.n_items, 2);
  EXPECT_EQ(d.n_entities, 3);
  ASSERT_EQ(d.triples.size(), 2u);
  EXPECT_EQ(d.triples[0].head, 0);
  EXPECT_EQ(d.triples[0].tail, 1);
  EXPECT_EQ(d.triples[1].tail, 2);
}

TEST(preprocess, linear_scaling_hits_both_endpoints) {
  Dataset d;
  d.n_users = 1;
  d.user_ids = {42};
  d.n_items = 2;
  d.item_ids = {0, 1};
  d.entity_ids = d.item_ids;
  for (int k = 0; k < 10; ++k) {
    Interaction it;
    it.user = 0;
    it.item = k % 2;
    it.rating = (k == 0) ? 1.0 : (k == 1 ? 10.0 : 5.0);
    it.timestamp = k;
    d.interactions.push_back(it);
  }
  Dataset p = preprocess(d);
  EXPECT_DOUBLE_EQ(p.interactions[0].rating, 0.0);
  EXPECT_DOUBLE_EQ(p.interactions[1].rating, 5.0);
  for (const auto& it : p.interactions) {
    EXPECT_GE(it.rating, 0.0);
    EXPECT_LE(it.rating, 5.0);
  }
}

TEST(preprocess, ten_interaction_cutoff_is_exact) {
  Dataset d = tiny_user_dataset({{0, 9}, {1, 10}, {2, 25}});
  Dataset p = preprocess(d);
  EXPECT_EQ(p.n_users, 2);
  EXPECT_EQ(p.user_ids[0], 1);
  EXPECT_EQ(p.user_ids[1], 2);
  std::vector<int> counts(p.n_users, 0);
  for (const auto& it : p.interactions) ++counts[it.user];
  for (int c : counts) EXPECT_GE(c, 10);
}

TEST(preprocess, relevance_is_strictly_above_threshold) {
  Dataset d;
  d.n_users = 1;
  d.user_ids = {0};
  d.n_items = 4;
  d.item_ids = {0, 1, 2, 3};
  d.entity_ids = d.item_ids;
  std::vector<double> ratings = {0.0, 5.0, 3.0, 3.5, 3.0, 3.5, 0.0, 5.0, 3.0, 3.5};
  for (int k = 0; k < 10; ++k) {
    Interaction it;
    it.user = 0;
    it.item = k % 4;
    it.rating = ratings[k];
    it.timestamp = k;
    d.interactions.push_back(it);
  }
  // min 0 max 5 keeps the scaling an identity map
  Dataset p = preprocess(d);
  EXPECT_FALSE(p.interactions[2].relevant);
  EXPECT_TRUE(p.interactions[3].relevant);
  for (const auto& it : p.interactions) EXPECT_EQ(it.relevant, it.rating > 3.0);
}

TEST(preprocess, dropping_everyone_is_an_error) {
  Dataset d = tiny_user_dataset({{0, 3}, {1, 4}});
  EXPECT_THROW(preprocess(d), kgrl::DataError);
}

TEST(split, same_seed_gives_identical_assignment) {
  Dataset d = generate_synthetic(20, 80, 3, 0.3, 5);
  Dataset a = split_dataset(preprocess(d), 42);
  Dataset b = split_dataset(preprocess(d), 42);
  ASSERT_EQ(a.interactions.size(), b.interactions.size());
  for (size_t i = 0; i < a.interactions.size(); ++i)
    EXPECT_EQ(a.interactions[i].split, b.interactions[i].split);
}

TEST(split, per_user_buckets_stay_within_one_of_exact_shares) {
  Dataset d = split_dataset(preprocess(generate_synthetic(30, 100, 3, 0.25, 7)), 9);
  std::vector<std::array<int, 3>> counts(d.n_users, {0, 0, 0});
  for (const auto& it : d.interactions) ++counts[it.user][static_cast<int>(it.split)];
  const double share[3] = {0.7, 0.1, 0.2};
  for (int u = 0; u < d.n_users; ++u) {
    int n = counts[u][0] + counts[u][1] + counts[u][2];
    ASSERT_GT(n, 0);
    EXPECT_GE(counts[u][0], 1) << "user " << u << " has no train interactions";
    for (int b = 0; b < 3; ++b)
      EXPECT_LE(std::abs(counts[u][b] - share[b] * n), 1.0 + 1e-12)
          << "user " << u << " bucket " << b;
  }
}

TEST(split, global_counts_close_to_70_10_20) {
  // ~10k interactions
  Dataset d = split_dataset(preprocess(generate_synthetic(50, 200, 4, 1.0, 42)), 42);
  int n = static_cast<int>(d.interactions.size());
  ASSERT_EQ(n, 50 * 200);
  int c[3] = {0, 0, 0};
  for (const auto& it : d.interactions) ++c[static_cast<int>(it.split)];
  EXPECT_NEAR(c[0], 0.7 * n, 0.01 * n);
  EXPECT_NEAR(c[1], 0.1 * n, 0.01 * n);
  EXPECT_NEAR(c[2], 0.2 * n, 0.01 * n);
}

TEST(split, tiny_users_fall_back_to_train) {
  Dataset d = tiny_user_dataset({{0, 2}});
  d = split_dataset(d, 1);
  for (const auto& it : d.interactions) EXPECT_EQ(it.split, Split::Train);
}

TEST(synthetic, interaction_count_tracks_density) {
  Dataset d = generate_synthetic(50, 200, 4, 0.1, 1);
  EXPECT_GT(d.interactions.size(), 850u);
  EXPECT_LT(d.interactions.size(), 1150u);
  std::vector<int> counts(d.n_users, 0);
  for (const auto& it : d.interactions) ++counts[it.user];
  for (int c : counts) EXPECT_GE(c, 10);
}

TEST(synthetic, identical_seeds_reproduce_everything) {
  Dataset a = generate_synthetic(20, 60, 3, 0.2, 9);
  Dataset b = generate_synthetic(20, 60, 3, 0.2, 9);
  ASSERT_EQ(a.interactions.size(), b.interactions.size());
  for (size_t i = 0; i < a.interactions.size(); ++i) {
    EXPECT_EQ(a.interactions[i].user, b.interactions[i].user);
    EXPECT_EQ(a.interactions[i].item, b.interactions[i].item);
    EXPECT_EQ(a.interactions[i].rating, b.interactions[i].rating);
    EXPECT_EQ(a.interactions[i].timestamp, b.interactions[i].timestamp);
  }
  ASSERT_EQ(a.triples.size(), b.triples.size());
  for (size_t i = 0; i < a.triples.size(); ++i) {
    EXPECT_EQ(a.triples[i].head, b.triples[i].head);
    EXPECT_EQ(a.triples[i].relation, b.triples[i].relation);
    EXPECT_EQ(a.triples[i].tail, b.triples[i].tail);
  }
}

TEST(synthetic, triple_degree_averages_at_least_two) {
  Dataset d = generate_synthetic(10, 100, 4, 0.2, 3);
  std::vector<int> degree(d.n_items, 0);
  for (const auto& t : d.triples) {
    ++degree[t.head];
    ++degree[t.tail];
  }
  double mean = 0.0;
  for (int deg : degree) mean += deg;
  mean /= d.n_items;
  EXPECT_GE(mean, 2.0);
  for (const auto& t : d.triples) {
    EXPECT_NE(t.head, t.tail);
    EXPECT_LT(t.relation, d.n_relations);
  }
}

TEST(synthetic, item_quality_is_consistent_across_user_halves) {
  // planted low-rank structure: items ranked by one user half's mean rating
  // should look better than average to the other half too
  Dataset d = generate_synthetic(50, 120, 4, 0.4, 11);
  int half = d.n_users / 2;
  std::vector<double> sum_a(d.n_items, 0.0), sum_b(d.n_items, 0.0);
  std::vector<int> cnt_a(d.n_items, 0), cnt_b(d.n_items, 0);
  double total_b = 0.0;
  int n_b = 0;
  for (const auto& it : d.interactions) {
    if (it.user < half) {
      sum_a[it.item] += it.rating;
      ++cnt_a[it.item];
    } else {
      sum_b[it.item] += it.rating;
      ++cnt_b[it.item];
      total_b += it.rating;
      ++n_b;
    }
  }
  std::vector<std::pair<double, int>> ranked;
  for (int i = 0; i < d.n_items; ++i)
    if (cnt_a[i] >= 3 && cnt_b[i] >= 3) ranked.push_back({sum_a[i] / cnt_a[i], i});
  ASSERT_GE(ranked.size(), 20u);
  std::sort(ranked.begin(), ranked.end(), std::greater<>());
  double top_mean_b = 0.0;
  int top_cnt = 0;
  for (int k = 0; k < 10; ++k) {
    int item = ranked[k].second;
    top_mean_b += sum_b[item];
    top_cnt += cnt_b[item];
  }
  EXPECT_GT(top_mean_b / top_cnt, total_b / n_b + 0.2);
}

TEST(persistence, directory_round_trip_preserves_interactions_and_triples) {
  Dataset d = split_dataset(preprocess(generate_synthetic(20, 80, 3, 0.25, 13)), 17);
  std::string dir = testing::TempDir() + "dataset_roundtrip";
  save_dataset(dir, d);
  Dataset r = load_dataset_dir(dir);

  EXPECT_EQ(r.n_users, d.n_users);
  EXPECT_EQ(r.n_items, d.n_items);
  EXPECT_EQ(r.n_relations, d.n_relations);
  EXPECT_EQ(r.n_entities, d.n_entities);
  EXPECT_EQ(r.split_seed, d.split_seed);

  using Key = std::tuple<int, int, double, long long, int>;
  std::multiset<Key> want, got;
  for (const auto& it : d.interactions)
    want.insert({it.user, it.item, it.rating, it.timestamp, static_cast<int>(it.split)});
  for (const auto& it : r.interactions)
    got.insert({it.user, it.item, it.rating, it.timestamp, static_cast<int>(it.split)});
  EXPECT_EQ(want, got);

  ASSERT_EQ(r.triples.size(), d.triples.size());
  for (size_t i = 0; i < r.triples.size(); ++i) {
    EXPECT_EQ(r.triples[i].head, d.triples[i].head);
    EXPECT_EQ(r.triples[i].relation, d.triples[i].relation);
    EXPECT_EQ(r.triples[i].tail, d.triples[i].tail);
  }
  for (size_t i = 0; i < r.interactions.size(); ++i)
    EXPECT_EQ(r.interactions[i].relevant, r.interactions[i].rating > 3.0);
}

TEST(persistence, interactions_by_user_sorts_by_timestamp) {
  Dataset d = generate_synthetic(5, 40, 2, 0.5, 21);
  auto by_user = interactions_by_user(d);
  ASSERT_EQ(by_user.size(), static_cast<size_t>(d.n_users));
  for (int u = 0; u < d.n_users; ++u) {
    for (size_t k = 1; k < by_user[u].size(); ++k)
      EXPECT_LE(d.interactions[by_user[u][k - 1]].timestamp,
                d.interactions[by_user[u][k]].timestamp);
    for (int idx : by_user[u]) EXPECT_EQ(d.interactions[idx].user, u);
  }
}
