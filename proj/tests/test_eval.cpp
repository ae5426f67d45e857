// Copyright 2026 The linrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>
#include <json.hpp>

#include "linrec/error.hpp"
#include "linrec/eval.hpp"
#include "linrec/gram.hpp"
#include "linrec/solver.hpp"
#include "linrec/weighting.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace linrec;
using testutil::from_dense;

namespace {

std::vector<UserId> range_users(std::size_t n) {
  std::vector<UserId> u(n);
  std::iota(u.begin(), u.end(), 0);
  return u;
}

// Structured binary data: three user groups with preferred item groups.
UserItemMatrix grouped(int n_users, int n_items, std::uint64_t seed, bool timed = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<SparseRow> rows(static_cast<std::size_t>(n_users));
  for (int u = 0; u < n_users; ++u) {
    for (int i = 0; i < n_items; ++i) {
      const double p = (i % 3 == u % 3 ? 0.5 : 0.06) * (1.4 - static_cast<double>(i) / n_items);
      if (unif(rng) < p) {
        const std::int64_t t = timed ? static_cast<std::int64_t>(unif(rng) * 1000) : kNoTimestamp;
        rows[static_cast<std::size_t>(u)].push_back({i, 1.0, t});
      }
    }
  }
  return UserItemMatrix(static_cast<std::size_t>(n_items), std::move(rows));
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("recall examples") {
  const std::vector<ItemId> ranked{0, 1, 2};
  CHECK(recall_at_k(ranked, {0, 2}, 2) == 0.5);
  CHECK(recall_at_k(ranked, {0, 1}, 2) == 1.0);
  CHECK(recall_at_k(ranked, {2}, 3) == 1.0);
  CHECK(recall_at_k(ranked, {1, 2}, 10) == 1.0);
  CHECK_THROWS_AS(recall_at_k(ranked, {}, 2), DataError);
}

TEST_CASE("ndcg examples") {
  const std::vector<ItemId> ranked{4, 7, 1};
  CHECK(ndcg_at_k(ranked, {4}, 100) == 1.0);
  CHECK(ndcg_at_k(ranked, {7}, 100) == 1.0 / std::log2(3.0));
  CHECK(ndcg_at_k(ranked, {7}, 100) == doctest::Approx(0.6309).epsilon(1e-4));
  CHECK(ndcg_at_k(ranked, {9}, 100) == 0.0);
  CHECK(ndcg_at_k(ranked, {1}, 2) == 0.0);
}

TEST_CASE("metrics agree with the definitions") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> items(30);
    std::iota(items.begin(), items.end(), 0);
    std::shuffle(items.begin(), items.end(), rng);
    std::unordered_set<int> held;
    const int n_held = 1 + static_cast<int>(rng() % 8);
    for (int h = 0; h < n_held; ++h) held.insert(static_cast<int>(rng() % 30));
    const int k = 1 + static_cast<int>(rng() % 30);
    std::vector<ItemId> ranked(items.begin(), items.end());
    std::unordered_set<ItemId> held_ids(held.begin(), held.end());
    CHECK(recall_at_k(ranked, held_ids, static_cast<std::size_t>(k)) ==
          doctest::Approx(oracle::recall(items, held, k)).epsilon(1e-12));
    CHECK(ndcg_at_k(ranked, held_ids, static_cast<std::size_t>(k)) ==
          doctest::Approx(oracle::ndcg(items, held, k)).epsilon(1e-12));
  }
}

TEST_CASE("ranking rules") {
  Eigen::VectorXd s(5);
  s << 1.0, 3.0, 3.0, 0.5, 2.0;
  SparseRow none;
  CHECK(rank_items(s, none, 5) == std::vector<ItemId>{1, 2, 4, 0, 3});
  SparseRow ex{{1, 1.0}};
  CHECK(rank_items(s, ex, 2) == std::vector<ItemId>{2, 4});
  std::vector<bool> cand{true, true, false, true, true};
  CHECK(rank_items(s, none, 10, &cand) == std::vector<ItemId>{1, 4, 0, 3});
  CHECK(rank_items(s, none, 0).empty());

  CHECK(popularity_rank(PopularityVector{Eigen::Vector3d(1, 5, 3)}) == std::vector<ItemId>{1, 2, 0});
  CHECK(popularity_rank(PopularityVector{Eigen::Vector3d(2, 2, 2)}) == std::vector<ItemId>{0, 1, 2});
}

TEST_CASE("oracle scorer scores 1.0") {
  auto m = grouped(60, 30, 1);
  EvalOptions o;
  o.recall_ks = {5, 20};
  o.ndcg_k = 100;
  o.seed = 17;
  Scorer perfect = [&](UserId u, std::span<const Entry>) {
    auto held = fold_in_split(m.row(u), o.fold_in_fraction, mix_seed(o.seed, static_cast<std::uint64_t>(u))).second;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(30);
    for (const auto& e : held) s[e.item] = 1.0;
    return s;
  };
  auto r = evaluate(perfect, m, range_users(60), o);
  CHECK(r.n_users > 0);
  for (const auto& [name, v] : r.metrics) {
    CHECK(v.mean == 1.0);
    CHECK(v.std_error == 0.0);
  }
}

TEST_CASE("fold-in items never reach the ranking") {
  auto m = grouped(40, 25, 2);
  EvalOptions o;
  auto users = range_users(40);
  auto base = solve_ease(build_gram(m), 5.0);
  Scorer plain = [&](UserId, std::span<const Entry> in) { return predict_scores(base, in); };
  Scorer boosted = [&](UserId, std::span<const Entry> in) {
    Eigen::VectorXd s = predict_scores(base, in);
    for (const auto& e : in) s[e.item] = 1e9;
    return s;
  };
  CHECK(evaluate(plain, m, users, o).to_json() == evaluate(boosted, m, users, o).to_json());
}

TEST_CASE("skipped users and standard errors") {
  std::vector<SparseRow> rows{{{0, 1.0}}, {{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}, {4, 1.0}},
                              {{1, 1.0}, {2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}}, {}};
  UserItemMatrix m(6, rows);
  EvalOptions o;
  o.recall_ks = {2};
  o.ndcg_k = 3;
  o.seed = 5;
  Eigen::VectorXd fixed(6);
  fixed << 6, 5, 4, 3, 2, 1;
  auto r = evaluate([&](UserId, std::span<const Entry>) { return fixed; }, m, range_users(4), o);
  CHECK(r.n_users == 2);
  CHECK(r.n_skipped == 2);

  // Recompute the per-user values by hand.
  std::vector<double> nd;
  for (UserId u : {1, 2}) {
    auto [in, held] = fold_in_split(m.row(u), 0.8, mix_seed(5, static_cast<std::uint64_t>(u)));
    std::vector<int> ranked;
    for (int j = 0; j < 6; ++j) {
      if (std::none_of(in.begin(), in.end(), [&](const Entry& e) { return e.item == j; })) ranked.push_back(j);
    }
    std::unordered_set<int> hs;
    for (const auto& e : held) hs.insert(e.item);
    nd.push_back(oracle::ndcg(ranked, hs, 3));
  }
  const double mean = (nd[0] + nd[1]) / 2;
  const double sd = std::sqrt(((nd[0] - mean) * (nd[0] - mean) + (nd[1] - mean) * (nd[1] - mean)) / 1.0);
  CHECK(r.metrics.at("ndcg@3").mean == doctest::Approx(mean).epsilon(1e-14));
  CHECK(r.metrics.at("ndcg@3").std_error == doctest::Approx(sd / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("scale invariance and determinism") {
  auto m = grouped(90, 30, 3);
  auto train = range_users(60);
  std::vector<UserId> test(30);
  std::iota(test.begin(), test.end(), 60);
  auto model = solve_zero_diag(build_gram(m.select_rows(train)), 10.0);
  auto scaled = model;
  scaled.b *= 3.0;
  EvalOptions o;
  o.seed = 9;
  auto a = evaluate_model(model, m, test, o);
  auto b = evaluate_model(scaled, m, test, o);
  CHECK(a.metrics.at("ndcg@100").mean == b.metrics.at("ndcg@100").mean);
  CHECK(a.metrics.at("recall@20").mean == b.metrics.at("recall@20").mean);
  CHECK(evaluate_model(model, m, test, o).to_json() == a.to_json());

  for (const auto& [name, v] : a.metrics) {
    CHECK(v.mean >= 0.0);
    CHECK(v.mean <= 1.0);
  }
  auto j = nlohmann::json::parse(a.to_json());
  CHECK(j.contains("recall@20"));
  CHECK(j["ndcg@100"].contains("stderr"));
  CHECK(j["n_users"].get<std::size_t>() == a.n_users);
  CHECK(a.to_table().find("ndcg@100") != std::string::npos);
}

TEST_CASE("model beats popularity which beats a random ranker") {
  auto m = grouped(300, 40, 4);
  auto train = range_users(200);
  std::vector<UserId> test(100);
  std::iota(test.begin(), test.end(), 200);
  auto x = m.select_rows(train);
  EvalOptions o;
  o.recall_ks = {5};
  o.ndcg_k = 10;
  auto model = evaluate_model(solve_ease(build_gram(x), 20.0), m, test, o);
  auto pop = evaluate_popularity(popularity(x), m, test, o);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif;
  Eigen::VectorXd noise(40);
  for (auto& v : noise) v = unif(rng);
  auto rnd = evaluate([&](UserId, std::span<const Entry>) { return noise; }, m, test, o);
  CHECK(model.metrics.at("ndcg@10").mean > pop.metrics.at("ndcg@10").mean);
  CHECK(pop.metrics.at("ndcg@10").mean > rnd.metrics.at("ndcg@10").mean);
}

TEST_CASE("time-aware protocol") {
  auto m = grouped(120, 24, 5, true);
  auto train = range_users(80);
  std::vector<UserId> test(40);
  std::iota(test.begin(), test.end(), 80);
  auto x = m.select_rows(train);
  auto model = solve_ease(build_gram(x), 8.0);
  auto pop = popularity(x);
  EvalOptions o;
  o.recall_ks = {3, 10};
  o.ndcg_k = 10;
  o.seed = 2;

  auto one = time_intervals(m, 1, train);
  auto t1 = evaluate_time_aware(model, one, pop, 0.5, 1e-9, m, test, o);
  auto plain = evaluate_model(model, m, test, o);
  for (const auto& [name, v] : plain.metrics) {
    CHECK(t1.metrics.at(name).mean == v.mean);
    CHECK(t1.metrics.at(name).std_error == v.std_error);
  }
  CHECK(t1.n_users == plain.n_users);
  CHECK_FALSE(t1.notes.empty());

  // Brute force for N = 4: re-scale the whole model per held-out event.
  auto four = time_intervals(m, 4, train);
  auto t4 = evaluate_time_aware(model, four, pop, 0.5, 1e-9, m, test, o);
  double ndcg_sum = 0.0;
  std::size_t n = 0;
  for (UserId u : test) {
    auto [in, held] = fold_in_split(m.row(u), 0.8, mix_seed(2, static_cast<std::uint64_t>(u)));
    if (in.empty() || held.empty()) continue;
    std::vector<std::size_t> ranks;
    for (const auto& h : held) {
      auto w = time_popularity_weights(four.pop[four.locate(h.time)], pop, 0.5, 1e-9);
      auto scaled = apply_item_rescaling(model, w);
      auto ranked = rank_items(predict_scores(scaled, in), in, 24);
      ranks.push_back(static_cast<std::size_t>(std::find(ranked.begin(), ranked.end(), h.item) - ranked.begin()) + 1);
    }
    double dcg = 0, idcg = 0;
    std::sort(ranks.begin(), ranks.end());
    for (auto r : ranks) {
      if (r <= 10) dcg += 1.0 / std::log2(r + 1.0);
    }
    for (std::size_t r = 1; r <= std::min<std::size_t>(10, held.size()); ++r) idcg += 1.0 / std::log2(r + 1.0);
    ndcg_sum += dcg / idcg;
    ++n;
  }
  CHECK(t4.n_users == n);
  CHECK(t4.metrics.at("ndcg@10").mean == doctest::Approx(ndcg_sum / static_cast<double>(n)).epsilon(1e-12));

  DenseModel rr = solve_rr(build_gram(x), 8.0);
  CHECK_THROWS_AS(evaluate_time_aware(rr, four, pop, 0.5, 1e-9, m, test, o), UsageError);
}

TEST_CASE("lambda grid search") {
  auto m = grouped(260, 30, 6);
  auto train = range_users(160);
  std::vector<UserId> val(100);
  std::iota(val.begin(), val.end(), 160);
  auto g = build_gram(m.select_rows(train));
  EvalOptions o;
  o.recall_ks = {5};
  o.ndcg_k = 10;

  auto single = grid_search_lambda(g, m, val, {7.0}, o);
  CHECK(single.best_lambda == 7.0);
  CHECK(single.reports.size() == 1);

  auto sweep = grid_search_lambda(g, m, val, {1e6, 1e-6, 30.0}, o, Variant::ease_xy);
  CHECK(sweep.best_lambda == 30.0);
  REQUIRE(sweep.reports.size() == 3);
  CHECK(sweep.reports[0].first == 1e-6);

  // Uncorrelated items: every lambda gives B = 0, so the smallest one wins.
  std::vector<SparseRow> diag_rows;
  for (int u = 0; u < 12; ++u) diag_rows.push_back({{u % 4, 1.0}, {4 + u % 2, 1.0}});
  UserItemMatrix flat(6, diag_rows);
  GramStats gd;
  gd.g = Eigen::VectorXd::Constant(6, 3.0).asDiagonal();
  gd.n_users = 12;
  gd.x_col_sums = Eigen::VectorXd::Constant(6, 3.0);
  auto tie = grid_search_lambda(gd, flat, range_users(12), {5.0, 2.0, 9.0}, o);
  CHECK(tie.best_lambda == 2.0);

  CHECK_THROWS_AS(grid_search_lambda(g, m, val, {}, o), UsageError);
  CHECK_THROWS_AS(grid_search_lambda(g, m, val, {1.0, -1.0}, o), UsageError);
}

}  // TEST_SUITE
