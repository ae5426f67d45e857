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

#include "linrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "linrec/error.hpp"
#include "linrec/solver.hpp"
#include "linrec/weighting.hpp"

namespace linrec {

double recall_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& held_out,
                   std::size_t k) {
  if (held_out.empty()) throw DataError("recall is undefined for an empty held-out set");
  const std::size_t top = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < top; ++r) hits += held_out.count(ranked[r]);
  return static_cast<double>(hits) / static_cast<double>(std::min(k, held_out.size()));
}

namespace {

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

double ideal_dcg(std::size_t n_relevant, std::size_t k) {
  double idcg = 0.0;
  for (std::size_t r = 1; r <= std::min(k, n_relevant); ++r) idcg += discount(r);
  return idcg;
}

}  // namespace

double ndcg_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& held_out,
                 std::size_t k) {
  if (held_out.empty()) throw DataError("NDCG is undefined for an empty held-out set");
  const std::size_t top = std::min(k, ranked.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < top; ++r) {
    if (held_out.count(ranked[r])) dcg += discount(r + 1);
  }
  return dcg / ideal_dcg(held_out.size(), k);
}

std::vector<ItemId> rank_items(const Eigen::VectorXd& scores, std::span<const Entry> exclude,
                               std::size_t k, const std::vector<bool>* candidates) {
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<bool> skip(n, false);
  for (const auto& e : exclude) {
    if (e.item >= 0 && static_cast<std::size_t>(e.item) < n) skip[static_cast<std::size_t>(e.item)] = true;
  }
  std::vector<ItemId> items;
  items.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (skip[j] || (candidates && !(*candidates)[j])) continue;
    items.push_back(static_cast<ItemId>(j));
  }
  auto before = [&](ItemId a, ItemId b) {
    const double sa = scores[a], sb = scores[b];
    return sa != sb ? sa > sb : a < b;
  };
  const std::size_t top = std::min(k, items.size());
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(top), items.end(),
                    before);
  items.resize(top);
  return items;
}

std::vector<ItemId> popularity_rank(const PopularityVector& pop) {
  std::vector<ItemId> order(static_cast<std::size_t>(pop.counts.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return pop.counts[a] > pop.counts[b]; });
  return order;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  for (const auto& [name, m] : metrics) j[name] = {{"mean", m.mean}, {"stderr", m.std_error}};
  j["n_users"] = n_users;
  j["n_skipped"] = n_skipped;
  j["config"] = config;
  if (!notes.empty()) j["notes"] = notes;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(12) << "metric" << std::right << std::setw(10) << "mean"
      << std::setw(10) << "stderr" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, m] : metrics) {
    out << std::left << std::setw(12) << name << std::right << std::setw(10) << m.mean
        << std::setw(10) << m.std_error << '\n';
  }
  out << "users evaluated: " << n_users << " (skipped " << n_skipped << ")\n";
  for (const auto& [k, v] : config) out << k << ": " << v << '\n';
  for (const auto& note : notes) out << "note: " << note << '\n';
  return out.str();
}

namespace {

struct UserOutcome {
  bool skipped = true;
  std::vector<double> values;  // recall@k..., ndcg
};

std::vector<std::string> metric_names(const EvalOptions& o) {
  std::vector<std::string> names;
  for (auto k : o.recall_ks) names.push_back("recall@" + std::to_string(k));
  names.push_back("ndcg@" + std::to_string(o.ndcg_k));
  return names;
}

std::size_t max_cutoff(const EvalOptions& o) {
  std::size_t k = o.ndcg_k;
  for (auto r : o.recall_ks) k = std::max(k, r);
  return k;
}

// Applies the candidate filter and the per-user fold-in split.
std::pair<SparseRow, SparseRow> prepare_user(const UserItemMatrix& matrix, UserId u,
                                             const EvalOptions& o) {
  auto row = matrix.row(u);
  if (!o.candidates) return fold_in_split(row, o.fold_in_fraction, mix_seed(o.seed, static_cast<std::uint64_t>(u)));
  SparseRow kept;
  for (const auto& e : row) {
    if ((*o.candidates)[static_cast<std::size_t>(e.item)]) kept.push_back(e);
  }
  return fold_in_split(kept, o.fold_in_fraction, mix_seed(o.seed, static_cast<std::uint64_t>(u)));
}

void check_options(const EvalOptions& o, const UserItemMatrix& matrix) {
  if (o.candidates && o.candidates->size() != matrix.n_items()) {
    throw DataError("candidate mask length does not match the item count");
  }
  if (o.ndcg_k == 0) throw UsageError("NDCG cutoff must be positive");
  for (auto k : o.recall_ks) {
    if (k == 0) throw UsageError("recall cutoffs must be positive");
  }
}

template <typename Fn>
EvalReport run_per_user(const UserItemMatrix& matrix, std::span<const UserId> users,
                        const EvalOptions& options, Fn&& per_user) {
  check_options(options, matrix);
  std::vector<UserOutcome> outcomes(users.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(users.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
    try {
      outcomes[static_cast<std::size_t>(idx)] = per_user(users[static_cast<std::size_t>(idx)]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // Sequential reduction in user order keeps reports bit-identical.
  const auto names = metric_names(options);
  EvalReport report;
  std::vector<double> sum(names.size(), 0.0);
  for (const auto& o : outcomes) {
    if (o.skipped) {
      ++report.n_skipped;
      continue;
    }
    ++report.n_users;
    for (std::size_t m = 0; m < names.size(); ++m) sum[m] += o.values[m];
  }
  for (std::size_t m = 0; m < names.size(); ++m) {
    MetricSummary s;
    if (report.n_users > 0) {
      s.mean = sum[m] / static_cast<double>(report.n_users);
      double ss = 0.0;
      for (const auto& o : outcomes) {
        if (!o.skipped) ss += (o.values[m] - s.mean) * (o.values[m] - s.mean);
      }
      if (report.n_users > 1) {
        const double nu = static_cast<double>(report.n_users);
        s.std_error = std::sqrt(ss / (nu - 1.0)) / std::sqrt(nu);
      }
    }
    report.metrics[names[m]] = s;
  }
  report.config["fold_in_fraction"] = std::to_string(options.fold_in_fraction);
  report.config["seed"] = std::to_string(options.seed);
  return report;
}

}  // namespace

EvalReport evaluate(const Scorer& scorer, const UserItemMatrix& matrix,
                    std::span<const UserId> users, const EvalOptions& options) {
  const std::size_t kmax = max_cutoff(options);
  const std::vector<bool>* cand = options.candidates ? &*options.candidates : nullptr;
  return run_per_user(matrix, users, options, [&](UserId u) {
    UserOutcome out;
    auto [input, held] = prepare_user(matrix, u, options);
    if (input.empty() || held.empty()) return out;
    const Eigen::VectorXd scores = scorer(u, input);
    if (static_cast<std::size_t>(scores.size()) != matrix.n_items()) {
      throw DataError("scorer returned the wrong number of scores");
    }
    const auto ranked = rank_items(scores, input, kmax, cand);
    std::unordered_set<ItemId> held_set;
    for (const auto& e : held) held_set.insert(e.item);
    out.skipped = false;
    for (auto k : options.recall_ks) out.values.push_back(recall_at_k(ranked, held_set, k));
    out.values.push_back(ndcg_at_k(ranked, held_set, options.ndcg_k));
    return out;
  });
}

EvalReport evaluate_model(const DenseModel& model, const UserItemMatrix& matrix,
                          std::span<const UserId> users, const EvalOptions& options) {
  if (static_cast<std::size_t>(model.n_items()) != matrix.n_items()) {
    throw DataError("model and data disagree on the number of items");
  }
  EvalReport report = evaluate(
      [&](UserId, std::span<const Entry> input) { return predict_scores(model, input); }, matrix,
      users, options);
  report.config["model"] = std::string(to_string(model.variant));
  std::ostringstream lam;
  lam << model.lambda;
  report.config["lambda"] = lam.str();
  if (model.applied_item_weights) {
    report.config["item_weights"] = std::string(to_string(model.applied_item_weights->kind));
    report.config["alpha"] = std::to_string(model.applied_item_weights->alpha);
  }
  return report;
}

EvalReport evaluate_model(const SparseModel& model, const UserItemMatrix& matrix,
                          std::span<const UserId> users, const EvalOptions& options) {
  if (static_cast<std::size_t>(model.n_items()) != matrix.n_items()) {
    throw DataError("model and data disagree on the number of items");
  }
  EvalReport report = evaluate(
      [&](UserId, std::span<const Entry> input) { return predict_scores(model, input); }, matrix,
      users, options);
  report.config["model"] = "sparse";
  std::ostringstream lam;
  lam << model.lambda;
  report.config["lambda"] = lam.str();
  report.config["density"] = std::to_string(model.pattern.density());
  return report;
}

EvalReport evaluate_popularity(const PopularityVector& pop, const UserItemMatrix& matrix,
                               std::span<const UserId> users, const EvalOptions& options) {
  if (static_cast<std::size_t>(pop.counts.size()) != matrix.n_items()) {
    throw DataError("popularity vector and data disagree on the number of items");
  }
  EvalReport report = evaluate([&](UserId, std::span<const Entry>) { return pop.counts; },
                               matrix, users, options);
  report.config["model"] = "popularity";
  return report;
}

EvalReport evaluate_time_aware(const DenseModel& model, const TimeIntervalIndex& intervals,
                               const PopularityVector& pop, double alpha, double epsilon,
                               const UserItemMatrix& matrix, std::span<const UserId> users,
                               const EvalOptions& options) {
  if (model.variant == Variant::rr) {
    throw UsageError("time-aware re-scaling applies to zero-diagonal models only");
  }
  if (!matrix.has_timestamps()) throw DataError("time-aware evaluation needs timestamped events");
  if (static_cast<std::size_t>(model.n_items()) != matrix.n_items() ||
      static_cast<std::size_t>(pop.counts.size()) != matrix.n_items()) {
    throw DataError("model, popularity and data disagree on the number of items");
  }
  std::vector<Eigen::VectorXd> weights;
  weights.reserve(intervals.size());
  for (const auto& pop_t : intervals.pop) {
    weights.push_back(time_popularity_weights(pop_t, pop, alpha, epsilon).w);
  }

  const auto n_items = static_cast<std::size_t>(matrix.n_items());
  const std::vector<bool>* cand = options.candidates ? &*options.candidates : nullptr;
  EvalReport report = run_per_user(matrix, users, options, [&](UserId u) {
    UserOutcome out;
    auto [input, held] = prepare_user(matrix, u, options);
    if (input.empty() || held.empty()) return out;
    const Eigen::VectorXd base = predict_scores(model, input);
    std::vector<bool> eligible(n_items, true);
    for (const auto& e : input) eligible[static_cast<std::size_t>(e.item)] = false;
    if (cand) {
      for (std::size_t j = 0; j < n_items; ++j) eligible[j] = eligible[j] && (*cand)[j];
    }

    std::vector<std::size_t> ranks;
    ranks.reserve(held.size());
    for (const auto& h : held) {
      const Eigen::VectorXd& w = weights[intervals.locate(h.time)];
      const double sh = base[h.item] * w[h.item];
      std::size_t rank = 1;
      for (std::size_t j = 0; j < n_items; ++j) {
        if (!eligible[j] || static_cast<ItemId>(j) == h.item) continue;
        const double sj = base[static_cast<Eigen::Index>(j)] * w[static_cast<Eigen::Index>(j)];
        if (sj > sh || (sj == sh && static_cast<ItemId>(j) < h.item)) ++rank;
      }
      ranks.push_back(rank);
    }
    std::sort(ranks.begin(), ranks.end());

    out.skipped = false;
    const std::size_t n_held = held.size();
    for (auto k : options.recall_ks) {
      const auto hits = static_cast<std::size_t>(
          std::count_if(ranks.begin(), ranks.end(), [&](std::size_t r) { return r <= k; }));
      out.values.push_back(static_cast<double>(hits) / static_cast<double>(std::min(k, n_held)));
    }
    double dcg = 0.0;
    for (auto r : ranks) {
      if (r <= options.ndcg_k) dcg += discount(r);
    }
    out.values.push_back(dcg / ideal_dcg(n_held, options.ndcg_k));
    return out;
  });
  report.config["model"] = std::string(to_string(model.variant));
  std::ostringstream lam;
  lam << model.lambda;
  report.config["lambda"] = lam.str();
  report.config["item_weights"] = "time";
  report.config["alpha"] = std::to_string(alpha);
  report.config["time_intervals"] = std::to_string(intervals.size());
  report.notes.push_back(
      "time-aware protocol: interval popularities come from training users over the whole time "
      "range, so recommendations for past test events may use later data");
  return report;
}

LambdaSearchResult grid_search_lambda(const GramStats& gram, const UserItemMatrix& matrix,
                                      std::span<const UserId> users,
                                      std::vector<double> lambdas, const EvalOptions& options,
                                      Variant variant) {
  if (lambdas.empty()) throw UsageError("lambda grid is empty");
  for (double l : lambdas) {
    if (!(l > 0.0)) throw UsageError("lambda grid values must be positive");
  }
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());

  const std::string key = "ndcg@" + std::to_string(options.ndcg_k);
  LambdaSearchResult result;
  double best = -1.0;
  for (double l : lambdas) {
    DenseModel model;
    switch (variant) {
      case Variant::rr: model = solve_rr(gram, l); break;
      case Variant::zero_diag: model = solve_zero_diag(gram, l); break;
      case Variant::ease_xy: model = solve_ease(gram, l); break;
    }
    EvalReport report = evaluate_model(model, matrix, users, options);
    const double score = report.metrics.at(key).mean;
    if (score > best) {
      best = score;
      result.best_lambda = l;
    }
    result.reports.emplace_back(l, std::move(report));
  }
  return result;
}

}  // namespace linrec
