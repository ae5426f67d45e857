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

// Strong-generalization top-N evaluation.
//
// Each evaluated user's events are split into a fold-in part, which is fed to
// the model, and a held-out part. Fold-in items are excluded from the
// ranking; remaining items are ranked by score with ties to the lower item
// id. Recall@k divides hits by min(k, |held out|); NDCG@k uses binary
// relevance and the ideal DCG of min(k, |held out|) hits.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "linrec/data.hpp"
#include "linrec/gram.hpp"
#include "linrec/model.hpp"
#include "linrec/sparse.hpp"

namespace linrec {

double recall_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& held_out,
                   std::size_t k);
double ndcg_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& held_out,
                 std::size_t k);

// Top-k items by (score desc, id asc), skipping `exclude` and, when given,
// items whose candidate flag is false.
std::vector<ItemId> rank_items(const Eigen::VectorXd& scores, std::span<const Entry> exclude,
                               std::size_t k, const std::vector<bool>* candidates = nullptr);

// Descending popularity, ties to the lower id.
std::vector<ItemId> popularity_rank(const PopularityVector& pop);

struct MetricSummary {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n)
};

struct EvalReport {
  std::map<std::string, MetricSummary> metrics;  // "recall@20", "ndcg@100", ...
  std::size_t n_users = 0;
  std::size_t n_skipped = 0;
  std::map<std::string, std::string> config;
  std::vector<std::string> notes;

  std::string to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  std::vector<std::size_t> recall_ks{20, 50};
  std::size_t ndcg_k = 100;
  double fold_in_fraction = 0.8;
  std::uint64_t seed = 0;
  // Items eligible for ranking, typically those seen among training users.
  // Events on other items are dropped before the fold-in split.
  std::optional<std::vector<bool>> candidates;
};

// Maps a user's fold-in events to one score per item.
using Scorer = std::function<Eigen::VectorXd(UserId, std::span<const Entry>)>;

EvalReport evaluate(const Scorer& scorer, const UserItemMatrix& matrix,
                    std::span<const UserId> users, const EvalOptions& options);

EvalReport evaluate_model(const DenseModel& model, const UserItemMatrix& matrix,
                          std::span<const UserId> users, const EvalOptions& options);
EvalReport evaluate_model(const SparseModel& model, const UserItemMatrix& matrix,
                          std::span<const UserId> users, const EvalOptions& options);
EvalReport evaluate_popularity(const PopularityVector& pop, const UserItemMatrix& matrix,
                               std::span<const UserId> users, const EvalOptions& options);

// Per held-out event: find its time interval, re-scale scores by
// ((pop_t + eps) / (pop + eps))^alpha, and record the rank of the event's
// item. The ranks feed the same metrics as evaluate().
EvalReport evaluate_time_aware(const DenseModel& model, const TimeIntervalIndex& intervals,
                               const PopularityVector& pop, double alpha, double epsilon,
                               const UserItemMatrix& matrix, std::span<const UserId> users,
                               const EvalOptions& options);

struct LambdaSearchResult {
  double best_lambda = 0.0;
  std::vector<std::pair<double, EvalReport>> reports;  // ascending lambda
};

// Trains `variant` for every lambda and scores NDCG@ndcg_k on `users` (the
// validation set). Ties go to the smaller lambda.
LambdaSearchResult grid_search_lambda(const GramStats& gram, const UserItemMatrix& matrix,
                                      std::span<const UserId> users,
                                      std::vector<double> lambdas, const EvalOptions& options,
                                      Variant variant = Variant::zero_diag);

}  // namespace linrec
