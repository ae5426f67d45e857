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

// Pipeline commands behind the `linrec` binary. Each command validates its
// options before reading or writing anything and writes outputs atomically.
// Progress and timings go to `log`; outputs never contain timings, so a
// fixed seed reproduces them byte for byte.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linrec/data.hpp"
#include "linrec/eval.hpp"

namespace linrec {

using std::filesystem::path;

struct IngestOptions {
  path input;
  FileFormat format = FileFormat::csv;
  Schema schema;
  DedupPolicy dedup = DedupPolicy::keep_max;
  bool binarize = false;
  ActivityFilter filter;
  path output;
};

struct SplitOptions {
  path data;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  path output_dir;
};

enum class GramMode { plain, disjoint };

struct TrainOptions {
  path data;
  std::optional<path> split_dir;  // training users only; all users when absent
  Variant variant = Variant::ease_xy;
  GramMode gram = GramMode::plain;
  bool center = false;
  std::optional<double> lambda;
  std::vector<double> lambda_grid;  // searched on validation users when non-empty
  double fold_in_fraction = 0.8;
  std::uint64_t seed = 0;
  std::optional<path> gram_output;
  path output;
};

enum class SparseMode { blockwise, mask };

struct TrainSparseOptions {
  path data;
  std::optional<path> split_dir;
  SparseMode mode = SparseMode::blockwise;
  PatternSource source = PatternSource::correlation;
  double theta = 0.03;
  std::size_t n_max = 1000;
  double lambda = 0.0;
  path output;
};

enum class RescaleMode { remove_pop, time };

struct RescaleOptions {
  path data;
  std::optional<path> split_dir;
  RescaleMode mode = RescaleMode::remove_pop;
  double alpha = 0.5;
  double epsilon = 1e-9;
  std::size_t intervals = 1;
  std::optional<std::int64_t> at;  // time mode: pick the interval of this timestamp
  path output;
};

struct PopularityOptions {
  path data;
  std::optional<path> split_dir;
  path output;
};

enum class EvalSet { test, validation };

struct EvaluateOptions {
  path data;
  path split_dir;
  std::optional<path> model;
  bool popularity_baseline = false;
  EvalSet set = EvalSet::test;
  std::optional<path> weights;
  std::optional<std::size_t> time_intervals;
  double alpha = 0.5;
  double epsilon = 1e-9;
  double fold_in_fraction = 0.8;
  std::uint64_t seed = 0;
  bool all_items = false;  // rank items unseen among training users too
  std::optional<path> report_json;
  std::optional<path> report_text;
};

struct RecommendOptions {
  path model;
  std::vector<std::string> history;
  std::size_t top_k = 10;
  std::optional<path> weights;
};

struct Recommendation {
  std::string item;
  double score = 0.0;
};

void cmd_ingest(const IngestOptions& options, std::ostream& log);
void cmd_split(const SplitOptions& options, std::ostream& log);
void cmd_popularity(const PopularityOptions& options, std::ostream& log);
void cmd_train(const TrainOptions& options, std::ostream& log);
void cmd_train_sparse(const TrainSparseOptions& options, std::ostream& log);
void cmd_rescale(const RescaleOptions& options, std::ostream& log);
EvalReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log);
std::vector<Recommendation> cmd_recommend(const RecommendOptions& options, std::ostream& log);

// Reads the tab-separated file written by `ingest`.
InteractionSet load_canonical(const path& file);

}  // namespace linrec
