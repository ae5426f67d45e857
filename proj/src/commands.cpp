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

#include "linrec/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "linrec/error.hpp"
#include "linrec/gram.hpp"
#include "linrec/persistence.hpp"
#include "linrec/solver.hpp"
#include "linrec/sparse.hpp"
#include "linrec/weighting.hpp"

namespace linrec {

namespace {

class PhaseTimer {
 public:
  PhaseTimer(std::ostream& log, std::string name)
      : log_(log), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    log_ << "  " << name_ << ": " << std::fixed << std::setprecision(3) << dt.count() << " s\n";
    log_.unsetf(std::ios::floatfield);
  }

 private:
  std::ostream& log_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void require_input(const path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " path is required");
  if (!std::filesystem::exists(p)) {
    throw UsageError(std::string(what) + " not found: " + p.string());
  }
}

void require_output(const path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " path is required");
  const path parent = p.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw UsageError(std::string(what) + " directory does not exist: " + parent.string());
  }
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw UsageError("epsilon must be positive");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be positive");
}

void check_fold_in(double f) {
  if (!(f > 0.0 && f < 1.0)) throw UsageError("fold-in fraction must lie in (0, 1)");
}

// Interactions plus the users a command trains on.
struct Workspace {
  InteractionSet iset;
  UserItemMatrix matrix;
  SplitSpec split;
};

Workspace open_workspace(const path& data, const std::optional<path>& split_dir,
                         std::ostream& log) {
  Workspace ws;
  ws.iset = load_canonical(data);
  ws.matrix = UserItemMatrix::from_interactions(ws.iset);
  if (split_dir) {
    ws.split = read_split(*split_dir, ws.iset.users);
  } else {
    ws.split.train.resize(ws.iset.n_users());
    for (std::size_t u = 0; u < ws.split.train.size(); ++u) {
      ws.split.train[u] = static_cast<UserId>(u);
    }
  }
  log << "loaded " << ws.iset.n_users() << " users, " << ws.iset.n_items() << " items, "
      << ws.matrix.nnz() << " interactions; training on " << ws.split.train.size()
      << " users\n";
  return ws;
}

std::vector<bool> seen_items(const PopularityVector& pop) {
  std::vector<bool> seen(static_cast<std::size_t>(pop.counts.size()));
  for (Eigen::Index j = 0; j < pop.counts.size(); ++j) seen[static_cast<std::size_t>(j)] = pop.counts[j] > 0;
  return seen;
}

std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

void check_item_keys(const std::vector<std::string>& model_keys, const KeyIndex& items) {
  if (model_keys != items.keys()) {
    throw DataError("model item keys do not match the interaction data");
  }
}

}  // namespace

InteractionSet load_canonical(const path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::string header;
  std::getline(in, header);
  in.clear();
  in.seekg(0);

  LoadOptions opts;
  opts.format = FileFormat::tsv;
  opts.schema.value_col = "value";
  if (header.find("\ttime") != std::string::npos) opts.schema.time_col = "time";
  opts.dedup = DedupPolicy::error;
  InteractionSet iset = parse_interactions(in, opts);
  iset.binarized = std::all_of(iset.events.begin(), iset.events.end(),
                               [](const Event& e) { return e.value == 1.0; });
  return iset;
}

void cmd_ingest(const IngestOptions& options, std::ostream& log) {
  require_input(options.input, "input");
  require_output(options.output, "output");

  LoadOptions lo;
  lo.format = options.format;
  lo.schema = options.schema;
  lo.dedup = options.dedup;
  InteractionSet iset = load_interactions(options.input, lo);
  log << "read " << iset.events.size() << " events\n";
  iset = filter_interactions(iset, options.filter);
  if (options.binarize) binarize(iset);
  if (iset.events.empty()) throw DataError("no interactions left after filtering");
  write_interactions(options.output, iset);
  log << "wrote " << iset.events.size() << " events, " << iset.n_users() << " users, "
      << iset.n_items() << " items\n";
}

void cmd_split(const SplitOptions& options, std::ostream& log) {
  require_input(options.data, "data");
  if (options.output_dir.empty()) throw UsageError("split output directory is required");

  const InteractionSet iset = load_canonical(options.data);
  const SplitSpec split =
      split_strong_generalization(iset.n_users(), options.n_val, options.n_test, options.seed);
  std::filesystem::create_directories(options.output_dir);
  write_split(options.output_dir, split, iset.users);
  log << "split: " << split.train.size() << " train, " << split.validation.size()
      << " validation, " << split.test.size() << " test users\n";
}

void cmd_popularity(const PopularityOptions& options, std::ostream& log) {
  require_input(options.data, "data");
  if (options.split_dir) require_input(*options.split_dir, "split");
  require_output(options.output, "output");

  const Workspace ws = open_workspace(options.data, options.split_dir, log);
  write_popularity(options.output, popularity(ws.matrix, ws.split.train), ws.iset.items.keys());
}

void cmd_train(const TrainOptions& options, std::ostream& log) {
  require_input(options.data, "data");
  if (options.split_dir) require_input(*options.split_dir, "split");
  require_output(options.output, "model output");
  if (options.gram_output) require_output(*options.gram_output, "gram output");
  if (options.lambda && !options.lambda_grid.empty()) {
    throw UsageError("give either lambda or a lambda grid, not both");
  }
  if (!options.lambda && options.lambda_grid.empty()) throw UsageError("lambda is required");
  if (options.lambda) check_lambda(*options.lambda);
  for (double l : options.lambda_grid) check_lambda(l);
  if (!options.lambda_grid.empty() && !options.split_dir) {
    throw UsageError("a lambda grid needs a split with validation users");
  }
  check_fold_in(options.fold_in_fraction);
  if (options.variant == Variant::ease_xy &&
      (options.center || options.gram == GramMode::disjoint)) {
    throw UsageError(
        "variant ease needs C = G; centered and disjoint-split statistics have C != G, "
        "use variant zero-diag");
  }
  if (options.center && options.gram == GramMode::disjoint) {
    throw UsageError("centering is not defined for disjoint-split statistics");
  }

  const Workspace ws = open_workspace(options.data, options.split_dir, log);
  if (options.gram == GramMode::disjoint && !ws.matrix.binarized()) {
    throw DataError("disjoint-split statistics need binary data; ingest with --binarize");
  }
  const UserItemMatrix x = ws.matrix.select_rows(ws.split.train);

  GramStats gram;
  {
    PhaseTimer t(log, "gram");
    if (options.gram == GramMode::disjoint) {
      gram = build_disjoint_gram(x);
    } else if (options.center) {
      gram = build_gram(x, x, true);
    } else {
      gram = build_gram(x);
    }
  }
  if (options.gram_output) save_gram(*options.gram_output, gram);

  double lambda = options.lambda.value_or(0.0);
  if (!options.lambda_grid.empty()) {
    PhaseTimer t(log, "lambda search");
    EvalOptions eo;
    eo.fold_in_fraction = options.fold_in_fraction;
    eo.seed = options.seed;
    eo.candidates = seen_items(popularity(x));
    const auto result = grid_search_lambda(gram, ws.matrix, ws.split.validation,
                                           options.lambda_grid, eo, options.variant);
    for (const auto& [l, report] : result.reports) {
      const auto it = report.metrics.find("ndcg@" + std::to_string(eo.ndcg_k));
      log << "  lambda " << l << ": ndcg@" << eo.ndcg_k << " = " << it->second.mean << '\n';
    }
    lambda = result.best_lambda;
    log << "selected lambda " << lambda << '\n';
  }

  PrecisionMatrix prec;
  {
    PhaseTimer t(log, "invert");
    prec = invert_regularized(gram, lambda);
  }
  // The X = Y correction reads only P; drop G before allocating anything else.
  if (options.variant == Variant::ease_xy) gram.g = Eigen::MatrixXd();
  DenseModel model;
  {
    PhaseTimer t(log, "correct");
    switch (options.variant) {
      case Variant::rr: model = rr_from_precision(prec, gram.cross(), lambda); break;
      case Variant::zero_diag: model = zero_diag_from_precision(prec, gram.cross(), lambda); break;
      case Variant::ease_xy: model = ease_from_precision(std::move(prec), lambda); break;
    }
  }
  model.mu = gram.mu;
  model.popularity = popularity(x).counts;
  save_dense_model(options.output, model, ws.iset.items.keys());
  log << "wrote " << to_string(model.variant) << " model, lambda " << lambda << ", "
      << model.n_items() << " items\n";
}

void cmd_train_sparse(const TrainSparseOptions& options, std::ostream& log) {
  require_input(options.data, "data");
  if (options.split_dir) require_input(*options.split_dir, "split");
  require_output(options.output, "model output");
  check_lambda(options.lambda);
  if (!(options.theta >= 0.0) || !std::isfinite(options.theta)) {
    throw UsageError("theta must be non-negative");
  }
  if (options.n_max == 0) throw UsageError("n_max must be at least 1");
  if (options.mode == SparseMode::blockwise && options.source != PatternSource::correlation) {
    throw UsageError("the block-wise trainer derives its pattern from correlations");
  }
  if (options.theta == 0.0) {
    log << "warning: theta = 0 keeps every entry up to n_max per column; the model is "
           "effectively dense\n";
  }

  const Workspace ws = open_workspace(options.data, options.split_dir, log);
  const UserItemMatrix x = ws.matrix.select_rows(ws.split.train);

  GramStats gram;
  {
    PhaseTimer t(log, "gram");
    gram = build_gram(x);
  }

  SparseModel model;
  if (options.mode == SparseMode::blockwise) {
    CorrelationMatrix cor;
    SparsityPattern pattern;
    {
      PhaseTimer t(log, "pattern");
      cor = correlation_from_gram(gram);
      pattern = threshold_pattern(cor.cor, options.theta, true, options.n_max);
    }
    std::vector<std::vector<ItemId>> blocks;
    std::vector<RowMatrix> subs;
    {
      PhaseTimer t(log, "blocks");
      blocks = block_partition(pattern, cor);
      subs = solve_blocks(gram, blocks, options.lambda);
    }
    {
      PhaseTimer t(log, "aggregate");
      model = aggregate_blocks(blocks, subs, pattern);
    }
    std::size_t largest = 0;
    for (const auto& b : blocks) largest = std::max(largest, b.size());
    log << "  " << blocks.size() << " blocks, largest " << largest << " items\n";
  } else {
    DenseModel dense;
    {
      PhaseTimer t(log, "dense solve");
      dense = solve_ease(gram, options.lambda);
    }
    SparsityPattern pattern;
    {
      PhaseTimer t(log, "pattern");
      switch (options.source) {
        case PatternSource::correlation:
          pattern = threshold_pattern(correlation_from_gram(gram).cor, options.theta, true,
                                      options.n_max, PatternSource::correlation);
          break;
        case PatternSource::model_abs:
          pattern = threshold_pattern(dense.b, options.theta, true, options.n_max,
                                      PatternSource::model_abs);
          break;
        case PatternSource::gram_count:
          pattern = threshold_pattern(gram.g, options.theta, false, options.n_max,
                                      PatternSource::gram_count);
          break;
      }
    }
    model = mask_model(dense, pattern);
  }
  save_sparse_model(options.output, model, ws.iset.items.keys());
  log << "wrote sparse model, " << model.pattern.nnz() << " entries, density "
      << model.pattern.density() << '\n';
}

void cmd_rescale(const RescaleOptions& options, std::ostream& log) {
  require_input(options.data, "data");
  if (options.split_dir) require_input(*options.split_dir, "split");
  require_output(options.output, "weights output");
  check_alpha(options.alpha);
  check_epsilon(options.epsilon);
  if (options.mode == RescaleMode::time) {
    if (options.intervals == 0) throw UsageError("intervals must be at least 1");
    if (!options.at) throw UsageError("time re-scaling needs a reference timestamp (--at)");
  }

  const Workspace ws = open_workspace(options.data, options.split_dir, log);
  const PopularityVector pop = popularity(ws.matrix, ws.split.train);
  ItemWeightVector w;
  if (options.mode == RescaleMode::remove_pop) {
    w = popularity_weights(pop, options.alpha, options.epsilon);
  } else {
    const TimeIntervalIndex idx = time_intervals(ws.matrix, options.intervals, ws.split.train);
    const std::size_t k = idx.locate(*options.at);
    log << "timestamp " << *options.at << " falls in interval " << k << " of " << idx.size()
        << '\n';
    w = time_popularity_weights(idx.pop[k], pop, options.alpha, options.epsilon);
  }
  write_item_weights(options.output, w, ws.iset.items.keys());
  log << "wrote " << w.w.size() << " item weights\n";
}

EvalReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  require_input(options.data, "data");
  require_input(options.split_dir, "split");
  if (options.model.has_value() == options.popularity_baseline) {
    throw UsageError("evaluate needs exactly one of a model file or the popularity baseline");
  }
  if (options.model) require_input(*options.model, "model");
  if (options.weights) require_input(*options.weights, "weights");
  if (options.report_json) require_output(*options.report_json, "JSON report");
  if (options.report_text) require_output(*options.report_text, "text report");
  check_fold_in(options.fold_in_fraction);
  check_alpha(options.alpha);
  check_epsilon(options.epsilon);
  if (options.time_intervals && *options.time_intervals == 0) {
    throw UsageError("time intervals must be at least 1");
  }
  if (options.popularity_baseline && (options.weights || options.time_intervals)) {
    throw UsageError("weights and time intervals apply to models, not the baseline");
  }
  if (options.weights && options.time_intervals) {
    throw UsageError("time-aware evaluation computes its own weights; drop --weights");
  }
  const std::optional<ModelFileKind> kind =
      options.model ? std::optional(peek_model_kind(*options.model)) : std::nullopt;
  if (kind == ModelFileKind::sparse && (options.weights || options.time_intervals)) {
    throw UsageError("item re-scaling applies to dense models only");
  }

  const Workspace ws = open_workspace(options.data, options.split_dir, log);
  const std::vector<UserId>& users =
      options.set == EvalSet::test ? ws.split.test : ws.split.validation;
  if (users.empty()) throw DataError("the split has no users in the evaluated set");
  const PopularityVector pop = popularity(ws.matrix, ws.split.train);

  EvalOptions eo;
  eo.fold_in_fraction = options.fold_in_fraction;
  eo.seed = options.seed;
  if (!options.all_items) eo.candidates = seen_items(pop);

  EvalReport report;
  {
    PhaseTimer t(log, "evaluate");
    if (options.popularity_baseline) {
      report = evaluate_popularity(pop, ws.matrix, users, eo);
    } else if (kind == ModelFileKind::sparse) {
      const SparseModelFile f = load_sparse_model(*options.model);
      check_item_keys(f.item_keys, ws.iset.items);
      report = evaluate_model(f.model, ws.matrix, users, eo);
      report.config["threshold"] = format_double(f.model.pattern.threshold);
      report.config["n_max"] = std::to_string(f.model.pattern.n_max);
    } else {
      DenseModelFile f = load_dense_model(*options.model);
      check_item_keys(f.item_keys, ws.iset.items);
      if (options.weights) {
        f.model = apply_item_rescaling(f.model, read_item_weights(*options.weights, ws.iset.items));
      }
      if (options.time_intervals) {
        const TimeIntervalIndex idx =
            time_intervals(ws.matrix, *options.time_intervals, ws.split.train);
        report = evaluate_time_aware(f.model, idx, pop, options.alpha, options.epsilon, ws.matrix,
                                     users, eo);
      } else {
        report = evaluate_model(f.model, ws.matrix, users, eo);
      }
    }
  }
  report.config["set"] = options.set == EvalSet::test ? "test" : "validation";
  report.config["items"] = options.all_items ? "all" : "seen-in-training";
  if (!report.config.contains("item_weights")) report.config["item_weights"] = "none";

  if (options.report_json) {
    atomic_write(*options.report_json, [&](std::ostream& out) { out << report.to_json(); });
  }
  if (options.report_text) {
    atomic_write(*options.report_text, [&](std::ostream& out) { out << report.to_table(); });
  }
  return report;
}

std::vector<Recommendation> cmd_recommend(const RecommendOptions& options, std::ostream& log) {
  require_input(options.model, "model");
  if (options.weights) require_input(*options.weights, "weights");

  const ModelFileKind kind = peek_model_kind(options.model);
  std::optional<DenseModel> dense;
  std::optional<SparseModel> sparse;
  KeyIndex items;
  if (kind == ModelFileKind::dense) {
    DenseModelFile f = load_dense_model(options.model);
    items = KeyIndex(std::move(f.item_keys));
    dense = std::move(f.model);
  } else {
    SparseModelFile f = load_sparse_model(options.model);
    items = KeyIndex(std::move(f.item_keys));
    sparse = std::move(f.model);
  }

  if (options.weights) {
    const ItemWeightVector w = read_item_weights(*options.weights, items);
    if (dense) {
      dense = apply_item_rescaling(*dense, w);
    } else {
      for (std::size_t j = 0; j < sparse->pattern.n; ++j) {
        for (auto k = sparse->pattern.col_ptr[j]; k < sparse->pattern.col_ptr[j + 1]; ++k) {
          sparse->values[k] *= w.w[static_cast<Eigen::Index>(j)];
        }
      }
    }
  }

  SparseRow history;
  for (const auto& key : options.history) {
    const auto id = items.find(key);
    if (!id) {
      log << "warning: unknown item '" << key << "' dropped from the history\n";
      continue;
    }
    history.push_back(Entry{*id, 1.0, kNoTimestamp});
  }
  std::sort(history.begin(), history.end(),
            [](const Entry& a, const Entry& b) { return a.item < b.item; });
  history.erase(std::unique(history.begin(), history.end(),
                            [](const Entry& a, const Entry& b) { return a.item == b.item; }),
                history.end());
  if (options.top_k == 0) return {};

  Eigen::VectorXd scores;
  if (history.empty()) {
    if (!dense || !dense->popularity) {
      throw DataError("empty history and the model stores no popularity for a fallback");
    }
    log << "warning: empty history; falling back to popularity order\n";
    scores = *dense->popularity;
  } else {
    scores = dense ? predict_scores(*dense, history) : predict_scores(*sparse, history);
  }

  std::vector<Recommendation> out;
  for (ItemId j : rank_items(scores, history, options.top_k)) {
    out.push_back(Recommendation{items.key(j), scores[j]});
  }
  return out;
}

}  // namespace linrec
