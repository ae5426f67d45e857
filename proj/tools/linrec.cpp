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

// linrec: item-item linear recommenders from the command line.
//
//   linrec ingest --input ratings.csv --value-col rating --min-value 4
//       --binarize --min-user-count 5 --output data.tsv
//   linrec split --data data.tsv --n-val 10000 --n-test 10000 --output-dir split
//   linrec train --data data.tsv --split split --variant zero-diag --lambda 500
//       --output model.bin
//   linrec evaluate --data data.tsv --split split --model model.bin
//
// Options can also come from a JSON file given with --config, one object per
// subcommand: {"train": {"lambda": 500, "variant": "zero-diag"}}. Flags on the
// command line take precedence.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "linrec/commands.hpp"
#include "linrec/error.hpp"

namespace {

using linrec::path;

// Reads nested JSON objects as CLI11 sections; arrays become multiple inputs.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("JSON config must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("unsupported JSON config value: " + v.dump());
  }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

template <typename E>
CLI::CheckedTransformer choices(const std::map<std::string, E>& m) {
  return CLI::CheckedTransformer(m, CLI::ignore_case);
}

void add_schema(CLI::App* app, linrec::Schema& schema, std::string& value_col,
                std::string& time_col) {
  app->add_option("--user-col", schema.user_col, "user column name")->capture_default_str();
  app->add_option("--item-col", schema.item_col, "item column name")->capture_default_str();
  app->add_option("--value-col", value_col, "value column name; absent means value 1");
  app->add_option("--time-col", time_col, "timestamp column name (integer)");
}

int run(int argc, char** argv) {
  CLI::App app{"Closed-form item-item recommenders", "linrec"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.require_subcommand(1);

  // ingest
  linrec::IngestOptions ingest;
  std::string ingest_value_col, ingest_time_col;
  std::optional<double> min_value;
  auto* c_ingest = app.add_subcommand("ingest", "Read a CSV/TSV interaction log");
  c_ingest->add_option("--input", ingest.input, "interaction file")->required();
  c_ingest->add_option("--format", ingest.format, "csv or tsv")
      ->transform(choices<linrec::FileFormat>(
          {{"csv", linrec::FileFormat::csv}, {"tsv", linrec::FileFormat::tsv}}));
  add_schema(c_ingest, ingest.schema, ingest_value_col, ingest_time_col);
  c_ingest->add_option("--dedup", ingest.dedup, "repeated (user, item) pairs")
      ->transform(choices<linrec::DedupPolicy>({{"keep-max", linrec::DedupPolicy::keep_max},
                                               {"keep-last", linrec::DedupPolicy::keep_last},
                                               {"error", linrec::DedupPolicy::error}}));
  c_ingest->add_option("--min-value", min_value, "drop events whose value is below this");
  c_ingest->add_option("--min-user-count", ingest.filter.min_user_count,
                       "drop users with fewer events (after the value filter)");
  c_ingest->add_option("--min-item-count", ingest.filter.min_item_count,
                       "drop items with fewer events (after the value filter)");
  c_ingest->add_flag("--binarize", ingest.binarize, "set all remaining values to 1");
  c_ingest->add_option("--output", ingest.output, "canonical TSV output")->required();

  // split
  linrec::SplitOptions split;
  auto* c_split = app.add_subcommand("split", "Draw validation and test users");
  c_split->add_option("--data", split.data, "canonical TSV")->required();
  c_split->add_option("--n-val", split.n_val, "validation users");
  c_split->add_option("--n-test", split.n_test, "test users");
  c_split->add_option("--seed", split.seed, "random seed");
  c_split->add_option("--output-dir", split.output_dir, "directory for the user lists")
      ->required();

  // popularity
  linrec::PopularityOptions pop;
  std::string pop_split;
  auto* c_pop = app.add_subcommand("popularity", "Item counts among training users");
  c_pop->add_option("--data", pop.data, "canonical TSV")->required();
  c_pop->add_option("--split", pop_split, "split directory");
  c_pop->add_option("--output", pop.output, "CSV output")->required();

  // train
  linrec::TrainOptions train;
  std::string train_split, train_gram_output;
  std::optional<double> train_lambda;
  auto* c_train = app.add_subcommand("train", "Train a dense model");
  c_train->add_option("--data", train.data, "canonical TSV")->required();
  c_train->add_option("--split", train_split, "split directory");
  const std::map<std::string, linrec::Variant> variants{{"rr", linrec::Variant::rr},
                                                        {"zero-diag", linrec::Variant::zero_diag},
                                                        {"ease", linrec::Variant::ease_xy}};
  std::string train_variant = "ease";
  c_train->add_option("--variant", train_variant, "rr, zero-diag or ease")
      ->check(CLI::IsMember(variants))
      ->capture_default_str();
  c_train->add_option("--gram", train.gram, "plain or disjoint")
      ->transform(choices<linrec::GramMode>(
          {{"plain", linrec::GramMode::plain}, {"disjoint", linrec::GramMode::disjoint}}));
  c_train->add_flag("--center", train.center, "center the targets by their column means");
  c_train->add_option("--lambda", train_lambda, "L2 penalty");
  c_train->add_option("--lambda-grid", train.lambda_grid,
                      "penalties to search on validation users");
  c_train->add_option("--fold-in", train.fold_in_fraction, "fold-in fraction for the search");
  c_train->add_option("--seed", train.seed, "random seed for the search");
  c_train->add_option("--gram-output", train_gram_output, "also write the Gram statistics");
  c_train->add_option("--output", train.output, "model file")->required();

  // train-sparse
  linrec::TrainSparseOptions sparse;
  std::string sparse_split;
  auto* c_sparse = app.add_subcommand("train-sparse", "Train a sparse model");
  c_sparse->add_option("--data", sparse.data, "canonical TSV")->required();
  c_sparse->add_option("--split", sparse_split, "split directory");
  c_sparse->add_option("--mode", sparse.mode, "blockwise or mask")
      ->transform(choices<linrec::SparseMode>(
          {{"blockwise", linrec::SparseMode::blockwise}, {"mask", linrec::SparseMode::mask}}));
  c_sparse->add_option("--source", sparse.source,
                       "pattern source for mask mode: correlation, model-abs, gram-count")
      ->transform(choices<linrec::PatternSource>(
          {{"correlation", linrec::PatternSource::correlation},
           {"model-abs", linrec::PatternSource::model_abs},
           {"gram-count", linrec::PatternSource::gram_count}}));
  c_sparse->add_option("--theta", sparse.theta, "pattern threshold")->capture_default_str();
  c_sparse->add_option("--n-max", sparse.n_max, "max entries per column")->capture_default_str();
  c_sparse->add_option("--lambda", sparse.lambda, "L2 penalty")->required();
  c_sparse->add_option("--output", sparse.output, "model file")->required();

  // rescale
  linrec::RescaleOptions rescale;
  std::string rescale_split;
  std::optional<std::int64_t> rescale_at;
  auto* c_rescale = app.add_subcommand("rescale", "Compute item re-scaling weights");
  c_rescale->add_option("--data", rescale.data, "canonical TSV")->required();
  c_rescale->add_option("--split", rescale_split, "split directory");
  c_rescale->add_option("--mode", rescale.mode, "remove-pop or time")
      ->transform(choices<linrec::RescaleMode>(
          {{"remove-pop", linrec::RescaleMode::remove_pop}, {"time", linrec::RescaleMode::time}}));
  c_rescale->add_option("--alpha", rescale.alpha, "exponent in [0, 1]")->capture_default_str();
  c_rescale->add_option("--epsilon", rescale.epsilon, "popularity offset");
  c_rescale->add_option("--intervals", rescale.intervals, "time intervals (time mode)");
  c_rescale->add_option("--at", rescale_at, "reference timestamp (time mode)");
  c_rescale->add_option("--output", rescale.output, "weights CSV")->required();

  // evaluate
  linrec::EvaluateOptions eval;
  std::string eval_model, eval_baseline, eval_weights, eval_json, eval_text;
  std::optional<std::size_t> eval_intervals;
  auto* c_eval = app.add_subcommand("evaluate", "Strong-generalization evaluation");
  c_eval->add_option("--data", eval.data, "canonical TSV")->required();
  c_eval->add_option("--split", eval.split_dir, "split directory")->required();
  c_eval->add_option("--model", eval_model, "dense or sparse model file");
  c_eval->add_option("--baseline", eval_baseline, "popularity")
      ->check(CLI::IsMember({"popularity"}));
  c_eval->add_option("--set", eval.set, "test or validation")
      ->transform(choices<linrec::EvalSet>(
          {{"test", linrec::EvalSet::test}, {"validation", linrec::EvalSet::validation}}));
  c_eval->add_option("--weights", eval_weights, "item weights CSV");
  c_eval->add_option("--time-intervals", eval_intervals, "time-aware popularity re-scaling");
  c_eval->add_option("--alpha", eval.alpha, "exponent for time-aware re-scaling");
  c_eval->add_option("--epsilon", eval.epsilon, "popularity offset");
  c_eval->add_option("--fold-in", eval.fold_in_fraction, "fold-in fraction")
      ->capture_default_str();
  c_eval->add_option("--seed", eval.seed, "random seed for the fold-in split");
  c_eval->add_flag("--all-items", eval.all_items, "also rank items unseen in training");
  c_eval->add_option("--report-json", eval_json, "JSON report");
  c_eval->add_option("--report-text", eval_text, "text report");

  // recommend
  linrec::RecommendOptions rec;
  std::string rec_weights;
  auto* c_rec = app.add_subcommand("recommend", "Top items for a history of item keys");
  c_rec->add_option("--model", rec.model, "model file")->required();
  c_rec->add_option("--history", rec.history, "item keys")->expected(0, -1);
  c_rec->add_option("--top-k", rec.top_k, "number of items")->capture_default_str();
  c_rec->add_option("--weights", rec_weights, "item weights CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  auto opt_path = [](const std::string& s) -> std::optional<path> {
    if (s.empty()) return std::nullopt;
    return path(s);
  };
  std::ostream& log = std::cerr;

  if (c_ingest->parsed()) {
    if (!ingest_value_col.empty()) ingest.schema.value_col = ingest_value_col;
    if (!ingest_time_col.empty()) ingest.schema.time_col = ingest_time_col;
    ingest.filter.min_value = min_value;
    linrec::cmd_ingest(ingest, log);
  } else if (c_split->parsed()) {
    linrec::cmd_split(split, log);
  } else if (c_pop->parsed()) {
    pop.split_dir = opt_path(pop_split);
    linrec::cmd_popularity(pop, log);
  } else if (c_train->parsed()) {
    train.split_dir = opt_path(train_split);
    train.gram_output = opt_path(train_gram_output);
    train.lambda = train_lambda;
    train.variant = variants.at(train_variant);
    linrec::cmd_train(train, log);
  } else if (c_sparse->parsed()) {
    sparse.split_dir = opt_path(sparse_split);
    linrec::cmd_train_sparse(sparse, log);
  } else if (c_rescale->parsed()) {
    rescale.split_dir = opt_path(rescale_split);
    rescale.at = rescale_at;
    linrec::cmd_rescale(rescale, log);
  } else if (c_eval->parsed()) {
    eval.model = opt_path(eval_model);
    eval.popularity_baseline = !eval_baseline.empty();
    eval.weights = opt_path(eval_weights);
    eval.time_intervals = eval_intervals;
    eval.report_json = opt_path(eval_json);
    eval.report_text = opt_path(eval_text);
    const linrec::EvalReport report = linrec::cmd_evaluate(eval, log);
    std::cout << report.to_table();
  } else if (c_rec->parsed()) {
    rec.weights = opt_path(rec_weights);
    for (const auto& r : linrec::cmd_recommend(rec, log)) {
      std::cout << r.item << '\t' << std::setprecision(10) << r.score << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const linrec::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const linrec::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const linrec::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
