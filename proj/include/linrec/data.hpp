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

// Interaction logs, the sparse user-item matrix, strong-generalization
// splits and item popularity statistics.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace linrec {

using UserId = std::int32_t;
using ItemId = std::int32_t;

inline constexpr std::int64_t kNoTimestamp = std::numeric_limits<std::int64_t>::min();

// Bijection between opaque string keys and dense ids 0..n-1, assigned in
// first-appearance order.
class KeyIndex {
 public:
  KeyIndex() = default;
  explicit KeyIndex(std::vector<std::string> keys);

  std::int32_t intern(std::string_view key);
  std::optional<std::int32_t> find(std::string_view key) const;
  const std::string& key(std::int32_t id) const { return keys_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct Event {
  UserId user = 0;
  ItemId item = 0;
  double value = 1.0;
  std::int64_t timestamp = kNoTimestamp;
};

struct InteractionSet {
  std::vector<Event> events;
  KeyIndex users;
  KeyIndex items;
  bool binarized = false;

  std::size_t n_users() const { return users.size(); }
  std::size_t n_items() const { return items.size(); }
  bool has_timestamps() const;
};

enum class FileFormat { csv, tsv };
enum class DedupPolicy { keep_max, keep_last, error };

struct Schema {
  std::string user_col = "user";
  std::string item_col = "item";
  std::optional<std::string> value_col;
  std::optional<std::string> time_col;
};

struct LoadOptions {
  FileFormat format = FileFormat::csv;
  Schema schema;
  bool binarize = false;
  DedupPolicy dedup = DedupPolicy::keep_max;
};

// Reads a delimited file with a header row. A missing value column means
// every event has value 1. Duplicate (user, item) pairs are resolved by
// `options.dedup`; binarization happens after deduplication.
InteractionSet load_interactions(const std::filesystem::path& path, const LoadOptions& options);
InteractionSet parse_interactions(std::istream& in, const LoadOptions& options);

// Writes the canonical tab-separated form (user, item, value[, time]) that
// load_interactions reads back with the default schema.
void write_interactions(const std::filesystem::path& path, const InteractionSet& iset);

// Activity filters applied during ingestion. Events below min_value are
// dropped first, then items with fewer than min_item_count users, then users
// with fewer than min_user_count items. Ids are re-assigned densely,
// preserving first-appearance order.
struct ActivityFilter {
  std::optional<double> min_value;
  std::size_t min_user_count = 0;
  std::size_t min_item_count = 0;
};

InteractionSet filter_interactions(const InteractionSet& iset, const ActivityFilter& filter);

// Non-zero values become 1, explicit zeros are dropped.
void binarize(InteractionSet& iset);

struct Entry {
  ItemId item = 0;
  double value = 1.0;
  std::int64_t time = kNoTimestamp;
};

using SparseRow = std::vector<Entry>;

// Row-compressed user-item matrix. Rows are sorted by item id with no
// duplicates; explicit zeros are not stored.
class UserItemMatrix {
 public:
  UserItemMatrix() = default;
  UserItemMatrix(std::size_t n_items, std::vector<SparseRow> rows);

  static UserItemMatrix from_interactions(const InteractionSet& iset);

  std::span<const Entry> row(UserId u) const {
    const auto b = row_ptr_[static_cast<std::size_t>(u)];
    const auto e = row_ptr_[static_cast<std::size_t>(u) + 1];
    return {entries_.data() + b, e - b};
  }
  std::size_t n_users() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t n_items() const { return n_items_; }
  std::size_t nnz() const { return entries_.size(); }
  bool binarized() const { return binarized_; }
  bool has_timestamps() const { return has_timestamps_; }

  // New matrix whose row r is row users[r] of this one; item space unchanged.
  UserItemMatrix select_rows(std::span<const UserId> users) const;
  // Same users, keeping only entries whose item is flagged in `keep`.
  UserItemMatrix filter_items(const std::vector<bool>& keep) const;

 private:
  std::size_t n_items_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Entry> entries_;
  bool binarized_ = true;
  bool has_timestamps_ = false;
};

struct SplitSpec {
  std::vector<UserId> train;
  std::vector<UserId> validation;
  std::vector<UserId> test;
  double fold_in_fraction = 0.8;
  std::uint64_t seed = 0;
};

// Shuffles users with `seed`; the first n_val go to validation, the next
// n_test to test, the remainder to training. Each list is returned sorted.
SplitSpec split_strong_generalization(std::size_t n_users, std::size_t n_val, std::size_t n_test,
                                      std::uint64_t seed);

// Newline-delimited user keys, one file per set.
void write_split(const std::filesystem::path& dir, const SplitSpec& split, const KeyIndex& users);
SplitSpec read_split(const std::filesystem::path& dir, const KeyIndex& users);

// ceil(fraction * nnz) entries chosen uniformly at random go to the input
// part, the rest are held out. Both parts come back sorted by item id.
std::pair<SparseRow, SparseRow> fold_in_split(std::span<const Entry> row, double fraction,
                                              std::uint64_t seed);

// Stateless 64-bit mixing of a base seed with a stream id (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct PopularityVector {
  Eigen::VectorXd counts;
};

// Column sums, optionally restricted to a subset of users.
PopularityVector popularity(const UserItemMatrix& matrix);
PopularityVector popularity(const UserItemMatrix& matrix, std::span<const UserId> users);

// Equal-count time intervals over the events of `users`. Interval k covers
// (boundaries[k], boundaries[k+1]]; the first interval also includes
// boundaries[0]. A timestamp equal to a boundary belongs to the earlier
// interval.
struct TimeIntervalIndex {
  std::vector<std::int64_t> boundaries;
  std::vector<std::size_t> event_counts;
  std::vector<PopularityVector> pop;

  std::size_t size() const { return pop.size(); }
  // Timestamps outside the covered range map to the nearest interval.
  std::size_t locate(std::int64_t timestamp) const;
};

TimeIntervalIndex time_intervals(const UserItemMatrix& matrix, std::size_t n_intervals,
                                 std::span<const UserId> users);

}  // namespace linrec
