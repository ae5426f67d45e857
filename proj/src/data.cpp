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

#include "linrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "linrec/error.hpp"

namespace linrec {

KeyIndex::KeyIndex(std::vector<std::string> keys) {
  for (auto& k : keys) {
    if (find(k)) throw DataError("duplicate key in key table: " + k);
    intern(k);
  }
}

std::int32_t KeyIndex::intern(std::string_view key) {
  auto it = ids_.find(std::string(key));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(keys_.size());
  keys_.emplace_back(key);
  ids_.emplace(keys_.back(), id);
  return id;
}

std::optional<std::int32_t> KeyIndex::find(std::string_view key) const {
  auto it = ids_.find(std::string(key));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

bool InteractionSet::has_timestamps() const {
  return !events.empty() && std::all_of(events.begin(), events.end(), [](const Event& e) {
           return e.timestamp != kNoTimestamp;
         });
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no, const char* what) {
  T out{};
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + s + "'");
  }
  return out;
}

std::uint64_t pair_key(UserId u, ItemId i) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
         static_cast<std::uint32_t>(i);
}

}  // namespace

InteractionSet parse_interactions(std::istream& in, const LoadOptions& options) {
  const char delim = options.format == FileFormat::csv ? ',' : '\t';
  InteractionSet iset;
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    header = split_fields(line, delim);
    break;
  }
  if (header.empty()) throw DataError("empty input: missing header row");

  const auto& schema = options.schema;
  const std::size_t ucol = column_index(header, schema.user_col);
  const std::size_t icol = column_index(header, schema.item_col);
  const std::optional<std::size_t> vcol =
      schema.value_col ? std::optional(column_index(header, *schema.value_col)) : std::nullopt;
  const std::optional<std::size_t> tcol =
      schema.time_col ? std::optional(column_index(header, *schema.time_col)) : std::nullopt;
  std::size_t needed = std::max(ucol, icol);
  if (vcol) needed = std::max(needed, *vcol);
  if (tcol) needed = std::max(needed, *tcol);

  std::unordered_map<std::uint64_t, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, delim);
    if (fields.size() <= needed) {
      throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                      std::to_string(needed + 1) + " fields, got " +
                      std::to_string(fields.size()));
    }
    if (fields[ucol].empty() || fields[icol].empty()) {
      throw DataError("line " + std::to_string(line_no) + ": empty user or item key");
    }
    Event ev;
    ev.user = iset.users.intern(fields[ucol]);
    ev.item = iset.items.intern(fields[icol]);
    if (vcol) {
      ev.value = parse_number<double>(fields[*vcol], line_no, "value");
      if (!std::isfinite(ev.value)) {
        throw DataError("line " + std::to_string(line_no) + ": non-finite value");
      }
    }
    if (tcol) ev.timestamp = parse_number<std::int64_t>(fields[*tcol], line_no, "timestamp");

    auto [it, inserted] = seen.emplace(pair_key(ev.user, ev.item), iset.events.size());
    if (inserted) {
      iset.events.push_back(ev);
      continue;
    }
    Event& prev = iset.events[it->second];
    switch (options.dedup) {
      case DedupPolicy::error:
        throw DataError("line " + std::to_string(line_no) + ": duplicate interaction (" +
                        fields[ucol] + ", " + fields[icol] + ")");
      case DedupPolicy::keep_last:
        prev = ev;
        break;
      case DedupPolicy::keep_max:
        if (ev.value > prev.value) prev = ev;
        break;
    }
  }
  if (options.binarize) binarize(iset);
  return iset;
}

InteractionSet load_interactions(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_interactions(in, options);
}

void write_interactions(const std::filesystem::path& path, const InteractionSet& iset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const bool timed = iset.has_timestamps();
  out << "user\titem\tvalue" << (timed ? "\ttime" : "") << '\n';
  out.precision(17);
  for (const auto& e : iset.events) {
    out << iset.users.key(e.user) << '\t' << iset.items.key(e.item) << '\t' << e.value;
    if (timed) out << '\t' << e.timestamp;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void binarize(InteractionSet& iset) {
  std::erase_if(iset.events, [](const Event& e) { return e.value == 0.0; });
  for (auto& e : iset.events) e.value = 1.0;
  iset.binarized = true;
}

InteractionSet filter_interactions(const InteractionSet& iset, const ActivityFilter& filter) {
  std::vector<Event> kept;
  kept.reserve(iset.events.size());
  for (const auto& e : iset.events) {
    if (!filter.min_value || e.value >= *filter.min_value) kept.push_back(e);
  }

  if (filter.min_item_count > 0) {
    std::vector<std::size_t> count(iset.n_items(), 0);
    for (const auto& e : kept) ++count[static_cast<std::size_t>(e.item)];
    std::erase_if(kept, [&](const Event& e) {
      return count[static_cast<std::size_t>(e.item)] < filter.min_item_count;
    });
  }
  if (filter.min_user_count > 0) {
    std::vector<std::size_t> count(iset.n_users(), 0);
    for (const auto& e : kept) ++count[static_cast<std::size_t>(e.user)];
    std::erase_if(kept, [&](const Event& e) {
      return count[static_cast<std::size_t>(e.user)] < filter.min_user_count;
    });
  }

  InteractionSet out;
  out.binarized = iset.binarized;
  out.events.reserve(kept.size());
  for (const auto& e : kept) {
    Event ne = e;
    ne.user = out.users.intern(iset.users.key(e.user));
    ne.item = out.items.intern(iset.items.key(e.item));
    out.events.push_back(ne);
  }
  return out;
}

UserItemMatrix::UserItemMatrix(std::size_t n_items, std::vector<SparseRow> rows)
    : n_items_(n_items) {
  row_ptr_.assign(1, 0);
  row_ptr_.reserve(rows.size() + 1);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  entries_.reserve(total);

  bool all_timed = true;
  for (auto& r : rows) {
    std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.item < b.item; });
    for (std::size_t k = 0; k < r.size(); ++k) {
      const Entry& e = r[k];
      if (e.item < 0 || static_cast<std::size_t>(e.item) >= n_items) {
        throw DataError("item id " + std::to_string(e.item) + " out of range");
      }
      if (k > 0 && r[k - 1].item == e.item) {
        throw DataError("duplicate item id " + std::to_string(e.item) + " within a row");
      }
      if (!std::isfinite(e.value)) throw DataError("non-finite matrix value");
      if (e.value == 0.0) continue;
      if (e.value != 1.0) binarized_ = false;
      if (e.time == kNoTimestamp) all_timed = false;
      entries_.push_back(e);
    }
    row_ptr_.push_back(entries_.size());
  }
  has_timestamps_ = all_timed && !entries_.empty();
}

UserItemMatrix UserItemMatrix::from_interactions(const InteractionSet& iset) {
  std::vector<SparseRow> rows(iset.n_users());
  for (const auto& e : iset.events) {
    rows[static_cast<std::size_t>(e.user)].push_back({e.item, e.value, e.timestamp});
  }
  return UserItemMatrix(iset.n_items(), std::move(rows));
}

UserItemMatrix UserItemMatrix::select_rows(std::span<const UserId> users) const {
  std::vector<SparseRow> rows;
  rows.reserve(users.size());
  for (UserId u : users) {
    if (u < 0 || static_cast<std::size_t>(u) >= n_users()) {
      throw DataError("user id " + std::to_string(u) + " out of range");
    }
    auto r = row(u);
    rows.emplace_back(r.begin(), r.end());
  }
  return UserItemMatrix(n_items_, std::move(rows));
}

UserItemMatrix UserItemMatrix::filter_items(const std::vector<bool>& keep) const {
  if (keep.size() != n_items_) throw DataError("item mask length mismatch");
  std::vector<SparseRow> rows(n_users());
  for (std::size_t u = 0; u < n_users(); ++u) {
    for (const auto& e : row(static_cast<UserId>(u))) {
      if (keep[static_cast<std::size_t>(e.item)]) rows[u].push_back(e);
    }
  }
  return UserItemMatrix(n_items_, std::move(rows));
}

SplitSpec split_strong_generalization(std::size_t n_users, std::size_t n_val, std::size_t n_test,
                                      std::uint64_t seed) {
  if (n_val + n_test >= n_users && !(n_val == 0 && n_test == 0)) {
    throw UsageError("validation + test users (" + std::to_string(n_val + n_test) +
                     ") must be fewer than the number of users (" + std::to_string(n_users) + ")");
  }
  std::vector<UserId> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SplitSpec split;
  split.seed = seed;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                    order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

namespace {

void write_user_list(const std::filesystem::path& file, const std::vector<UserId>& ids,
                     const KeyIndex& users) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  for (UserId u : ids) out << users.key(u) << '\n';
}

std::vector<UserId> read_user_list(const std::filesystem::path& file, const KeyIndex& users) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<UserId> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto id = users.find(line);
    if (!id) {
      throw DataError(file.string() + " line " + std::to_string(line_no) + ": unknown user '" +
                      line + "'");
    }
    ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

void write_split(const std::filesystem::path& dir, const SplitSpec& split, const KeyIndex& users) {
  std::filesystem::create_directories(dir);
  write_user_list(dir / "train_users.txt", split.train, users);
  write_user_list(dir / "validation_users.txt", split.validation, users);
  write_user_list(dir / "test_users.txt", split.test, users);
}

SplitSpec read_split(const std::filesystem::path& dir, const KeyIndex& users) {
  SplitSpec split;
  split.train = read_user_list(dir / "train_users.txt", users);
  split.validation = read_user_list(dir / "validation_users.txt", users);
  split.test = read_user_list(dir / "test_users.txt", users);

  std::vector<UserId> all;
  all.insert(all.end(), split.train.begin(), split.train.end());
  all.insert(all.end(), split.validation.begin(), split.validation.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
    throw DataError("split sets in " + dir.string() + " are not disjoint");
  }
  return split;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::pair<SparseRow, SparseRow> fold_in_split(std::span<const Entry> row, double fraction,
                                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw UsageError("fold-in fraction must lie in (0, 1)");
  }
  const std::size_t n = row.size();
  // The epsilon keeps products like 0.7 * 10 from rounding up past 7.
  auto n_input = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  n_input = std::min(n, std::max<std::size_t>(n_input, n > 0 ? 1 : 0));

  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_input));
  std::sort(pos.begin() + static_cast<std::ptrdiff_t>(n_input), pos.end());

  SparseRow input, held_out;
  input.reserve(n_input);
  held_out.reserve(n - n_input);
  for (std::size_t k = 0; k < n; ++k) (k < n_input ? input : held_out).push_back(row[pos[k]]);
  return {std::move(input), std::move(held_out)};
}

PopularityVector popularity(const UserItemMatrix& matrix) {
  PopularityVector pop{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(matrix.n_items()))};
  for (std::size_t u = 0; u < matrix.n_users(); ++u) {
    for (const auto& e : matrix.row(static_cast<UserId>(u))) pop.counts[e.item] += e.value;
  }
  return pop;
}

PopularityVector popularity(const UserItemMatrix& matrix, std::span<const UserId> users) {
  PopularityVector pop{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(matrix.n_items()))};
  for (UserId u : users) {
    for (const auto& e : matrix.row(u)) pop.counts[e.item] += e.value;
  }
  return pop;
}

std::size_t TimeIntervalIndex::locate(std::int64_t timestamp) const {
  if (boundaries.size() < 2) return 0;
  auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end(), timestamp);
  if (it == boundaries.end()) return size() - 1;
  return static_cast<std::size_t>(it - (boundaries.begin() + 1));
}

TimeIntervalIndex time_intervals(const UserItemMatrix& matrix, std::size_t n_intervals,
                                 std::span<const UserId> users) {
  if (n_intervals == 0) throw UsageError("number of time intervals must be at least 1");
  std::vector<std::int64_t> times;
  for (UserId u : users) {
    for (const auto& e : matrix.row(u)) {
      if (e.time == kNoTimestamp) throw DataError("time intervals need timestamped events");
      times.push_back(e.time);
    }
  }
  if (times.empty()) throw DataError("no events to build time intervals from");
  std::sort(times.begin(), times.end());

  const std::size_t n = times.size();
  TimeIntervalIndex index;
  index.boundaries.reserve(n_intervals + 1);
  index.boundaries.push_back(times.front());
  for (std::size_t k = 0; k < n_intervals; ++k) {
    const std::size_t end = (k + 1) * n / n_intervals;
    index.boundaries.push_back(end > 0 ? times[end - 1] : times.front());
  }

  const auto n_items = static_cast<Eigen::Index>(matrix.n_items());
  index.event_counts.assign(n_intervals, 0);
  index.pop.assign(n_intervals, PopularityVector{Eigen::VectorXd::Zero(n_items)});
  for (UserId u : users) {
    for (const auto& e : matrix.row(u)) {
      const std::size_t k = index.locate(e.time);
      ++index.event_counts[k];
      index.pop[k].counts[e.item] += e.value;
    }
  }
  return index;
}

}  // namespace linrec
