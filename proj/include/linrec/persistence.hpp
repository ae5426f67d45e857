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

// On-disk formats. All integers and floats are little-endian; matrices are
// row-major float64.
//
// Gram file:
//   "GRAM" u32 version u64 n_items u64 n_users u32 flags u8 has_mu u8 c_is_g
//   G[n*n] C[n*n] mu[n]? x_col_sums[n]
//
// Dense model file:
//   "EASE" u32 version u64 n_items u32 variant f64 lambda u32 flags
//   key table (n x {u32 length, bytes}) B[n*n]
//   mu[n]?  {u32 kind, f64 alpha, w[n]}?  gamma[n]?  popularity[n]?
//   flags: bit 0 mu, bit 1 item weights, bit 2 gamma, bit 3 popularity
//
// Sparse model file:
//   "SPRS" u32 version u64 n_items u64 nnz f64 lambda f64 threshold
//   u64 n_max u32 source  col_ptr[n+1] (u64) row_idx[nnz] (u32)
//   values[nnz] (f64)  key table
//
// Writers go through a temporary file in the target directory and rename it
// into place, so a failed run never leaves a partial file behind.

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "linrec/data.hpp"
#include "linrec/gram.hpp"
#include "linrec/model.hpp"
#include "linrec/sparse.hpp"

namespace linrec {

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

void save_gram(const std::filesystem::path& path, const GramStats& gram);
GramStats load_gram(const std::filesystem::path& path);

struct DenseModelFile {
  DenseModel model;
  std::vector<std::string> item_keys;
};

void save_dense_model(const std::filesystem::path& path, const DenseModel& model,
                      const std::vector<std::string>& item_keys);
DenseModelFile load_dense_model(const std::filesystem::path& path);

struct SparseModelFile {
  SparseModel model;
  std::vector<std::string> item_keys;
};

void save_sparse_model(const std::filesystem::path& path, const SparseModel& model,
                       const std::vector<std::string>& item_keys);
SparseModelFile load_sparse_model(const std::filesystem::path& path);

enum class ModelFileKind { dense, sparse };
ModelFileKind peek_model_kind(const std::filesystem::path& path);

// CSV with header "item,weight"; every item of `items` must be listed.
void write_item_weights(const std::filesystem::path& path, const ItemWeightVector& weights,
                        const std::vector<std::string>& item_keys);
ItemWeightVector read_item_weights(const std::filesystem::path& path, const KeyIndex& items);

// CSV with header "item,popularity".
void write_popularity(const std::filesystem::path& path, const PopularityVector& pop,
                      const std::vector<std::string>& item_keys);

}  // namespace linrec
