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

// Sparse item-item models.
//
// The approximate trainer runs in three steps:
//  1. threshold |cor(X, X)| to get a pattern A, capped at n_max entries per
//     column;
//  2. walk the columns of A (most entries first), and for each unvisited
//     column i solve the X = Y problem on the dense Gram sub-matrix of
//     I_k = {j : A_ji = 1};
//  3. average the block solutions where they overlap and mask to A.
// For block-diagonal A the result equals the masked dense solution.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "linrec/data.hpp"
#include "linrec/gram.hpp"
#include "linrec/model.hpp"

namespace linrec {

enum class PatternSource : std::uint32_t { model_abs = 0, correlation = 1, gram_count = 2 };

// Square binary pattern in compressed-column form; row indices are sorted
// within each column.
struct SparsityPattern {
  std::size_t n = 0;
  std::vector<std::size_t> col_ptr{0};
  std::vector<ItemId> row_idx;
  double threshold = 0.0;
  PatternSource source = PatternSource::correlation;
  std::size_t n_max = 0;

  std::size_t nnz() const { return row_idx.size(); }
  std::span<const ItemId> column(ItemId j) const {
    const auto b = col_ptr[static_cast<std::size_t>(j)];
    return {row_idx.data() + b, col_ptr[static_cast<std::size_t>(j) + 1] - b};
  }
  bool contains(ItemId i, ItemId j) const;
  // Fraction of non-zero entries.
  double density() const;
};

struct CorrelationMatrix {
  Eigen::MatrixXd cor;
};

struct SparseModel {
  SparsityPattern pattern;
  std::vector<double> values;  // aligned with pattern.row_idx
  double lambda = 0.0;

  Eigen::Index n_items() const { return static_cast<Eigen::Index>(pattern.n); }
  // B_ij, zero outside the pattern.
  double at(ItemId i, ItemId j) const;
  RowMatrix to_dense() const;
};

// Pearson correlations from G, the column sums of X and the user count.
// Columns with zero variance get zero correlations (and 1 on the diagonal).
CorrelationMatrix correlation_from_gram(const GramStats& gram);

// A_ij = 1 iff |m_ij| >= theta (m_ij >= theta without use_abs). Columns with
// more than n_max entries keep the diagonal plus the n_max - 1 largest
// magnitudes, ties to the lower index. The diagonal is always set.
SparsityPattern threshold_pattern(const Eigen::MatrixXd& m, double theta, bool use_abs,
                                  std::size_t n_max,
                                  PatternSource source = PatternSource::correlation);
SparsityPattern threshold_pattern(const RowMatrix& m, double theta, bool use_abs,
                                  std::size_t n_max, PatternSource source = PatternSource::model_abs);

// A ⊙ B for a zero-diagonal dense model.
SparseModel mask_model(const DenseModel& model, const SparsityPattern& pattern);

// Item sets I_k, in emission order. Columns are visited by (nnz desc,
// max off-diagonal |cor| desc, index asc); each emitted set is column i of A.
std::vector<std::vector<ItemId>> block_partition(const SparsityPattern& pattern,
                                                 const CorrelationMatrix& cor);

// X = Y solution on the Gram sub-matrix of each block.
std::vector<RowMatrix> solve_blocks(const GramStats& gram,
                                    const std::vector<std::vector<ItemId>>& blocks, double lambda);

// Mean over all blocks containing both i and j, at every pattern position.
SparseModel aggregate_blocks(const std::vector<std::vector<ItemId>>& blocks,
                             const std::vector<RowMatrix>& submatrices,
                             const SparsityPattern& pattern);

SparseModel train_sparse(const GramStats& gram, double theta, std::size_t n_max, double lambda);

// x^T B over the sparse weights.
Eigen::VectorXd predict_scores(const SparseModel& model, std::span<const Entry> history);

}  // namespace linrec
