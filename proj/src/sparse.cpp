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

#include "linrec/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "linrec/error.hpp"
#include "linrec/solver.hpp"

namespace linrec {

bool SparsityPattern::contains(ItemId i, ItemId j) const {
  auto col = column(j);
  return std::binary_search(col.begin(), col.end(), i);
}

double SparsityPattern::density() const {
  if (n == 0) return 0.0;
  return static_cast<double>(nnz()) / (static_cast<double>(n) * static_cast<double>(n));
}

double SparseModel::at(ItemId i, ItemId j) const {
  auto col = pattern.column(j);
  auto it = std::lower_bound(col.begin(), col.end(), i);
  if (it == col.end() || *it != i) return 0.0;
  return values[pattern.col_ptr[static_cast<std::size_t>(j)] +
                static_cast<std::size_t>(it - col.begin())];
}

RowMatrix SparseModel::to_dense() const {
  RowMatrix b = RowMatrix::Zero(n_items(), n_items());
  for (std::size_t j = 0; j < pattern.n; ++j) {
    for (std::size_t k = pattern.col_ptr[j]; k < pattern.col_ptr[j + 1]; ++k) {
      b(pattern.row_idx[k], static_cast<Eigen::Index>(j)) = values[k];
    }
  }
  return b;
}

CorrelationMatrix correlation_from_gram(const GramStats& gram) {
  if (gram.n_users < 2) throw DataError("correlations need at least two users");
  const auto n = gram.n_items();
  const double inv_users = 1.0 / static_cast<double>(gram.n_users);
  const Eigen::VectorXd mean = gram.x_col_sums * inv_users;
  Eigen::VectorXd sd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double var = gram.g(i, i) * inv_users - mean[i] * mean[i];
    sd[i] = var > 0.0 ? std::sqrt(var) : 0.0;
  }

  CorrelationMatrix out{Eigen::MatrixXd::Zero(n, n)};
  Eigen::MatrixXd& cor = out.cor;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) {
        cor(i, j) = 1.0;
      } else if (sd[i] > 0.0 && sd[j] > 0.0) {
        const double c = (gram.g(i, j) * inv_users - mean[i] * mean[j]) / (sd[i] * sd[j]);
        cor(i, j) = std::clamp(c, -1.0, 1.0);
      }
    }
  }
  return out;
}

namespace {

template <typename Matrix>
SparsityPattern threshold_impl(const Matrix& m, double theta, bool use_abs, std::size_t n_max,
                               PatternSource source) {
  if (m.rows() != m.cols()) throw DataError("pattern source matrix is not square");
  if (!(theta >= 0.0)) throw UsageError("threshold must be non-negative");
  if (n_max < 1) throw UsageError("n_max must be at least 1");

  SparsityPattern a;
  a.n = static_cast<std::size_t>(m.rows());
  a.threshold = theta;
  a.source = source;
  a.n_max = n_max;
  a.col_ptr.assign(1, 0);
  a.col_ptr.reserve(a.n + 1);

  std::vector<ItemId> cand;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    cand.clear();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i == j) continue;
      const double v = use_abs ? std::abs(m(i, j)) : m(i, j);
      if (v >= theta) cand.push_back(static_cast<ItemId>(i));
    }
    if (cand.size() + 1 > n_max) {
      auto mag = [&](ItemId i) { return std::abs(m(i, j)); };
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n_max - 1),
                       cand.end(), [&](ItemId x, ItemId y) {
                         const double mx = mag(x), my = mag(y);
                         return mx != my ? mx > my : x < y;
                       });
      cand.resize(n_max - 1);
    }
    cand.push_back(static_cast<ItemId>(j));
    std::sort(cand.begin(), cand.end());
    a.row_idx.insert(a.row_idx.end(), cand.begin(), cand.end());
    a.col_ptr.push_back(a.row_idx.size());
  }
  return a;
}

}  // namespace

SparsityPattern threshold_pattern(const Eigen::MatrixXd& m, double theta, bool use_abs,
                                  std::size_t n_max, PatternSource source) {
  return threshold_impl(m, theta, use_abs, n_max, source);
}

SparsityPattern threshold_pattern(const RowMatrix& m, double theta, bool use_abs,
                                  std::size_t n_max, PatternSource source) {
  return threshold_impl(m, theta, use_abs, n_max, source);
}

SparseModel mask_model(const DenseModel& model, const SparsityPattern& pattern) {
  if (static_cast<std::size_t>(model.n_items()) != pattern.n) {
    throw DataError("pattern size does not match the model");
  }
  if (model.variant == Variant::rr) {
    throw UsageError("masking requires a zero-diagonal model");
  }
  SparseModel out;
  out.pattern = pattern;
  out.lambda = model.lambda;
  out.values.resize(pattern.nnz());
  for (std::size_t j = 0; j < pattern.n; ++j) {
    for (std::size_t k = pattern.col_ptr[j]; k < pattern.col_ptr[j + 1]; ++k) {
      const auto i = static_cast<std::size_t>(pattern.row_idx[k]);
      out.values[k] = i == j ? 0.0 : model.b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

std::vector<std::vector<ItemId>> block_partition(const SparsityPattern& pattern,
                                                 const CorrelationMatrix& cor) {
  const std::size_t n = pattern.n;
  if (static_cast<std::size_t>(cor.cor.rows()) != n) {
    throw DataError("correlation matrix size does not match the pattern");
  }
  std::vector<double> max_cor(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) best = std::max(best, std::abs(cor.cor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    max_cor[j] = best;
  }

  std::vector<ItemId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
    const auto na = pattern.column(a).size(), nb = pattern.column(b).size();
    if (na != nb) return na > nb;
    const double ca = max_cor[static_cast<std::size_t>(a)], cb = max_cor[static_cast<std::size_t>(b)];
    if (ca != cb) return ca > cb;
    return a < b;
  });

  std::vector<bool> removed(n, false);
  std::vector<std::vector<ItemId>> blocks;
  for (ItemId head : order) {
    if (removed[static_cast<std::size_t>(head)]) continue;
    auto col = pattern.column(head);
    blocks.emplace_back(col.begin(), col.end());
    for (ItemId j : col) removed[static_cast<std::size_t>(j)] = true;
    // A column always contains its own index; be robust to patterns that don't.
    removed[static_cast<std::size_t>(head)] = true;
  }
  return blocks;
}

std::vector<RowMatrix> solve_blocks(const GramStats& gram,
                                    const std::vector<std::vector<ItemId>>& blocks,
                                    double lambda) {
  if (!gram.self_product() && gram.cross() != gram.g) {
    throw UsageError("block-wise sparse training requires X = Y statistics");
  }
  std::vector<RowMatrix> out(blocks.size());
  std::exception_ptr failure;
  const auto n_blocks = static_cast<std::ptrdiff_t>(blocks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n_blocks; ++k) {
    try {
      const auto& idx = blocks[static_cast<std::size_t>(k)];
      Eigen::MatrixXd sub = gram.g(idx, idx);
      out[static_cast<std::size_t>(k)] = solve_ease(sub, lambda).b;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

SparseModel aggregate_blocks(const std::vector<std::vector<ItemId>>& blocks,
                             const std::vector<RowMatrix>& submatrices,
                             const SparsityPattern& pattern) {
  if (blocks.size() != submatrices.size()) throw DataError("blocks and solutions differ in count");
  std::vector<double> sums(pattern.nnz(), 0.0);
  std::vector<std::uint32_t> counts(pattern.nnz(), 0);

  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& members = blocks[k];
    const RowMatrix& sub = submatrices[k];
    if (sub.rows() != static_cast<Eigen::Index>(members.size()) || sub.cols() != sub.rows()) {
      throw DataError("block solution " + std::to_string(k) + " has the wrong shape");
    }
    if (!std::is_sorted(members.begin(), members.end())) {
      throw DataError("block " + std::to_string(k) + " is not sorted");
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
      const auto j = static_cast<std::size_t>(members[c]);
      std::size_t pos = pattern.col_ptr[j];
      const std::size_t end = pattern.col_ptr[j + 1];
      std::size_t r = 0;
      // Both index lists are sorted: merge.
      while (pos < end && r < members.size()) {
        if (pattern.row_idx[pos] < members[r]) {
          ++pos;
        } else if (members[r] < pattern.row_idx[pos]) {
          ++r;
        } else {
          sums[pos] += sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
          ++counts[pos];
          ++pos;
          ++r;
        }
      }
    }
  }

  SparseModel out;
  out.pattern = pattern;
  out.values.resize(pattern.nnz());
  for (std::size_t j = 0; j < pattern.n; ++j) {
    for (std::size_t k = pattern.col_ptr[j]; k < pattern.col_ptr[j + 1]; ++k) {
      const bool diag = static_cast<std::size_t>(pattern.row_idx[k]) == j;
      out.values[k] = (diag || counts[k] == 0) ? 0.0 : sums[k] / counts[k];
    }
  }
  return out;
}

SparseModel train_sparse(const GramStats& gram, double theta, std::size_t n_max, double lambda) {
  const CorrelationMatrix cor = correlation_from_gram(gram);
  const SparsityPattern pattern = threshold_pattern(cor.cor, theta, true, n_max);
  const auto blocks = block_partition(pattern, cor);
  const auto subs = solve_blocks(gram, blocks, lambda);
  SparseModel model = aggregate_blocks(blocks, subs, pattern);
  model.lambda = lambda;
  return model;
}

Eigen::VectorXd predict_scores(const SparseModel& model, std::span<const Entry> history) {
  const auto n = model.n_items();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (const auto& e : history) {
    if (e.item < 0 || e.item >= n) {
      throw DataError("history item id " + std::to_string(e.item) + " out of range");
    }
    x[e.item] += e.value;
  }
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
  const auto& a = model.pattern;
  for (std::size_t j = 0; j < a.n; ++j) {
    double s = 0.0;
    for (std::size_t k = a.col_ptr[j]; k < a.col_ptr[j + 1]; ++k) s += x[a.row_idx[k]] * model.values[k];
    scores[static_cast<Eigen::Index>(j)] = s;
  }
  return scores;
}

}  // namespace linrec
