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

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "linrec/data.hpp"

namespace linrec {

// Provenance bits of a GramStats.
enum class GramFlag : std::uint32_t {
  disjoint_split = 1u << 0,
  user_weighted = 1u << 1,
  centered = 1u << 2,
};

// Sufficient statistics for every solver: G = X^T X and C = X^T Y.
//
// When X and Y are the same matrix, `c` is left empty and cross() aliases G;
// at |I| = 20k a second dense copy would cost another 3 GB.
struct GramStats {
  Eigen::MatrixXd g;
  std::optional<Eigen::MatrixXd> c;
  std::optional<Eigen::VectorXd> mu;   // column means of Y when centered
  Eigen::VectorXd x_col_sums;          // X^T 1 (user-weighted for weighted grams)
  std::size_t n_users = 0;
  std::uint32_t flags = 0;

  const Eigen::MatrixXd& cross() const { return c ? *c : g; }
  bool self_product() const { return !c.has_value(); }
  bool has(GramFlag f) const { return (flags & static_cast<std::uint32_t>(f)) != 0; }
  Eigen::Index n_items() const { return g.rows(); }
};

// G = X^T X, C = X^T Y. With center_y, C = X^T Y - (X^T 1) mu^T where mu are
// the column means of Y; Y itself is never densified. Passing the same
// object for x and y (without centering) stores C implicitly as G.
GramStats build_gram(const UserItemMatrix& x, const UserItemMatrix& y, bool center_y);
GramStats build_gram(const UserItemMatrix& x);

// Expected statistics over random disjoint splits of a binary Z into X and Y,
// in the small-split-fraction limit with constants dropped:
// G = Z^T Z and C = Z^T Z - diagMat(diag(Z^T Z)).
GramStats build_disjoint_gram(const UserItemMatrix& z);

// G = X^T diagMat(w) X, C = X^T diagMat(w) Y for strictly positive user
// weights w. With w = 1 the result is bit-identical to build_gram.
GramStats build_user_weighted_gram(const UserItemMatrix& x, const UserItemMatrix& y,
                                   std::span<const double> user_weights);

}  // namespace linrec
