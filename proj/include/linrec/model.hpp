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
#include <string_view>

#include <Eigen/Core>

namespace linrec {

// Item-item weights are kept row-major: scoring a history reads whole rows.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Variant : std::uint32_t {
  rr = 0,         // unconstrained ridge regression
  zero_diag = 1,  // ridge with diag(B) = 0 via Lagrange multipliers
  ease_xy = 2,    // zero-diagonal solution computed from P alone (X = Y)
};

std::string_view to_string(Variant v);

enum class WeightKind : std::uint32_t { uniform = 0, inverse_pop = 1, time_adjusted = 2 };

std::string_view to_string(WeightKind k);

// Per-item positive weights used to re-scale the columns of a trained model.
struct ItemWeightVector {
  Eigen::VectorXd w;
  WeightKind kind = WeightKind::uniform;
  double alpha = 0.0;
};

struct DenseModel {
  RowMatrix b;
  Variant variant = Variant::rr;
  double lambda = 0.0;
  std::optional<Eigen::VectorXd> mu;  // added back to every score
  std::optional<ItemWeightVector> applied_item_weights;
  std::optional<Eigen::VectorXd> gamma;  // Lagrange multipliers of diag(B) = 0
  std::optional<Eigen::VectorXd> popularity;  // training popularity, for fallbacks

  Eigen::Index n_items() const { return b.rows(); }
};

}  // namespace linrec
