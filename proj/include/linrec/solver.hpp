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

// Closed-form item-item regression models.
//
// All solvers start from P = (G + lambda I)^-1, computed by a Cholesky
// factorization in O(|I|^3) time and O(|I|^2) memory:
//
//   ridge:          B = P C
//   zero diagonal:  B = B_rr - P diagMat(gamma),  gamma = diag(B_rr) / diag(P)
//   X = Y:          B = I - P diagMat(1 / diag(P))
//
// The zero-diagonal solutions write their diagonal as exact zeros after the
// correction.

#pragma once

#include <span>

#include <Eigen/Core>

#include "linrec/data.hpp"
#include "linrec/gram.hpp"
#include "linrec/model.hpp"

namespace linrec {

struct PrecisionMatrix {
  RowMatrix p;
};

PrecisionMatrix invert_regularized(const Eigen::MatrixXd& g, double lambda);
inline PrecisionMatrix invert_regularized(const GramStats& gram, double lambda) {
  return invert_regularized(gram.g, lambda);
}

DenseModel solve_rr(const GramStats& gram, double lambda);
DenseModel solve_zero_diag(const GramStats& gram, double lambda);

// Requires C = G (a self-product gram, or an explicit C equal to G).
DenseModel solve_ease(const GramStats& gram, double lambda);
// Same solution from a bare Gram matrix; used for sub-blocks.
DenseModel solve_ease(const Eigen::MatrixXd& g, double lambda);

// The same solutions from a precomputed P, for callers that time or reuse the
// inversion separately.
DenseModel rr_from_precision(const PrecisionMatrix& prec, const Eigen::MatrixXd& c, double lambda);
DenseModel zero_diag_from_precision(const PrecisionMatrix& prec, const Eigen::MatrixXd& c,
                                    double lambda);
DenseModel ease_from_precision(PrecisionMatrix prec, double lambda);

DenseModel clamp_nonnegative(const DenseModel& model);

// x^T B (+ mu). Cost O(nnz(history) * |I|).
Eigen::VectorXd predict_scores(const DenseModel& model, std::span<const Entry> history);

}  // namespace linrec
