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

#include "linrec/solver.hpp"

#include <cmath>
#include <string>

#include <lapacke.h>

#include "linrec/error.hpp"

namespace linrec {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::rr: return "rr";
    case Variant::zero_diag: return "zero-diag";
    case Variant::ease_xy: return "ease";
  }
  return "unknown";
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw UsageError("lambda must be a positive finite number, got " + std::to_string(lambda));
  }
}

void check_finite(const RowMatrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

}  // namespace

PrecisionMatrix invert_regularized(const Eigen::MatrixXd& g, double lambda) {
  check_lambda(lambda);
  if (g.rows() != g.cols()) throw DataError("Gram matrix is not square");
  if (!g.allFinite()) throw NumericError("Gram matrix contains non-finite values");

  PrecisionMatrix out{RowMatrix(g)};
  RowMatrix& p = out.p;
  p.diagonal().array() += lambda;
  const auto n = static_cast<lapack_int>(p.rows());
  if (n == 0) return out;

  // Row-major storage of the lower triangle is column-major upper storage.
  lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'U', n, p.data(), n);
  if (info != 0) {
    throw NumericError("Cholesky factorization of G + lambda I failed (info=" +
                       std::to_string(info) + ")");
  }
  info = LAPACKE_dpotri(LAPACK_COL_MAJOR, 'U', n, p.data(), n);
  if (info != 0) {
    throw NumericError("inversion of the Cholesky factor failed (info=" + std::to_string(info) +
                       ")");
  }
  p.triangularView<Eigen::StrictlyUpper>() = p.transpose().triangularView<Eigen::StrictlyUpper>();
  check_finite(p, "precision matrix");
  return out;
}

DenseModel rr_from_precision(const PrecisionMatrix& prec, const Eigen::MatrixXd& c,
                             double lambda) {
  if (c.rows() != prec.p.rows() || c.cols() != prec.p.cols()) {
    throw DataError("cross-product matrix does not match the precision matrix");
  }
  DenseModel model;
  model.b.noalias() = prec.p * c;
  model.variant = Variant::rr;
  model.lambda = lambda;
  check_finite(model.b, "weight matrix");
  return model;
}

DenseModel zero_diag_from_precision(const PrecisionMatrix& prec, const Eigen::MatrixXd& c,
                                    double lambda) {
  if (c.rows() != prec.p.rows() || c.cols() != prec.p.cols()) {
    throw DataError("cross-product matrix does not match the precision matrix");
  }
  const RowMatrix& p = prec.p;
  DenseModel model;
  model.b.noalias() = p * c;

  const Eigen::VectorXd pdiag = p.diagonal();
  if ((pdiag.array() <= 0.0).any()) throw NumericError("precision matrix has a non-positive diagonal");
  Eigen::VectorXd gamma = model.b.diagonal().cwiseQuotient(pdiag);
  model.b.noalias() -= p * gamma.asDiagonal();
  model.b.diagonal().setZero();

  model.variant = Variant::zero_diag;
  model.lambda = lambda;
  model.gamma = std::move(gamma);
  check_finite(model.b, "weight matrix");
  return model;
}

DenseModel ease_from_precision(PrecisionMatrix prec, double lambda) {
  DenseModel model;
  model.b = std::move(prec.p);
  RowMatrix& b = model.b;

  const Eigen::VectorXd pdiag = b.diagonal();
  if ((pdiag.array() <= 0.0).any()) throw NumericError("precision matrix has a non-positive diagonal");
  const Eigen::RowVectorXd scale = (-pdiag.cwiseInverse()).transpose();
  for (Eigen::Index i = 0; i < b.rows(); ++i) b.row(i).array() *= scale.array();
  b.diagonal().setZero();

  model.variant = Variant::ease_xy;
  model.lambda = lambda;
  // Equals diag(B_rr) / diag(P) with B_rr = I - lambda P.
  model.gamma = (pdiag.cwiseInverse().array() - lambda).matrix();
  check_finite(model.b, "weight matrix");
  return model;
}

DenseModel solve_rr(const GramStats& gram, double lambda) {
  DenseModel model = rr_from_precision(invert_regularized(gram, lambda), gram.cross(), lambda);
  model.mu = gram.mu;
  return model;
}

DenseModel solve_zero_diag(const GramStats& gram, double lambda) {
  DenseModel model =
      zero_diag_from_precision(invert_regularized(gram, lambda), gram.cross(), lambda);
  model.mu = gram.mu;
  return model;
}

DenseModel solve_ease(const Eigen::MatrixXd& g, double lambda) {
  return ease_from_precision(invert_regularized(g, lambda), lambda);
}

DenseModel solve_ease(const GramStats& gram, double lambda) {
  if (!gram.self_product() && gram.cross() != gram.g) {
    throw UsageError(
        "the X = Y solver needs C = G; use the zero-diagonal solver for centered, "
        "disjoint-split or distinct X, Y statistics");
  }
  DenseModel model = solve_ease(gram.g, lambda);
  model.mu = gram.mu;
  return model;
}

DenseModel clamp_nonnegative(const DenseModel& model) {
  DenseModel out = model;
  out.b = model.b.cwiseMax(0.0);
  return out;
}

Eigen::VectorXd predict_scores(const DenseModel& model, std::span<const Entry> history) {
  const Eigen::Index n = model.n_items();
  Eigen::VectorXd scores = model.mu ? *model.mu : Eigen::VectorXd::Zero(n);
  for (const auto& e : history) {
    if (e.item < 0 || e.item >= n) {
      throw DataError("history item id " + std::to_string(e.item) + " out of range");
    }
    scores.noalias() += e.value * model.b.row(e.item).transpose();
  }
  return scores;
}

}  // namespace linrec
