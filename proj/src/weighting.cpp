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

#include "linrec/weighting.hpp"

#include <cmath>
#include <string>

#include "linrec/error.hpp"

namespace linrec {

std::string_view to_string(WeightKind k) {
  switch (k) {
    case WeightKind::uniform: return "uniform";
    case WeightKind::inverse_pop: return "inverse-pop";
    case WeightKind::time_adjusted: return "time";
  }
  return "unknown";
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw UsageError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

void check_weights(const Eigen::VectorXd& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw NumericError("item weight " + std::to_string(i) +
                         " is not finite and positive; raise epsilon");
    }
  }
}

}  // namespace

ItemWeightVector popularity_weights(const PopularityVector& pop, double alpha, double epsilon) {
  check_alpha(alpha);
  ItemWeightVector out;
  out.kind = WeightKind::inverse_pop;
  out.alpha = alpha;
  out.w = (pop.counts.array() + epsilon).pow(-alpha).matrix();
  check_weights(out.w);
  return out;
}

ItemWeightVector time_popularity_weights(const PopularityVector& pop_t,
                                         const PopularityVector& pop, double alpha,
                                         double epsilon) {
  check_alpha(alpha);
  if (pop_t.counts.size() != pop.counts.size()) {
    throw DataError("popularity vectors differ in length");
  }
  ItemWeightVector out;
  out.kind = WeightKind::time_adjusted;
  out.alpha = alpha;
  out.w = ((pop_t.counts.array() + epsilon) / (pop.counts.array() + epsilon)).pow(alpha).matrix();
  check_weights(out.w);
  return out;
}

DenseModel apply_item_rescaling(const DenseModel& model, const ItemWeightVector& weights) {
  if (model.variant == Variant::rr) {
    throw UsageError("item re-scaling applies to zero-diagonal models only");
  }
  if (weights.w.size() != model.n_items()) {
    throw DataError("weight vector has " + std::to_string(weights.w.size()) +
                    " entries, model has " + std::to_string(model.n_items()) + " items");
  }
  DenseModel out = model;
  out.b = model.b * weights.w.asDiagonal();
  if (model.mu) out.mu = model.mu->cwiseProduct(weights.w);
  out.applied_item_weights = weights;
  // Repeated re-scaling composes.
  if (model.applied_item_weights) {
    out.applied_item_weights->w = weights.w.cwiseProduct(model.applied_item_weights->w);
  }
  return out;
}

}  // namespace linrec
