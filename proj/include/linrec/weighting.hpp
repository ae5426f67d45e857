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

// Item re-scaling of trained zero-diagonal models.
//
// Training on targets Y diagMat(w) yields B diagMat(w), so weights can change
// at serving time without retraining: apply_item_rescaling scales a copy of
// the columns of B.

#pragma once

#include "linrec/data.hpp"
#include "linrec/model.hpp"

namespace linrec {

inline constexpr double kDefaultPopularityEpsilon = 1e-9;

// w_i = 1 / (pop_i + epsilon)^alpha. Unnormalized; ranking ignores scale.
ItemWeightVector popularity_weights(const PopularityVector& pop, double alpha,
                                    double epsilon = kDefaultPopularityEpsilon);

// w_i = ((pop_t_i + epsilon) / (pop_i + epsilon))^alpha.
ItemWeightVector time_popularity_weights(const PopularityVector& pop_t,
                                         const PopularityVector& pop, double alpha,
                                         double epsilon = kDefaultPopularityEpsilon);

// B diagMat(w) for zero-diagonal variants. The input model is not modified.
DenseModel apply_item_rescaling(const DenseModel& model, const ItemWeightVector& weights);

}  // namespace linrec
