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

#include "linrec/gram.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "linrec/error.hpp"

namespace linrec {
namespace {

// Column ranges of the output are owned by one thread each, and every thread
// walks users in ascending id order. Every output entry therefore sees the
// same summation order for any thread count.
void accumulate(const UserItemMatrix& x, const UserItemMatrix& y, const double* user_weights,
                bool upper_only, Eigen::MatrixXd& out) {
  const auto n = static_cast<std::ptrdiff_t>(out.cols());
  const std::size_t n_users = x.n_users();
#pragma omp parallel
  {
    std::ptrdiff_t begin = 0, end = n;
#ifdef _OPENMP
    const auto t = static_cast<std::ptrdiff_t>(omp_get_thread_num());
    const auto nt = static_cast<std::ptrdiff_t>(omp_get_num_threads());
    begin = n * t / nt;
    end = n * (t + 1) / nt;
#endif
    for (std::size_t u = 0; u < n_users; ++u) {
      const auto xr = x.row(static_cast<UserId>(u));
      const auto yr = y.row(static_cast<UserId>(u));
      const double w = user_weights ? user_weights[u] : 1.0;
      auto first = std::lower_bound(yr.begin(), yr.end(), begin,
                                    [](const Entry& e, std::ptrdiff_t j) { return e.item < j; });
      for (auto it = first; it != yr.end() && it->item < end; ++it) {
        const double wy = w * it->value;
        double* col = out.col(it->item).data();
        for (const auto& xe : xr) {
          if (upper_only && xe.item > it->item) break;
          col[xe.item] += xe.value * wy;
        }
      }
    }
  }
}

void mirror_upper(Eigen::MatrixXd& m) {
  m.triangularView<Eigen::StrictlyLower>() = m.transpose().triangularView<Eigen::StrictlyLower>();
}

Eigen::VectorXd column_sums(const UserItemMatrix& m, const double* user_weights) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.n_items()));
  for (std::size_t u = 0; u < m.n_users(); ++u) {
    const double w = user_weights ? user_weights[u] : 1.0;
    for (const auto& e : m.row(static_cast<UserId>(u))) s[e.item] += w * e.value;
  }
  return s;
}

void check_shapes(const UserItemMatrix& x, const UserItemMatrix& y) {
  if (x.n_users() != y.n_users() || x.n_items() != y.n_items()) {
    throw DataError("X is " + std::to_string(x.n_users()) + "x" + std::to_string(x.n_items()) +
                    " but Y is " + std::to_string(y.n_users()) + "x" +
                    std::to_string(y.n_items()));
  }
}

GramStats build(const UserItemMatrix& x, const UserItemMatrix& y, const double* user_weights) {
  check_shapes(x, y);
  const auto n = static_cast<Eigen::Index>(x.n_items());
  GramStats stats;
  stats.n_users = x.n_users();
  stats.g = Eigen::MatrixXd::Zero(n, n);
  accumulate(x, x, user_weights, true, stats.g);
  mirror_upper(stats.g);
  if (&x != &y) {
    stats.c = Eigen::MatrixXd::Zero(n, n);
    accumulate(x, y, user_weights, false, *stats.c);
  }
  stats.x_col_sums = column_sums(x, user_weights);
  return stats;
}

}  // namespace

GramStats build_gram(const UserItemMatrix& x, const UserItemMatrix& y, bool center_y) {
  GramStats stats = build(x, y, nullptr);
  if (center_y) {
    if (stats.n_users == 0) throw DataError("cannot center an empty matrix");
    Eigen::VectorXd mu = column_sums(y, nullptr) / static_cast<double>(stats.n_users);
    if (!stats.c) stats.c = stats.g;
    stats.c->noalias() -= stats.x_col_sums * mu.transpose();
    stats.mu = std::move(mu);
    stats.flags |= static_cast<std::uint32_t>(GramFlag::centered);
  }
  return stats;
}

GramStats build_gram(const UserItemMatrix& x) { return build_gram(x, x, false); }

GramStats build_disjoint_gram(const UserItemMatrix& z) {
  if (!z.binarized()) throw DataError("disjoint-split statistics require binary data");
  GramStats stats = build(z, z, nullptr);
  stats.c = stats.g;
  stats.c->diagonal().setZero();
  stats.flags |= static_cast<std::uint32_t>(GramFlag::disjoint_split);
  return stats;
}

GramStats build_user_weighted_gram(const UserItemMatrix& x, const UserItemMatrix& y,
                                   std::span<const double> user_weights) {
  check_shapes(x, y);
  if (user_weights.size() != x.n_users()) {
    throw DataError("expected " + std::to_string(x.n_users()) + " user weights, got " +
                    std::to_string(user_weights.size()));
  }
  for (std::size_t u = 0; u < user_weights.size(); ++u) {
    if (!(user_weights[u] > 0.0) || !std::isfinite(user_weights[u])) {
      throw DataError("user weight " + std::to_string(u) + " must be finite and positive");
    }
  }
  GramStats stats = build(x, y, user_weights.data());
  stats.flags |= static_cast<std::uint32_t>(GramFlag::user_weighted);
  return stats;
}

}  // namespace linrec
