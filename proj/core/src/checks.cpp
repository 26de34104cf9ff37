// Copyright 2026 The knnmt-dual Authors
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

#include "knnmt/checks.hpp"

#include <algorithm>
#include <cmath>

#include "knnmt/error.hpp"
#include "knnmt/meta_optimizer.hpp"
#include "knnmt/opl_finetune.hpp"
#include "knnmt/random.hpp"

namespace knnmt {
namespace {

std::size_t Draw(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.Below(hi - lo + 1));
}

}  // namespace

RandomInstance MakeRandomInstance(std::uint64_t seed, std::size_t dim, std::size_t vocab,
                                  std::size_t k) {
  if (dim == 0 || vocab == 0 || k == 0) Fail(ErrorCode::kInvalidArgument, "empty instance");
  Rng rng(seed);
  RandomInstance in;
  in.proj = Projection::Zeros(vocab, dim);
  const double w_sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& w : in.proj.weights.data()) w = rng.Normal(0.0, w_sd);
  in.query.resize(dim);
  for (double& x : in.query) x = rng.Normal();
  in.nbrs.metric = Metric::kInnerProduct;
  in.nbrs.query_dim = dim;
  for (std::size_t j = 0; j < k; ++j) {
    Neighbor n;
    n.index = j;
    n.key.resize(dim);
    for (double& x : n.key) x = rng.Normal();
    n.value = static_cast<TokenId>(rng.Below(vocab));
    n.score = Dot(n.key, in.query);
    in.nbrs.entries.push_back(std::move(n));
  }
  return in;
}

std::vector<DualCheckRow> RunDualCheck(std::size_t trials, std::uint64_t seed,
                                       const DualCheckLimits& limits) {
  if (limits.max_dim == 0 || limits.max_vocab < 2 || limits.max_k == 0 ||
      limits.temperatures.empty()) {
    Fail(ErrorCode::kInvalidArgument, "invalid dual-check limits");
  }
  std::vector<DualCheckRow> rows;
  rows.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    DualCheckRow row;
    row.seed = seed + t;
    Rng shape(SplitMix(row.seed));
    row.dim = Draw(shape, 1, limits.max_dim);
    row.vocab = Draw(shape, 2, limits.max_vocab);
    row.k = Draw(shape, 1, limits.max_k);
    row.temperature = limits.temperatures[shape.Below(limits.temperatures.size())];
    row.lambda = shape.Uniform();
    const auto in = MakeRandomInstance(row.seed, row.dim, row.vocab, row.k);
    row.residual = DualResidual(in.proj, in.nbrs, in.query, row.lambda, row.temperature);
    rows.push_back(row);
  }
  return rows;
}

std::vector<GradCheckRow> RunGradCheck(std::size_t trials, std::uint64_t seed,
                                       const GradCheckLimits& limits) {
  if (limits.max_dim == 0 || limits.max_vocab < 2 || limits.max_k == 0 ||
      limits.alphas.empty() || !(limits.epsilon > 0.0) || !(limits.rel_floor > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "invalid grad-check limits");
  }
  std::vector<GradCheckRow> rows;
  rows.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    GradCheckRow row;
    row.seed = seed + t;
    Rng shape(SplitMix(row.seed));
    row.dim = Draw(shape, 1, limits.max_dim);
    row.vocab = Draw(shape, 2, limits.max_vocab);
    row.k = Draw(shape, 1, limits.max_k);
    row.alpha = limits.alphas[t % limits.alphas.size()];
    const auto in = MakeRandomInstance(row.seed, row.dim, row.vocab, row.k);
    const auto analytic = OplGradient(in.proj, in.nbrs, row.alpha);
    const auto fd = FdGradient(in.proj, in.nbrs, row.alpha, limits.epsilon);
    const auto a = analytic.delta.data();
    const auto f = fd.delta.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double err = std::abs(a[i] - f[i]);
      const double denom = std::max({std::abs(a[i]), std::abs(f[i]), limits.rel_floor});
      row.max_abs_error = std::max(row.max_abs_error, err);
      row.max_rel_error = std::max(row.max_rel_error, err / denom);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace knnmt
