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

#pragma once

#include <cstdint>
#include <vector>

#include "knnmt/datastore.hpp"
#include "knnmt/prediction.hpp"

namespace knnmt {

// Seeded random-instance drivers behind the `dual-check` and `grad-check`
// subcommands. Trial i of a run with base seed s draws from Rng(s + i), so a
// single failing row can be replayed on its own.

struct RandomInstance {
  Projection proj;
  NeighborSet nbrs;
  Vector query;
};

/// Gaussian W_O (scaled by 1/sqrt(dim)), Gaussian keys and query, uniform
/// neighbor values. Scores are inner products with the query.
RandomInstance MakeRandomInstance(std::uint64_t seed, std::size_t dim, std::size_t vocab,
                                  std::size_t k);

struct DualCheckLimits {
  std::size_t max_dim = 64;
  std::size_t max_vocab = 256;
  std::size_t max_k = 32;
  std::vector<double> temperatures = {5, 10, 20, 50, 100, 150, 200};
};

struct DualCheckRow {
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  std::size_t vocab = 0;
  std::size_t k = 0;
  double lambda = 0.0;
  double temperature = 0.0;
  double residual = 0.0;
};

std::vector<DualCheckRow> RunDualCheck(std::size_t trials, std::uint64_t seed,
                                       const DualCheckLimits& limits = {});

struct GradCheckLimits {
  std::size_t max_dim = 16;
  std::size_t max_vocab = 32;
  std::size_t max_k = 8;
  std::vector<double> alphas = {0.0, 0.1, 1.0};
  double epsilon = 1e-5;
  /// Denominator floor of the relative error |a - f| / max(|a|, |f|, floor).
  double rel_floor = 1e-3;
};

struct GradCheckRow {
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  std::size_t vocab = 0;
  std::size_t k = 0;
  double alpha = 0.0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

std::vector<GradCheckRow> RunGradCheck(std::size_t trials, std::uint64_t seed,
                                       const GradCheckLimits& limits = {});

}  // namespace knnmt
