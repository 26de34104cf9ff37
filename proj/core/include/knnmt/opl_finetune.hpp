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
#include <span>
#include <vector>

#include "knnmt/datastore.hpp"
#include "knnmt/meta_optimizer.hpp"
#include "knnmt/prediction.hpp"
#include "knnmt/types.hpp"

namespace knnmt {

/// Explicit OPL fine-tuning settings.
struct FtHyper {
  double lr = 4e-3;
  double alpha = 0.0;
  std::size_t steps = 1;
  std::size_t batch = 32;
  /// Validation cadence (in steps) for best-checkpoint selection.
  std::size_t eval_interval = 50;
  std::uint64_t seed = 0;
};

void ValidateFtHyper(const FtHyper& ft);

struct GridSpec {
  std::vector<double> lr_candidates;
  std::vector<double> alpha_candidates;

  /// lr bases 1..9 scaled by 1e-1 ... 1e-4 (36 values, descending scale),
  /// alpha in {0, 0.01, 0.05, 0.1, 0.5, 1, 5, 10}.
  static GridSpec Default();
};

enum class GridMode {
  /// Every (lr, alpha) combination, lr-major.
  kFull,
  /// lr swept at the first alpha, then alpha swept at the chosen lr.
  kStaged,
};

/// Which error signal multiplies the keys: V_m - P_m for fine-tuning, V_m
/// alone for the kNN-MT correspondence.
enum class ErrorSignal {
  kValueMinusPrediction,
  kValueOnly,
};

/// Sum_j log softmax(W_O K_j)[V_j] - (alpha / 2) ||W_O||_F^2
double OplLoss(const Projection& proj, const NeighborSet& nbrs, double alpha);
double OplLoss(const Projection& proj, std::span<const ContextPair> pairs, double alpha);

/// (V_m - P_m) K_m^T - alpha W_O
GradMatrix OplGradient(const Projection& proj, const NeighborSet& nbrs, double alpha,
                       ErrorSignal signal = ErrorSignal::kValueMinusPrediction);
GradMatrix OplGradient(const Projection& proj, std::span<const ContextPair> pairs, double alpha,
                       ErrorSignal signal = ErrorSignal::kValueMinusPrediction);

/// Central differences of OplLoss, one weight entry at a time.
GradMatrix FdGradient(const Projection& proj, const NeighborSet& nbrs, double alpha,
                      double epsilon);

/// W' = W + lr * delta (ascent on the log-likelihood).
Projection SgdStep(const Projection& proj, const GradMatrix& grad, double lr);

/// Validation perplexity of the plain projection, from log-softmax.
double ValidationPerplexity(const Projection& proj, std::span<const ContextPair> pairs);

/// Teacher-forced per-timestep fine-tuning: for every step a fresh copy of
/// W_O takes `ft.steps` SGD steps on that step's neighbors, then scores the
/// gold token. `neighbor_sets[i]` belongs to `steps[i]`.
std::vector<ScoredToken> FinetunePerStep(const Projection& proj,
                                         std::span<const NeighborSet> neighbor_sets,
                                         std::span<const ContextPair> steps,
                                         const FtHyper& ft);

/// As above, retrieving `hyper.k` neighbors under `hyper.metric` first.
std::vector<ScoredToken> FinetunePerStep(const Projection& proj, const Datastore& ds,
                                         const Hyper& hyper, std::span<const ContextPair> steps,
                                         const FtHyper& ft, bool retain_neighbors = false);

struct FinetuneResult {
  Projection projection;
  double initial_val_ppl = 0.0;
  double best_val_ppl = 0.0;
  /// Step count at which the returned weights were captured (0 = initial).
  std::size_t best_step = 0;
};

/// Mini-batch ascent over all training pairs. Each step applies
/// W += lr * (mean over the batch of (onehot - P) x^T - alpha W); the weights
/// with the lowest validation perplexity seen (checked every eval_interval
/// steps and at the end) are returned.
FinetuneResult FinetuneFull(const Projection& proj, std::span<const ContextPair> train,
                            const FtHyper& ft, std::span<const ContextPair> val);

struct GridCell {
  double lr = 0.0;
  double alpha = 0.0;
  double val_ppl = 0.0;
};

struct GridResult {
  FtHyper best;
  double best_val_ppl = 0.0;
  std::vector<GridCell> cells;
};

/// Selects (lr, alpha) for FinetuneFull by validation perplexity; ties go to
/// the earlier cell in grid order. `base` supplies steps, batch and seed.
GridResult GridSearch(const Projection& proj, std::span<const ContextPair> train,
                      std::span<const ContextPair> val, const GridSpec& grid,
                      const FtHyper& base, GridMode mode = GridMode::kFull);

/// Same selection rule for the per-timestep variant, using precomputed
/// neighbor sets of the validation steps.
GridResult GridSearchPerStep(const Projection& proj, std::span<const NeighborSet> neighbor_sets,
                             std::span<const ContextPair> val, const GridSpec& grid,
                             const FtHyper& base, GridMode mode = GridMode::kFull);

}  // namespace knnmt
