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

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "knnmt/datastore.hpp"
#include "knnmt/types.hpp"

namespace knnmt {

/// Output projection layer: logits = weights * h, weights is |Y| x d_in.
struct Projection {
  Matrix weights;

  Projection() = default;
  explicit Projection(Matrix w) : weights(std::move(w)) {}
  static Projection Zeros(std::size_t vocab_size, std::size_t dim) {
    return Projection(Matrix(vocab_size, dim));
  }

  std::size_t vocab_size() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }

  friend bool operator==(const Projection&, const Projection&) = default;
};

/// "KNPJ" file: magic, u16 version (1), u32 vocab_size, u32 dim, then the
/// weights row-major as little-endian f64.
void SaveProjection(const Projection& proj, const std::filesystem::path& path);
Projection LoadProjection(const std::filesystem::path& path);


/// A distribution over the vocabulary.
using ProbVector = std::vector<double>;

/// kNN-MT retrieval and interpolation settings.
struct Hyper {
  std::size_t k = 8;
  double lambda = 0.6;
  double temperature = 20.0;
  Metric metric = Metric::kInnerProduct;
};

void ValidateHyper(const Hyper& hyper);

/// Numerically stable softmax (max subtracted).
ProbVector Softmax(std::span<const double> logits);
Vector LogSoftmax(std::span<const double> logits);

ProbVector NmtDistribution(const Projection& proj, std::span<const double> h);

/// p_kNN(v) proportional to sum over neighbors with value v of exp(score / T).
ProbVector KnnDistribution(const NeighborSet& nbrs, double temperature,
                           std::size_t vocab_size);

/// lambda * p_knn + (1 - lambda) * p_nmt. The endpoints return copies of the
/// corresponding input.
ProbVector Interpolate(std::span<const double> p_knn, std::span<const double> p_nmt,
                       double lambda);

/// Argmax, ties to the lowest token id.
TokenId GreedyDecodeStep(std::span<const double> p);

/// True when p is non-negative and sums to 1 within `tol`.
bool IsDistribution(std::span<const double> p, double tol = 1e-9);

enum class ScoreVariant {
  kNmt,
  kKnn,
  kInterpolated,
};

/// Per-step (k, lambda) chosen by an interpolation policy.
struct StepSettings {
  std::size_t k;
  double lambda;
};

/// Hook for adaptive variants: receives the timestep position and query and
/// returns the settings to use. An empty policy means the constant policy
/// taken from Hyper (vanilla kNN-MT).
using InterpolationPolicy =
    std::function<StepSettings(std::size_t position, std::span<const double> query)>;

struct ScoreOptions {
  ScoreVariant variant = ScoreVariant::kInterpolated;
  bool retain_neighbors = false;
  InterpolationPolicy policy;
};

struct ScoredToken {
  std::size_t position = 0;
  TokenId gold_token = 0;
  double p_gold = 0.0;
  /// log p_gold computed in the log domain where possible.
  double log_p_gold = 0.0;
  TokenId predicted = 0;
  std::optional<NeighborSet> neighbors;
};

/// Teacher-forced scoring of a sequence of (context vector, gold token) steps.
std::vector<ScoredToken> ScoreSequence(const Projection& proj, const Datastore& ds,
                                       const Hyper& hyper,
                                       std::span<const ContextPair> steps,
                                       const ScoreOptions& options = {});

/// Gold-label probabilities captured from a scored sequence.
std::vector<double> GoldProbabilities(std::span<const ScoredToken> scored);

}  // namespace knnmt

namespace knnmt {

/// kNN-MT hyper-parameter search space.
struct KnnGrid {
  std::vector<std::size_t> ks;
  std::vector<double> lambdas;
  std::vector<double> temperatures;

  /// k in {2,4,8,16,32}, lambda in {0.1,...,0.9}, T in {5,10,20,50,100,150,200}.
  static KnnGrid Default();
};

struct KnnTuneResult {
  Hyper best;
  double val_ppl = 0.0;
  std::size_t cells = 0;
};

/// Picks (k, lambda, T) minimizing validation perplexity of the interpolated
/// distribution; ties go to the earliest cell in k-major, then T, then lambda
/// order. Retrieval runs once per step at the largest k.
KnnTuneResult TuneKnn(const Projection& proj, const Datastore& ds, Metric metric,
                      std::span<const ContextPair> val, const KnnGrid& grid);

}  // namespace knnmt
