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

#include <optional>
#include <span>

#include "knnmt/datastore.hpp"
#include "knnmt/prediction.hpp"
#include "knnmt/types.hpp"

namespace knnmt {

enum class GradKind {
  kMeta,      // implicit update produced by kNN interpolation
  kAnalytic,  // back-propagated OPL fine-tuning gradient
};

/// Scale factors associated with a gradient: (lambda, T) for meta gradients,
/// (eta, alpha) for analytic ones.
struct ScaleNote {
  double first = 0.0;
  double second = 0.0;
};

struct GradMatrix {
  Matrix delta;
  GradKind kind = GradKind::kMeta;
  std::optional<ScaleNote> scale_note;
};

// The relaxed (softmax-free) forms below are an analysis path only; decoding
// always goes through the normalized distributions in prediction.hpp.

/// W_O h.
Vector RelaxedNmt(const Projection& proj, std::span<const double> h);

/// (V_m K_m^T h) / T, with V_m the one-hot value matrix of the neighbors.
Vector RelaxedKnn(const NeighborSet& nbrs, std::span<const double> h, double temperature,
                  std::size_t vocab_size);

/// Sum_j onehot(value_j) (x) key_j, i.e. V_m K_m^T.
Matrix ValueKeyOuter(const NeighborSet& nbrs, std::size_t vocab_size, std::size_t dim);

/// Delta W_kNN = V_m K_m^T - T * W_O.
GradMatrix MetaGradient(const NeighborSet& nbrs, const Projection& proj, double temperature);

/// (W_O + (lambda / T) * Delta W_kNN) h, evaluated by materializing the
/// updated projection.
Vector DualOutput(const Projection& proj, const NeighborSet& nbrs, std::span<const double> h,
                  double lambda, double temperature);

/// || dual_output - [relaxed_nmt + lambda (relaxed_knn - relaxed_nmt)] ||
///   / max(1, || dual_output ||)
double DualResidual(const Projection& proj, const NeighborSet& nbrs,
                    std::span<const double> h, double lambda, double temperature);

}  // namespace knnmt
