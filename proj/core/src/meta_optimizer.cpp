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

#include "knnmt/meta_optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "knnmt/error.hpp"

namespace knnmt {
namespace {

void CheckNeighbors(const NeighborSet& nbrs, std::size_t vocab_size, std::size_t dim) {
  if (nbrs.empty()) Fail(ErrorCode::kEmptyInput, "empty neighbor set");
  for (const auto& n : nbrs.entries) {
    if (n.key.size() != dim) Fail(ErrorCode::kDimensionMismatch, "neighbor key length != dim");
    if (n.value >= vocab_size) Fail(ErrorCode::kOutOfRange, "neighbor value >= vocab_size");
  }
}

void CheckTemperature(double temperature) {
  if (!(temperature > 0.0)) Fail(ErrorCode::kInvalidArgument, "temperature must be > 0");
}

}  // namespace

Vector RelaxedNmt(const Projection& proj, std::span<const double> h) {
  return MatVec(proj.weights, h);
}

Vector RelaxedKnn(const NeighborSet& nbrs, std::span<const double> h, double temperature,
                  std::size_t vocab_size) {
  CheckNeighbors(nbrs, vocab_size, h.size());
  CheckTemperature(temperature);
  Vector out(vocab_size, 0.0);
  for (const auto& n : nbrs.entries) out[n.value] += Dot(n.key, h);
  for (double& v : out) v /= temperature;
  return out;
}

Matrix ValueKeyOuter(const NeighborSet& nbrs, std::size_t vocab_size, std::size_t dim) {
  CheckNeighbors(nbrs, vocab_size, dim);
  Matrix vk(vocab_size, dim);
  for (const auto& n : nbrs.entries) {
    auto row = vk.row(n.value);
    for (std::size_t d = 0; d < dim; ++d) row[d] += n.key[d];
  }
  return vk;
}

GradMatrix MetaGradient(const NeighborSet& nbrs, const Projection& proj, double temperature) {
  CheckTemperature(temperature);
  GradMatrix g;
  g.kind = GradKind::kMeta;
  g.delta = ValueKeyOuter(nbrs, proj.vocab_size(), proj.dim());
  const auto w = proj.weights.data();
  auto d = g.delta.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= temperature * w[i];
  return g;
}

Vector DualOutput(const Projection& proj, const NeighborSet& nbrs, std::span<const double> h,
                  double lambda, double temperature) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "lambda must lie in [0, 1]");
  }
  if (h.size() != proj.dim()) Fail(ErrorCode::kDimensionMismatch, "h length != projection dim");
  const GradMatrix g = MetaGradient(nbrs, proj, temperature);
  if (lambda == 0.0) return MatVec(proj.weights, h);
  const double scale = lambda / temperature;
  Matrix updated = proj.weights;
  auto u = updated.data();
  const auto d = g.delta.data();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += scale * d[i];
  return MatVec(updated, h);
}

double DualResidual(const Projection& proj, const NeighborSet& nbrs,
                    std::span<const double> h, double lambda, double temperature) {
  const Vector dual = DualOutput(proj, nbrs, h, lambda, temperature);
  const Vector f_nmt = RelaxedNmt(proj, h);
  const Vector f_knn = RelaxedKnn(nbrs, h, temperature, proj.vocab_size());
  double diff2 = 0.0;
  for (std::size_t i = 0; i < dual.size(); ++i) {
    const double all = f_nmt[i] + lambda * (f_knn[i] - f_nmt[i]);
    const double e = dual[i] - all;
    diff2 += e * e;
  }
  return std::sqrt(diff2) / std::max(1.0, Norm(dual));
}

}  // namespace knnmt
