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

#include "knnmt/types.hpp"

#include <cmath>

#include "knnmt/error.hpp"

namespace knnmt {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kOutOfRange: return "out of range";
    case ErrorCode::kEmptyDatastore: return "empty datastore";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncatedFile: return "truncated file";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown";
}

Vector MatVec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    Fail(ErrorCode::kDimensionMismatch, "matrix-vector shape mismatch");
  }
  Vector y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    y[r] = Dot(m.row(r), x);
  }
  return y;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double SquaredNorm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

bool AllFinite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace knnmt
