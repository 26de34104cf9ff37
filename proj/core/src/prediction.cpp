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

#include "knnmt/prediction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "knnmt/error.hpp"

namespace knnmt {
namespace {

double LogAddExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double SafeLog(double x) {
  return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

constexpr std::array<char, 4> kProjectionMagic = {'K', 'N', 'P', 'J'};
constexpr std::uint16_t kProjectionVersion = 1;

}  // namespace

void SaveProjection(const Projection& proj, const std::filesystem::path& path) {
  detail::LeWriter w;
  w.Bytes(kProjectionMagic.data(), kProjectionMagic.size());
  w.Int<std::uint16_t>(kProjectionVersion);
  w.Int<std::uint32_t>(static_cast<std::uint32_t>(proj.vocab_size()));
  w.Int<std::uint32_t>(static_cast<std::uint32_t>(proj.dim()));
  for (std::size_t i = 0; i < proj.weights.size(); ++i) w.F64(proj.weights.data()[i]);
  w.Commit(path);
}

Projection LoadProjection(const std::filesystem::path& path) {
  detail::LeReader r(path);
  if (r.Magic() != kProjectionMagic) Fail(ErrorCode::kBadMagic, "bad magic: not a KNPJ projection");
  const auto version = r.Int<std::uint16_t>("version");
  if (version != kProjectionVersion) {
    Fail(ErrorCode::kVersionMismatch,
         "version mismatch: file has " + std::to_string(version) + ", expected 1");
  }
  const auto vocab = r.Int<std::uint32_t>("vocab_size");
  const auto dim = r.Int<std::uint32_t>("dim");
  if (vocab == 0 || dim == 0) Fail(ErrorCode::kInvalidArgument, "zero dim or vocab_size");
  const std::uint64_t n = std::uint64_t{vocab} * dim;
  if (n > r.remaining() / 8) Fail(ErrorCode::kTruncatedFile, "truncated file: weights incomplete");
  Projection proj = Projection::Zeros(vocab, dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double x = r.F64("weight");
    if (!std::isfinite(x)) Fail(ErrorCode::kNonFinite, "non-finite weight in projection file");
    proj.weights.data()[i] = x;
  }
  if (r.remaining() != 0) Fail(ErrorCode::kInvalidArgument, "trailing bytes after weights");
  return proj;
}

void ValidateHyper(const Hyper& hyper) {
  if (hyper.k == 0) Fail(ErrorCode::kInvalidArgument, "k must be positive");
  if (!(hyper.lambda >= 0.0 && hyper.lambda <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "lambda must lie in [0, 1]");
  }
  if (!(hyper.temperature > 0.0)) Fail(ErrorCode::kInvalidArgument, "temperature must be > 0");
}

ProbVector Softmax(std::span<const double> logits) {
  if (logits.empty()) Fail(ErrorCode::kEmptyInput, "softmax of empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  ProbVector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Vector LogSoftmax(std::span<const double> logits) {
  if (logits.empty()) Fail(ErrorCode::kEmptyInput, "log-softmax of empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

ProbVector NmtDistribution(const Projection& proj, std::span<const double> h) {
  if (h.size() != proj.dim()) Fail(ErrorCode::kDimensionMismatch, "h length != projection dim");
  if (!AllFinite(h)) Fail(ErrorCode::kNonFinite, "non-finite context vector");
  return Softmax(MatVec(proj.weights, h));
}

ProbVector KnnDistribution(const NeighborSet& nbrs, double temperature,
                           std::size_t vocab_size) {
  if (nbrs.empty()) Fail(ErrorCode::kEmptyInput, "empty neighbor set");
  if (!(temperature > 0.0)) Fail(ErrorCode::kInvalidArgument, "temperature must be > 0");
  double max_score = -std::numeric_limits<double>::infinity();
  for (const auto& n : nbrs.entries) max_score = std::max(max_score, n.score);
  ProbVector p(vocab_size, 0.0);
  double z = 0.0;
  for (const auto& n : nbrs.entries) {
    if (n.value >= vocab_size) Fail(ErrorCode::kOutOfRange, "neighbor value >= vocab_size");
    const double w = std::exp((n.score - max_score) / temperature);
    p[n.value] += w;
    z += w;
  }
  for (double& v : p) v /= z;
  return p;
}

ProbVector Interpolate(std::span<const double> p_knn, std::span<const double> p_nmt,
                       double lambda) {
  if (p_knn.size() != p_nmt.size()) {
    Fail(ErrorCode::kDimensionMismatch, "interpolation length mismatch");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "lambda must lie in [0, 1]");
  }
  if (lambda == 0.0) return ProbVector(p_nmt.begin(), p_nmt.end());
  if (lambda == 1.0) return ProbVector(p_knn.begin(), p_knn.end());
  ProbVector p(p_knn.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = lambda * p_knn[i] + (1.0 - lambda) * p_nmt[i];
  }
  return p;
}

TokenId GreedyDecodeStep(std::span<const double> p) {
  if (p.empty()) Fail(ErrorCode::kEmptyInput, "argmax of empty distribution");
  // max_element returns the first maximum.
  return static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
}

bool IsDistribution(std::span<const double> p, double tol) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

std::vector<ScoredToken> ScoreSequence(const Projection& proj, const Datastore& ds,
                                       const Hyper& hyper,
                                       std::span<const ContextPair> steps,
                                       const ScoreOptions& options) {
  ValidateHyper(hyper);
  const std::size_t vocab = proj.vocab_size();
  std::vector<ScoredToken> out;
  out.reserve(steps.size());
  for (std::size_t pos = 0; pos < steps.size(); ++pos) {
    const auto& step = steps[pos];
    if (step.context.size() != proj.dim()) {
      Fail(ErrorCode::kDimensionMismatch, "step " + std::to_string(pos) + ": context length");
    }
    if (step.token >= vocab) {
      Fail(ErrorCode::kOutOfRange, "step " + std::to_string(pos) + ": gold token >= vocab");
    }
    StepSettings settings{hyper.k, hyper.lambda};
    if (options.policy) settings = options.policy(pos, step.context);
    if (options.variant == ScoreVariant::kNmt) settings.lambda = 0.0;
    if (options.variant == ScoreVariant::kKnn) settings.lambda = 1.0;
    ValidateHyper(Hyper{settings.k, settings.lambda, hyper.temperature, hyper.metric});

    ScoredToken st;
    st.position = pos;
    st.gold_token = step.token;

    const bool need_retrieval = settings.lambda > 0.0 || options.retain_neighbors;
    std::optional<NeighborSet> nbrs;
    if (need_retrieval) nbrs = ds.Search(step.context, settings.k, hyper.metric);

    if (settings.lambda == 0.0) {
      const Vector logits = MatVec(proj.weights, step.context);
      const Vector logp = LogSoftmax(logits);
      const ProbVector p = Softmax(logits);
      st.p_gold = p[step.token];
      st.log_p_gold = logp[step.token];
      st.predicted = GreedyDecodeStep(p);
    } else {
      const ProbVector p_knn = KnnDistribution(*nbrs, hyper.temperature, vocab);
      if (settings.lambda == 1.0) {
        st.p_gold = p_knn[step.token];
        st.log_p_gold = SafeLog(st.p_gold);
        st.predicted = GreedyDecodeStep(p_knn);
      } else {
        const Vector logits = MatVec(proj.weights, step.context);
        const Vector logp = LogSoftmax(logits);
        const ProbVector p_nmt = Softmax(logits);
        const ProbVector p = Interpolate(p_knn, p_nmt, settings.lambda);
        st.p_gold = p[step.token];
        st.log_p_gold = LogAddExp(std::log(settings.lambda) + SafeLog(p_knn[step.token]),
                                  std::log1p(-settings.lambda) + logp[step.token]);
        st.predicted = GreedyDecodeStep(p);
      }
    }
    if (options.retain_neighbors) st.neighbors = std::move(nbrs);
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<double> GoldProbabilities(std::span<const ScoredToken> scored) {
  std::vector<double> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.p_gold);
  return out;
}

}  // namespace knnmt

namespace knnmt {

KnnGrid KnnGrid::Default() {
  KnnGrid g;
  g.ks = {2, 4, 8, 16, 32};
  for (int i = 1; i <= 9; ++i) g.lambdas.push_back(i / 10.0);
  g.temperatures = {5, 10, 20, 50, 100, 150, 200};
  return g;
}

KnnTuneResult TuneKnn(const Projection& proj, const Datastore& ds, Metric metric,
                      std::span<const ContextPair> val, const KnnGrid& grid) {
  if (grid.ks.empty() || grid.lambdas.empty() || grid.temperatures.empty()) {
    Fail(ErrorCode::kEmptyInput, "empty kNN grid");
  }
  if (val.empty()) Fail(ErrorCode::kEmptyInput, "empty validation set");
  const std::size_t k_max = *std::max_element(grid.ks.begin(), grid.ks.end());
  std::vector<NeighborSet> sets;
  std::vector<double> log_nmt;
  sets.reserve(val.size());
  log_nmt.reserve(val.size());
  for (const auto& step : val) {
    sets.push_back(ds.Search(step.context, k_max, metric));
    log_nmt.push_back(LogSoftmax(MatVec(proj.weights, step.context))[step.token]);
  }
  KnnTuneResult result;
  result.val_ppl = std::numeric_limits<double>::infinity();
  bool have = false;
  std::vector<double> p_knn(val.size());
  for (std::size_t k : grid.ks) {
    for (double t : grid.temperatures) {
      for (std::size_t i = 0; i < val.size(); ++i) {
        const auto& entries = sets[i].entries;
        const std::size_t n = std::min(k, entries.size());
        const double top = entries.front().score;
        double z = 0.0, gold = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double w = std::exp((entries[j].score - top) / t);
          z += w;
          if (entries[j].value == val[i].token) gold += w;
        }
        p_knn[i] = gold / z;
      }
      for (double lambda : grid.lambdas) {
        ++result.cells;
        double nll = 0.0;
        for (std::size_t i = 0; i < val.size(); ++i) {
          nll -= LogAddExp(std::log(lambda) + SafeLog(p_knn[i]),
                           std::log1p(-lambda) + log_nmt[i]);
        }
        const double ppl = std::exp(nll / static_cast<double>(val.size()));
        if (!have || ppl < result.val_ppl) {
          have = true;
          result.val_ppl = ppl;
          result.best = Hyper{k, lambda, t, metric};
        }
      }
    }
  }
  return result;
}

}  // namespace knnmt
