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

#include "knnmt/opl_finetune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "knnmt/error.hpp"
#include "knnmt/random.hpp"

namespace knnmt {
namespace {

struct Example {
  std::span<const double> x;
  TokenId y;
};

std::vector<Example> Examples(const NeighborSet& nbrs) {
  std::vector<Example> out;
  out.reserve(nbrs.size());
  for (const auto& n : nbrs.entries) out.push_back({n.key, n.value});
  return out;
}

std::vector<Example> Examples(std::span<const ContextPair> pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.context, p.token});
  return out;
}

void CheckExamples(const Projection& proj, std::span<const Example> ex) {
  if (ex.empty()) Fail(ErrorCode::kEmptyInput, "empty neighbor / training set");
  for (const auto& e : ex) {
    if (e.x.size() != proj.dim()) Fail(ErrorCode::kDimensionMismatch, "input length != dim");
    if (e.y >= proj.vocab_size()) Fail(ErrorCode::kOutOfRange, "label >= vocab_size");
  }
}

void CheckAlpha(double alpha) {
  if (!(alpha >= 0.0)) Fail(ErrorCode::kInvalidArgument, "alpha must be >= 0");
}

double LossImpl(const Projection& proj, std::span<const Example> ex, double alpha) {
  CheckExamples(proj, ex);
  CheckAlpha(alpha);
  double ll = 0.0;
  for (const auto& e : ex) {
    const Vector logp = LogSoftmax(MatVec(proj.weights, e.x));
    ll += logp[e.y];
  }
  return ll - 0.5 * alpha * SquaredNorm(proj.weights);
}

// Data term only: sum_j (onehot(y_j) - [P_j]) x_j^T, accumulated per example.
Matrix DataGradient(const Projection& proj, std::span<const Example> ex, ErrorSignal signal) {
  const std::size_t vocab = proj.vocab_size();
  const std::size_t dim = proj.dim();
  Matrix g(vocab, dim);
  for (const auto& e : ex) {
    auto gold = g.row(e.y);
    for (std::size_t d = 0; d < dim; ++d) gold[d] += e.x[d];
    if (signal == ErrorSignal::kValueOnly) continue;
    const ProbVector p = Softmax(MatVec(proj.weights, e.x));
    for (std::size_t v = 0; v < vocab; ++v) {
      auto row = g.row(v);
      const double pv = p[v];
      for (std::size_t d = 0; d < dim; ++d) row[d] -= pv * e.x[d];
    }
  }
  return g;
}

GradMatrix GradientImpl(const Projection& proj, std::span<const Example> ex, double alpha,
                        ErrorSignal signal) {
  CheckExamples(proj, ex);
  CheckAlpha(alpha);
  GradMatrix g;
  g.kind = GradKind::kAnalytic;
  g.delta = DataGradient(proj, ex, signal);
  auto d = g.delta.data();
  const auto w = proj.weights.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= alpha * w[i];
  return g;
}

double MeanNegLog(std::span<const ScoredToken> scored) {
  double s = 0.0;
  for (const auto& t : scored) s -= t.log_p_gold;
  return s / static_cast<double>(scored.size());
}

}  // namespace

void ValidateFtHyper(const FtHyper& ft) {
  if (!(ft.lr > 0.0)) Fail(ErrorCode::kInvalidArgument, "lr must be > 0");
  CheckAlpha(ft.alpha);
  if (ft.batch == 0) Fail(ErrorCode::kInvalidArgument, "batch must be positive");
  if (ft.eval_interval == 0) Fail(ErrorCode::kInvalidArgument, "eval_interval must be positive");
}

GridSpec GridSpec::Default() {
  GridSpec g;
  for (double scale : {1e-1, 1e-2, 1e-3, 1e-4}) {
    for (int base = 1; base <= 9; ++base) g.lr_candidates.push_back(base * scale);
  }
  g.alpha_candidates = {0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0};
  return g;
}

double OplLoss(const Projection& proj, const NeighborSet& nbrs, double alpha) {
  const auto ex = Examples(nbrs);
  return LossImpl(proj, ex, alpha);
}

double OplLoss(const Projection& proj, std::span<const ContextPair> pairs, double alpha) {
  const auto ex = Examples(pairs);
  return LossImpl(proj, ex, alpha);
}

GradMatrix OplGradient(const Projection& proj, const NeighborSet& nbrs, double alpha,
                       ErrorSignal signal) {
  const auto ex = Examples(nbrs);
  return GradientImpl(proj, ex, alpha, signal);
}

GradMatrix OplGradient(const Projection& proj, std::span<const ContextPair> pairs, double alpha,
                       ErrorSignal signal) {
  const auto ex = Examples(pairs);
  return GradientImpl(proj, ex, alpha, signal);
}

GradMatrix FdGradient(const Projection& proj, const NeighborSet& nbrs, double alpha,
                      double epsilon) {
  if (!(epsilon > 0.0)) Fail(ErrorCode::kInvalidArgument, "epsilon must be > 0");
  const auto ex = Examples(nbrs);
  CheckExamples(proj, ex);
  GradMatrix g;
  g.kind = GradKind::kAnalytic;
  g.delta = Matrix(proj.vocab_size(), proj.dim());
  Projection probe = proj;
  auto w = probe.weights.data();
  auto out = g.delta.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + epsilon;
    const double up = LossImpl(probe, ex, alpha);
    w[i] = saved - epsilon;
    const double down = LossImpl(probe, ex, alpha);
    w[i] = saved;
    out[i] = (up - down) / (2.0 * epsilon);
  }
  return g;
}

Projection SgdStep(const Projection& proj, const GradMatrix& grad, double lr) {
  if (!proj.weights.same_shape(grad.delta)) {
    Fail(ErrorCode::kDimensionMismatch, "gradient shape != projection shape");
  }
  Projection next = proj;
  auto w = next.weights.data();
  const auto d = grad.delta.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += lr * d[i];
  return next;
}

double ValidationPerplexity(const Projection& proj, std::span<const ContextPair> pairs) {
  if (pairs.empty()) Fail(ErrorCode::kEmptyInput, "empty validation set");
  double nll = 0.0;
  for (const auto& p : pairs) {
    if (p.context.size() != proj.dim()) Fail(ErrorCode::kDimensionMismatch, "context length");
    nll -= LogSoftmax(MatVec(proj.weights, p.context))[p.token];
  }
  return std::exp(nll / static_cast<double>(pairs.size()));
}

std::vector<ScoredToken> FinetunePerStep(const Projection& proj,
                                         std::span<const NeighborSet> neighbor_sets,
                                         std::span<const ContextPair> steps,
                                         const FtHyper& ft) {
  if (neighbor_sets.size() != steps.size()) {
    Fail(ErrorCode::kDimensionMismatch, "one neighbor set per step required");
  }
  if (ft.steps > 0) ValidateFtHyper(ft);
  std::vector<ScoredToken> out;
  out.reserve(steps.size());
  for (std::size_t pos = 0; pos < steps.size(); ++pos) {
    const auto& step = steps[pos];
    if (step.token >= proj.vocab_size()) Fail(ErrorCode::kOutOfRange, "gold token >= vocab");
    Projection tuned = proj;
    for (std::size_t s = 0; s < ft.steps; ++s) {
      tuned = SgdStep(tuned, OplGradient(tuned, neighbor_sets[pos], ft.alpha), ft.lr);
    }
    const Vector logits = MatVec(tuned.weights, step.context);
    const ProbVector p = Softmax(logits);
    ScoredToken st;
    st.position = pos;
    st.gold_token = step.token;
    st.p_gold = p[step.token];
    st.log_p_gold = LogSoftmax(logits)[step.token];
    st.predicted = GreedyDecodeStep(p);
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<ScoredToken> FinetunePerStep(const Projection& proj, const Datastore& ds,
                                         const Hyper& hyper, std::span<const ContextPair> steps,
                                         const FtHyper& ft, bool retain_neighbors) {
  ValidateHyper(hyper);
  std::vector<NeighborSet> sets;
  sets.reserve(steps.size());
  for (const auto& s : steps) sets.push_back(ds.Search(s.context, hyper.k, hyper.metric));
  auto out = FinetunePerStep(proj, sets, steps, ft);
  if (retain_neighbors) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i].neighbors = std::move(sets[i]);
  }
  return out;
}

FinetuneResult FinetuneFull(const Projection& proj, std::span<const ContextPair> train,
                            const FtHyper& ft, std::span<const ContextPair> val) {
  if (train.empty()) Fail(ErrorCode::kEmptyInput, "empty training data");
  ValidateFtHyper(ft);
  const auto ex = Examples(train);
  CheckExamples(proj, ex);

  FinetuneResult result;
  result.projection = proj;
  result.initial_val_ppl = ValidationPerplexity(proj, val);
  result.best_val_ppl = result.initial_val_ppl;

  Rng rng(ft.seed);
  std::vector<std::size_t> order(ex.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  Projection current = proj;
  std::vector<Example> batch;
  batch.reserve(ft.batch);
  for (std::size_t step = 1; step <= ft.steps; ++step) {
    batch.clear();
    while (batch.size() < ft.batch) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[rng.Below(i)]);
        }
        cursor = 0;
      }
      batch.push_back(ex[order[cursor++]]);
      if (batch.size() == ex.size()) break;
    }
    Matrix g = DataGradient(current, batch, ErrorSignal::kValueMinusPrediction);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    auto w = current.weights.data();
    const auto gd = g.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] += ft.lr * (inv_b * gd[i] - ft.alpha * w[i]);
    }
    if (!AllFinite(w)) Fail(ErrorCode::kNonFinite, "weights diverged during fine-tuning");

    if (step % ft.eval_interval == 0 || step == ft.steps) {
      const double ppl = ValidationPerplexity(current, val);
      if (ppl < result.best_val_ppl) {
        result.best_val_ppl = ppl;
        result.best_step = step;
        result.projection = current;
      }
    }
  }
  return result;
}

namespace {

template <class Evaluate>
GridResult RunGrid(const GridSpec& grid, const FtHyper& base, GridMode mode, Evaluate&& eval) {
  if (grid.lr_candidates.empty() || grid.alpha_candidates.empty()) {
    Fail(ErrorCode::kEmptyInput, "empty grid");
  }
  for (double lr : grid.lr_candidates) {
    if (!(lr > 0.0)) Fail(ErrorCode::kInvalidArgument, "grid learning rates must be > 0");
  }
  GridResult result;
  result.best_val_ppl = std::numeric_limits<double>::infinity();
  bool have = false;
  auto consider = [&](double lr, double alpha) {
    FtHyper ft = base;
    ft.lr = lr;
    ft.alpha = alpha;
    double ppl = eval(ft);
    if (std::isnan(ppl)) ppl = std::numeric_limits<double>::infinity();
    result.cells.push_back({lr, alpha, ppl});
    if (!have || ppl < result.best_val_ppl) {
      have = true;
      result.best_val_ppl = ppl;
      result.best = ft;
    }
  };
  if (mode == GridMode::kFull) {
    for (double lr : grid.lr_candidates) {
      for (double alpha : grid.alpha_candidates) consider(lr, alpha);
    }
  } else {
    for (double lr : grid.lr_candidates) consider(lr, grid.alpha_candidates.front());
    const double lr = result.best.lr;
    for (std::size_t a = 1; a < grid.alpha_candidates.size(); ++a) {
      consider(lr, grid.alpha_candidates[a]);
    }
  }
  return result;
}

}  // namespace

GridResult GridSearch(const Projection& proj, std::span<const ContextPair> train,
                      std::span<const ContextPair> val, const GridSpec& grid,
                      const FtHyper& base, GridMode mode) {
  return RunGrid(grid, base, mode, [&](const FtHyper& ft) {
    try {
      return FinetuneFull(proj, train, ft, val).best_val_ppl;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      return std::numeric_limits<double>::infinity();
    }
  });
}

GridResult GridSearchPerStep(const Projection& proj, std::span<const NeighborSet> neighbor_sets,
                             std::span<const ContextPair> val, const GridSpec& grid,
                             const FtHyper& base, GridMode mode) {
  if (neighbor_sets.size() != val.size()) {
    Fail(ErrorCode::kDimensionMismatch, "one neighbor set per step required");
  }
  if (base.steps != 1) {
    return RunGrid(grid, base, mode, [&](const FtHyper& ft) {
      const auto scored = FinetunePerStep(proj, neighbor_sets, val, ft);
      return std::exp(MeanNegLog(scored));
    });
  }
  // One SGD step gives (W + lr * dW) h = (1 - lr * alpha) W h + lr * G h with
  // G h = sum_j (onehot(v_j) - P_j) (K_j . h), which does not depend on
  // (lr, alpha); precompute W h and G h once per step.
  const std::size_t vocab = proj.vocab_size();
  std::vector<Vector> base_logits, update;
  base_logits.reserve(val.size());
  update.reserve(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto& h = val[i].context;
    const auto ex = Examples(neighbor_sets[i]);
    CheckExamples(proj, ex);
    Vector g(vocab, 0.0);
    for (const auto& e : ex) {
      const double s = Dot(e.x, h);
      g[e.y] += s;
      const ProbVector p = Softmax(MatVec(proj.weights, e.x));
      for (std::size_t v = 0; v < vocab; ++v) g[v] -= p[v] * s;
    }
    base_logits.push_back(MatVec(proj.weights, h));
    update.push_back(std::move(g));
  }
  return RunGrid(grid, base, mode, [&](const FtHyper& ft) {
    ValidateFtHyper(ft);
    const double keep = 1.0 - ft.lr * ft.alpha;
    Vector logits(vocab);
    double nll = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      for (std::size_t v = 0; v < vocab; ++v) {
        logits[v] = keep * base_logits[i][v] + ft.lr * update[i][v];
      }
      nll -= LogSoftmax(logits)[val[i].token];
    }
    return std::exp(nll / static_cast<double>(val.size()));
  });
}

}  // namespace knnmt
