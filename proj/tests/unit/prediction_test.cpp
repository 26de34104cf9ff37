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

#include <gtest/gtest.h>

#include <cmath>

#include "knnmt/error.hpp"
#include "knnmt/prediction.hpp"
#include "oracles.hpp"

namespace knnmt {
namespace {

NeighborSet MakeNeighbors(std::initializer_list<std::pair<double, TokenId>> scored) {
  NeighborSet n;
  n.metric = Metric::kInnerProduct;
  n.query_dim = 1;
  std::size_t i = 0;
  for (const auto& [score, value] : scored) n.entries.push_back({i++, {score}, value, score});
  return n;
}

void ExpectDistribution(const ProbVector& p) {
  double sum = 0.0;
  for (double x : p) {
    EXPECT_GE(x, 0.0);
    sum += x;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_TRUE(IsDistribution(p));
}

TEST(NmtDistribution, ZeroWeightsGiveUniform) {
  const auto proj = Projection::Zeros(5, 3);
  const Vector h{1.0, -2.0, 0.5};
  const auto p = NmtDistribution(proj, h);
  for (double x : p) EXPECT_DOUBLE_EQ(x, 0.2);
}

TEST(NmtDistribution, TwoClassHandSoftmax) {
  Projection proj = Projection::Zeros(2, 1);
  proj.weights(0, 0) = std::log(3.0);
  const Vector h{1.0};
  const auto p = NmtDistribution(proj, h);
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(NmtDistribution, LogitInvarianceUnderRescaling) {
  oracle::Random rng(2);
  Projection proj = Projection::Zeros(6, 4);
  for (double& w : proj.weights.data()) w = rng.Normal();
  const Vector h = rng.Vec(4);
  const double c = 3.5;
  Projection scaled = proj;
  for (double& w : scaled.weights.data()) w /= c;
  Vector hc = h;
  for (double& x : hc) x *= c;
  const auto a = NmtDistribution(proj, h);
  const auto b = NmtDistribution(scaled, hc);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(NmtDistribution, RejectsNonFiniteInput) {
  const auto proj = Projection::Zeros(2, 2);
  const Vector h{1.0, INFINITY};
  EXPECT_THROW(NmtDistribution(proj, h), Error);
}

TEST(NmtDistribution, StableForHugeLogits) {
  Projection proj = Projection::Zeros(3, 1);
  proj.weights(0, 0) = 1000.0;
  proj.weights(1, 0) = 999.0;
  const Vector h{1.0};
  const auto p = NmtDistribution(proj, h);
  ExpectDistribution(p);
  EXPECT_NEAR(p[0] / p[1], std::exp(1.0), 1e-12);
}

TEST(KnnDistribution, SingleNeighborIsOneHot) {
  const auto p = KnnDistribution(MakeNeighbors({{4.2, 3}}), 10.0, 5);
  EXPECT_EQ(p, (ProbVector{0, 0, 0, 1, 0}));
}

TEST(KnnDistribution, TwoNeighborsHandSoftmax) {
  const auto p = KnnDistribution(MakeNeighbors({{2.0, 0}, {0.0, 1}}), 1.0, 2);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(p[0], e2 / (e2 + 1.0), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (e2 + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.8808, 1e-4);
}

TEST(KnnDistribution, SameValueMergesMass) {
  const auto p = KnnDistribution(MakeNeighbors({{1.0, 2}, {1.0, 2}}), 3.0, 4);
  EXPECT_EQ(p, (ProbVector{0, 0, 1, 0}));
}

TEST(KnnDistribution, InvariantToScoreShift) {
  const auto a = KnnDistribution(MakeNeighbors({{1.0, 0}, {-0.5, 1}, {0.3, 0}}), 2.0, 3);
  const auto b = KnnDistribution(MakeNeighbors({{101.0, 0}, {99.5, 1}, {100.3, 0}}), 2.0, 3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(KnnDistribution, Errors) {
  EXPECT_THROW(KnnDistribution(NeighborSet{}, 1.0, 3), Error);
  EXPECT_THROW(KnnDistribution(MakeNeighbors({{1.0, 0}}), 0.0, 3), Error);
  EXPECT_THROW(KnnDistribution(MakeNeighbors({{1.0, 0}}), -1.0, 3), Error);
}

TEST(Interpolate, BoundariesAreExact) {
  const ProbVector knn{0.1, 0.7, 0.2};
  const ProbVector nmt{0.3, 0.3, 0.4};
  EXPECT_EQ(Interpolate(knn, nmt, 0.0), nmt);
  EXPECT_EQ(Interpolate(knn, nmt, 1.0), knn);
}

TEST(Interpolate, HandArithmetic) {
  const auto p = Interpolate(ProbVector{1.0, 0.0}, ProbVector{0.5, 0.5}, 0.6);
  EXPECT_NEAR(p[0], 0.8, 1e-15);
  EXPECT_NEAR(p[1], 0.2, 1e-15);
}

TEST(Interpolate, PreservesUnitSumAndRejectsMismatch) {
  oracle::Random rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<long double> a(8), b(8);
    for (auto& x : a) x = rng.Normal();
    for (auto& x : b) x = rng.Normal();
    const auto pa = oracle::Softmax(a), pb = oracle::Softmax(b);
    ProbVector da(pa.begin(), pa.end()), db(pb.begin(), pb.end());
    ExpectDistribution(Interpolate(da, db, rng.Uniform()));
  }
  EXPECT_THROW(Interpolate(ProbVector{1.0}, ProbVector{0.5, 0.5}, 0.5), Error);
  EXPECT_THROW(Interpolate(ProbVector{1.0}, ProbVector{1.0}, 1.5), Error);
}

TEST(GreedyDecode, ArgmaxWithLowestIdTie) {
  EXPECT_EQ(GreedyDecodeStep(ProbVector{0, 0, 0, 1}), 3u);
  EXPECT_EQ(GreedyDecodeStep(ProbVector{0.25, 0.25, 0.25, 0.25}), 0u);
  EXPECT_EQ(GreedyDecodeStep(ProbVector{0.2, 0.5, 0.3}), 1u);
}

TEST(ValidateHyper, RejectsOutOfRange) {
  EXPECT_NO_THROW(ValidateHyper(Hyper{}));
  EXPECT_THROW(ValidateHyper(Hyper{0, 0.5, 1.0, Metric::kInnerProduct}), Error);
  EXPECT_THROW(ValidateHyper(Hyper{1, -0.1, 1.0, Metric::kInnerProduct}), Error);
  EXPECT_THROW(ValidateHyper(Hyper{1, 0.5, 0.0, Metric::kInnerProduct}), Error);
}

class ScoreSequenceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    oracle::Random rng(9);
    proj_ = Projection::Zeros(4, 3);
    for (double& w : proj_.weights.data()) w = rng.Normal();
    for (int i = 0; i < 12; ++i) {
      keys_.push_back(oracle::FloatVec(rng, 3));
      values_.push_back(static_cast<TokenId>(i % 4));
      ds_.Add(keys_.back(), values_.back());
    }
    for (int s = 0; s < 6; ++s) steps_.push_back({rng.Vec(3), static_cast<TokenId>(s % 4)});
  }
  Projection proj_;
  Datastore ds_{3, 4};
  std::vector<Vector> keys_;
  std::vector<TokenId> values_;
  std::vector<ContextPair> steps_;
};

TEST_F(ScoreSequenceTest, LambdaZeroReproducesNmt) {
  const Hyper h{4, 0.0, 10.0, Metric::kInnerProduct};
  const auto scored = ScoreSequence(proj_, ds_, h, steps_);
  ScoreOptions nmt;
  nmt.variant = ScoreVariant::kNmt;
  const auto plain = ScoreSequence(proj_, ds_, Hyper{}, steps_, nmt);
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const auto p = NmtDistribution(proj_, steps_[i].context);
    EXPECT_EQ(scored[i].p_gold, p[steps_[i].token]);
    EXPECT_EQ(plain[i].p_gold, p[steps_[i].token]);
    EXPECT_FALSE(scored[i].neighbors.has_value());
  }
}

TEST_F(ScoreSequenceTest, LambdaOneReproducesKnn) {
  const Hyper h{5, 1.0, 2.0, Metric::kNegativeL2};
  const auto scored = ScoreSequence(proj_, ds_, h, steps_);
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const auto p = KnnDistribution(ds_.Search(steps_[i].context, 5, Metric::kNegativeL2), 2.0, 4);
    EXPECT_EQ(scored[i].p_gold, p[steps_[i].token]);
  }
}

TEST_F(ScoreSequenceTest, SelfRetrievalGivesCertainty) {
  const std::vector<ContextPair> one{{keys_[5], values_[5]}};
  const auto scored = ScoreSequence(proj_, ds_, Hyper{1, 1.0, 1.0, Metric::kNegativeL2}, one);
  EXPECT_EQ(scored[0].p_gold, 1.0);
  EXPECT_EQ(scored[0].log_p_gold, 0.0);
}

TEST(ScoreSequence, ThreeStepToyMatchesPipelineOracle) {
  // Hand-built 4-entry store; the oracle re-derives each step from a full
  // scan, a long-double softmax and the interpolation formula.
  Projection proj = Projection::Zeros(3, 2);
  proj.weights(0, 0) = 1.0;
  proj.weights(1, 1) = 1.0;
  proj.weights(2, 0) = -0.5;
  proj.weights(2, 1) = 0.5;
  const std::vector<Vector> keys{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {-1.0, 0.5}};
  const std::vector<TokenId> values{0, 1, 1, 2};
  Datastore ds(2, 3);
  for (std::size_t i = 0; i < 4; ++i) ds.Add(keys[i], values[i]);
  const std::vector<ContextPair> steps{{{1.0, 0.2}, 0}, {{0.1, 0.9}, 1}, {{-0.8, 0.4}, 2}};
  const Hyper hyper{2, 0.6, 0.5, Metric::kInnerProduct};
  const auto scored = ScoreSequence(proj, ds, hyper, steps);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const auto hits = oracle::FullScan(keys, steps[s].context, 2, false);
    std::vector<long double> mass(3, 0);
    long double z = 0;
    for (const auto& hit : hits) {
      const long double e = std::exp(hit.score / 0.5L);
      mass[values[hit.index]] += e;
      z += e;
    }
    std::vector<long double> logits(3, 0);
    for (int v = 0; v < 3; ++v) {
      logits[v] = proj.weights(v, 0) * steps[s].context[0] + proj.weights(v, 1) * steps[s].context[1];
    }
    const auto p_nmt = oracle::Softmax(logits);
    const long double want = 0.6L * mass[steps[s].token] / z + 0.4L * p_nmt[steps[s].token];
    EXPECT_NEAR(scored[s].p_gold, static_cast<double>(want), 1e-14) << "step " << s;
    EXPECT_NEAR(scored[s].log_p_gold, std::log(static_cast<double>(want)), 1e-12);
  }
}

TEST_F(ScoreSequenceTest, RetainsNeighborsAndHonoursPolicy) {
  ScoreOptions opts;
  opts.retain_neighbors = true;
  opts.policy = [](std::size_t pos, std::span<const double>) {
    return StepSettings{pos + 1, pos % 2 == 0 ? 0.0 : 0.5};
  };
  const auto scored = ScoreSequence(proj_, ds_, Hyper{}, steps_, opts);
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    ASSERT_TRUE(scored[i].neighbors.has_value());
    EXPECT_EQ(scored[i].neighbors->size(), i + 1);
    if (i % 2 == 0) {
      EXPECT_EQ(scored[i].p_gold, NmtDistribution(proj_, steps_[i].context)[steps_[i].token]);
    }
  }
}

TEST_F(ScoreSequenceTest, GoldProbabilitiesAreExtracted) {
  const auto scored = ScoreSequence(proj_, ds_, Hyper{}, steps_);
  const auto probs = GoldProbabilities(scored);
  ASSERT_EQ(probs.size(), scored.size());
  for (std::size_t i = 0; i < probs.size(); ++i) EXPECT_EQ(probs[i], scored[i].p_gold);
}

TEST_F(ScoreSequenceTest, RejectsMismatchedSteps) {
  const std::vector<ContextPair> bad{{{1.0}, 0}};
  EXPECT_THROW(ScoreSequence(proj_, ds_, Hyper{}, bad), Error);
  const std::vector<ContextPair> bad_token{{{1.0, 0.0, 0.0}, 9}};
  EXPECT_THROW(ScoreSequence(proj_, ds_, Hyper{}, bad_token), Error);
}

TEST_F(ScoreSequenceTest, TuneKnnPicksValidationMinimizerOverGrid) {
  KnnGrid grid{{1, 2, 4}, {0.2, 0.8}, {1.0, 5.0}};
  const auto r = TuneKnn(proj_, ds_, Metric::kInnerProduct, steps_, grid);
  EXPECT_EQ(r.cells, 12u);
  double best = INFINITY;
  for (std::size_t k : grid.ks) {
    for (double t : grid.temperatures) {
      for (double l : grid.lambdas) {
        const auto s = ScoreSequence(proj_, ds_, Hyper{k, l, t, Metric::kInnerProduct}, steps_);
        double nll = 0;
        for (const auto& x : s) nll -= x.log_p_gold;
        best = std::min(best, std::exp(nll / s.size()));
      }
    }
  }
  EXPECT_NEAR(r.val_ppl, best, 1e-12 * best);
}

TEST(KnnGrid, DefaultSearchSpace) {
  const auto g = KnnGrid::Default();
  EXPECT_EQ(g.ks, (std::vector<std::size_t>{2, 4, 8, 16, 32}));
  ASSERT_EQ(g.lambdas.size(), 9u);
  EXPECT_DOUBLE_EQ(g.lambdas.front(), 0.1);
  EXPECT_DOUBLE_EQ(g.lambdas.back(), 0.9);
  EXPECT_EQ(g.temperatures, (std::vector<double>{5, 10, 20, 50, 100, 150, 200}));
}

TEST(ProjectionFile, RoundTripAndErrors) {
  const auto dir = oracle::TempDir("proj_file");
  oracle::Random rng(8);
  Projection p = Projection::Zeros(5, 3);
  for (double& w : p.weights.data()) w = rng.Normal();
  SaveProjection(p, dir / "p.knpj");
  EXPECT_EQ(LoadProjection(dir / "p.knpj"), p);
  std::string bytes = oracle::ReadBytes(dir / "p.knpj");
  bytes[1] = 'Z';
  std::FILE* f = std::fopen((dir / "bad.knpj").c_str(), "wb");
  std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  EXPECT_THROW(LoadProjection(dir / "bad.knpj"), Error);
}

TEST(Hyper, DefaultsMatchItInnerProductSetting) {
  const Hyper h;
  EXPECT_EQ(h.k, 8u);
  EXPECT_DOUBLE_EQ(h.lambda, 0.6);
  EXPECT_DOUBLE_EQ(h.temperature, 20.0);
}

}  // namespace
}  // namespace knnmt
