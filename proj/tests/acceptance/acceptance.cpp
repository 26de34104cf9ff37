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

// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// if any criterion fails. Tolerances and seeds are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knnmt/checks.hpp"
#include "knnmt/experiments.hpp"
#include "knnmt/meta_optimizer.hpp"
#include "knnmt/opl_finetune.hpp"
#include "knnmt/random.hpp"
#include "micro_corpus.hpp"
#include "oracles.hpp"

namespace {

using namespace knnmt;
namespace fs = std::filesystem;

constexpr double kDualTol = 1e-6;
constexpr double kDualSeconds = 30.0;
constexpr double kGradTol = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kRatioLo = 3.5, kRatioHi = 4.5;
constexpr double kTableOneTol = 1e-12;
constexpr double kAxiomTol = 1e-9;
constexpr double kStudySeconds = 300.0;
constexpr double kMinGain = 0.05;
const std::vector<std::uint64_t> kTaskSeeds = {1, 2, 3};

struct Outcome {
  bool pass = true;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1-3: algebraic identities on seeded random instances.

Outcome DualForm() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = RunDualCheck(1000, 1);
  const double secs = Seconds(t0);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.residual);
  return {worst <= kDualTol && secs < kDualSeconds,
          Fmt("max residual %.3g over %zu instances (tol %.0e), %.1f s (limit %.0f s)", worst,
              rows.size(), kDualTol, secs, kDualSeconds)};
}

double FdErrorNorm(const RandomInstance& in, double alpha, double eps) {
  const auto exact = OplGradient(in.proj, in.nbrs, alpha);
  const auto fd = FdGradient(in.proj, in.nbrs, alpha, eps);
  double s = 0.0;
  for (std::size_t i = 0; i < fd.delta.size(); ++i) {
    const double e = fd.delta.data()[i] - exact.delta.data()[i];
    s += e * e;
  }
  return std::sqrt(s);
}

Outcome GradientOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = RunGradCheck(100, 1);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.max_rel_error);
  // Truncation-error ratio of central differences when eps halves, on the
  // same instances (eps large enough that rounding is negligible).
  std::vector<double> ratios;
  for (const auto& r : rows) {
    const auto in = MakeRandomInstance(r.seed, r.dim, r.vocab, r.k);
    const double e1 = FdErrorNorm(in, r.alpha, 1e-2);
    const double e2 = FdErrorNorm(in, r.alpha, 5e-3);
    if (e1 > 1e-11) ratios.push_back(e1 / e2);
  }
  const double secs = Seconds(t0);
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
  const bool ratio_ok = !ratios.empty() && median >= kRatioLo && median <= kRatioHi;
  return {worst <= kGradTol && ratio_ok && secs < kGradSeconds,
          Fmt("max rel error %.3g (tol %.0e); eps-halving ratio median %.3f over %zu instances "
              "(range %.3f..%.3f, accept [%.1f, %.1f]); %.1f s (limit %.0f s)",
              worst, kGradTol, median, ratios.size(), ratios.empty() ? 0.0 : ratios.front(),
              ratios.empty() ? 0.0 : ratios.back(), kRatioLo, kRatioHi, secs, kGradSeconds)};
}

Outcome TableOne() {
  double worst = 0.0;
  std::size_t bitwise = 0;
  const std::vector<double> temps = {5, 10, 20, 50, 100, 150, 200};
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng shape(SplitMix(s + 5000));
    const std::size_t dim = 1 + shape.Below(64), vocab = 2 + shape.Below(255),
                      k = 1 + shape.Below(32);
    const auto in = MakeRandomInstance(s + 5000, dim, vocab, k);
    const double t = temps[s % temps.size()];
    const auto meta = MetaGradient(in.nbrs, in.proj, t);
    const auto ft = OplGradient(in.proj, in.nbrs, t, ErrorSignal::kValueOnly);
    const auto a = meta.delta.data(), b = ft.delta.data();
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0) ++bitwise;
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::fabs(a[i] - b[i]) / std::max(1.0, std::fabs(a[i])));
    }
  }
  return {worst <= kTableOneTol,
          Fmt("max rel diff %.3g (tol %.0e); %zu/100 instances bitwise identical", worst,
              kTableOneTol, bitwise)};
}

// ---------------------------------------------------------------------------
// 4: exact retrieval.

Outcome Retrieval() {
  oracle::Random rng(4);
  std::size_t mismatches = 0, queries = 0;
  for (const bool l2 : {false, true}) {
    const Metric metric = l2 ? Metric::kNegativeL2 : Metric::kInnerProduct;
    for (int block = 0; block < 10; ++block) {
      const std::size_t dim = rng.Int(1, 24), n = rng.Int(1, 400);
      Datastore ds(static_cast<std::uint32_t>(dim), 50);
      std::vector<std::vector<double>> keys;
      for (std::size_t i = 0; i < n; ++i) {
        keys.push_back(oracle::FloatVec(rng, dim));
        ds.Add(keys.back(), static_cast<TokenId>(rng.Int(0, 49)));
      }
      for (int q = 0; q < 100; ++q, ++queries) {
        const auto query = rng.Vec(dim);
        const std::size_t k = rng.Int(1, 40);
        const auto got = ds.Search(query, k, metric);
        const auto want = oracle::FullScan(keys, query, k, l2);
        bool same = got.size() == want.size();
        for (std::size_t r = 0; same && r < want.size(); ++r) {
          same = got.entries[r].index == want[r].index;
        }
        if (!same) ++mismatches;
      }
    }
  }
  // Equal-norm keys (signed permutations of one integer vector) and integer
  // queries keep every score exact, so the two metrics must rank identically.
  std::size_t set_mismatches = 0;
  const std::vector<double> base = {3, -1, 2, 0, 1, -2};
  for (int inst = 0; inst < 200; ++inst) {
    Datastore ds(6, 10);
    for (int i = 0; i < 60; ++i) {
      std::vector<double> key = base;
      std::shuffle(key.begin(), key.end(), rng.engine());
      for (double& x : key) {
        if (rng.Uniform() < 0.5) x = -x;
      }
      ds.Add(key, static_cast<TokenId>(i % 10));
    }
    std::vector<double> query(6);
    for (double& x : query) x = static_cast<double>(rng.Int(0, 10)) - 5.0;
    const std::size_t k = rng.Int(1, 20);
    const auto ip = ds.Search(query, k, Metric::kInnerProduct);
    const auto l2 = ds.Search(query, k, Metric::kNegativeL2);
    std::vector<std::size_t> a, b;
    for (const auto& e : ip.entries) a.push_back(e.index);
    for (const auto& e : l2.entries) b.push_back(e.index);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) ++set_mismatches;
  }
  return {mismatches == 0 && set_mismatches == 0,
          Fmt("%zu/%zu full-scan mismatches; %zu/200 equal-norm top-k set mismatches",
              mismatches, queries, set_mismatches)};
}

// ---------------------------------------------------------------------------
// 5: distribution axioms.

struct AxiomTally {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst = 0.0;
  void Add(const ProbVector& p) {
    ++checked;
    double s = 0.0;
    bool neg = false;
    for (double x : p) {
      s += x;
      neg |= x < 0.0;
    }
    worst = std::max(worst, std::fabs(s - 1.0));
    violations += (neg || std::fabs(s - 1.0) > kAxiomTol) ? 1 : 0;
  }
};

Outcome DistributionAxioms(const PreparedTask& task) {
  AxiomTally tally;
  std::size_t boundary_failures = 0;
  oracle::Random rng(5);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t vocab = rng.Int(2, 256), dim = rng.Int(1, 32), k = rng.Int(1, 32);
    const auto in = MakeRandomInstance(static_cast<std::uint64_t>(t) + 9000, dim, vocab, k);
    Projection proj = in.proj;
    const double spread = std::pow(10.0, rng.Uniform(-2, 2));
    for (double& w : proj.weights.data()) w *= spread;
    const auto nmt = NmtDistribution(proj, in.query);
    const auto knn = KnnDistribution(in.nbrs, std::pow(10.0, rng.Uniform(-1, 2.5)), vocab);
    const auto mix = Interpolate(knn, nmt, rng.Uniform());
    tally.Add(nmt);
    tally.Add(knn);
    tally.Add(mix);
    if (Interpolate(knn, nmt, 0.0) != nmt || Interpolate(knn, nmt, 1.0) != knn) {
      ++boundary_failures;
    }
  }
  // Distributions met along the synthetic pipeline.
  const auto& proj = task.base.projection;
  const auto& test = task.task.test.corpus.pairs;
  for (std::size_t i = 0; i < test.size(); i += 4) {
    for (const Metric m : {Metric::kInnerProduct, Metric::kNegativeL2}) {
      const auto nbrs = task.datastore.Search(test[i].context, 8, m);
      const auto knn = KnnDistribution(nbrs, 5.0, proj.vocab_size());
      const auto nmt = NmtDistribution(proj, test[i].context);
      tally.Add(knn);
      tally.Add(Interpolate(knn, nmt, 0.6));
    }
  }
  return {tally.violations == 0 && boundary_failures == 0,
          Fmt("%zu distributions, %zu violations, max |sum - 1| %.2g (tol %.0e); %zu inexact "
              "lambda boundary cases",
              tally.checked, tally.violations, tally.worst, kAxiomTol, boundary_failures)};
}

// ---------------------------------------------------------------------------
// 6, 7, 9: synthetic studies on the default task.

struct SeedRun {
  std::uint64_t seed = 0;
  double study_seconds = 0.0;
  struct Study {
    Metric metric;
    double m_opl, m_nmt, v_opl, v_nmt;
  };
  std::vector<Study> studies;
  double base_ppl = 0.0, knn_ip_ppl = 0.0, knn_l2_ppl = 0.0, ft_ppl = 0.0;
  std::vector<NeighborSummary> neighbors;
};

double TestPpl(const PreparedTask& p, const Hyper& h) {
  std::vector<double> logs;
  for (const auto& t : ScoreSequence(p.base.projection, p.datastore, h, p.task.test.corpus.pairs)) {
    logs.push_back(t.log_p_gold);
  }
  return PerplexityFromLog(logs);
}

SeedRun RunSeed(const PreparedTask& prepared, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  for (const Metric m : {Metric::kInnerProduct, Metric::kNegativeL2}) {
    const auto s = RunSimilarityStudy(prepared, m);
    run.studies.push_back({m, MeanDiff(s.knn_mt, s.opl_ft), MeanDiff(s.knn_mt, s.nmt),
                           VarDiff(s.knn_mt, s.opl_ft), VarDiff(s.knn_mt, s.nmt)});
  }
  run.study_seconds = Seconds(t0);
  const auto da = RunDomainAdaptation(prepared, Metric::kInnerProduct);
  run.base_ppl = da.base_ppl;
  run.knn_ip_ppl = da.knn_ppl;
  run.ft_ppl = da.ft_ppl;
  const auto l2 = TuneKnn(prepared.base.projection, prepared.datastore, Metric::kNegativeL2,
                          prepared.task.val.corpus.pairs, KnnGrid::Default());
  run.knn_l2_ppl = TestPpl(prepared, l2.best);
  run.neighbors = RunWordAnalysis(prepared, da.knn.best, da.ft_projection).neighbors_by_frequency;
  return run;
}

Outcome SimilarityDirection(const std::vector<SeedRun>& runs) {
  Outcome o;
  double total = 0.0;
  std::ostringstream os;
  for (const auto& r : runs) {
    total += r.study_seconds;
    for (const auto& s : r.studies) {
      const bool ok = std::fabs(s.m_opl) < std::fabs(s.m_nmt) && s.v_opl < s.v_nmt;
      o.pass &= ok;
      os << Fmt("[seed %llu %s |M| %.4f<%.4f V %.4f<%.4f%s] ",
                static_cast<unsigned long long>(r.seed), std::string(MetricName(s.metric)).c_str(),
                std::fabs(s.m_opl), std::fabs(s.m_nmt), s.v_opl, s.v_nmt, ok ? "" : " FAILS");
    }
  }
  o.pass &= total < kStudySeconds;
  os << Fmt("%.1f s (limit %.0f s)", total, kStudySeconds);
  o.detail = os.str();
  return o;
}

Outcome DomainGain(const std::vector<SeedRun>& runs) {
  Outcome o;
  std::ostringstream os;
  for (const auto& r : runs) {
    const double g_ip = 1.0 - r.knn_ip_ppl / r.base_ppl;
    const double g_l2 = 1.0 - r.knn_l2_ppl / r.base_ppl;
    const double g_ft = 1.0 - r.ft_ppl / r.base_ppl;
    o.pass &= g_ip >= kMinGain && g_l2 >= kMinGain && g_ft >= kMinGain;
    os << Fmt("[seed %llu base %.2f kNN-MT ip %.2f l2 %.2f FT %.2f] ",
              static_cast<unsigned long long>(r.seed), r.base_ppl, r.knn_ip_ppl, r.knn_l2_ppl,
              r.ft_ppl);
  }
  os << Fmt("relative gain >= %.0f%% required", 100 * kMinGain);
  o.detail = os.str();
  return o;
}

Outcome FrequencyDirection(const std::vector<SeedRun>& runs) {
  Outcome o;
  std::ostringstream os;
  for (const auto& r : runs) {
    double prev = -1.0;
    std::size_t populated = 0;
    os << Fmt("[seed %llu", static_cast<unsigned long long>(r.seed));
    for (const auto& b : r.neighbors) {
      if (b.occurrences == 0) {
        os << " -";
        continue;
      }
      ++populated;
      o.pass &= b.unretrieved_pct >= prev;
      prev = b.unretrieved_pct;
      os << Fmt(" %.1f%%", b.unretrieved_pct);
    }
    o.pass &= populated >= 2;
    os << "] ";
  }
  os << "non-retrieval by bucket top 1% .. top 20-100% must be non-decreasing";
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// 8: hand-enumerated word-level analysis.

Outcome WordLevel() {
  std::vector<std::string> errors;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) errors.push_back(what);
  };
  auto knn = WordPrf(micro::Hyp(), micro::Ref());
  auto ft = WordPrf(micro::FtHyp(), micro::Ref());
  AnnotateWords(knn, micro::InDomain(), micro::General());
  AnnotateWords(ft, micro::InDomain(), micro::General());

  expect(knn.at("the").precision() == 2.0 / 3 && knn.at("the").recall() == 2.0 / 3, "the P/R");
  expect(knn.at("dosage").recall() == 1.0 / 3 && knn.at("dosage").f1() == 0.5, "dosage R/F1");
  expect(knn.at("dose").precision() == 0.5 && knn.at("dose").f1() == 2.0 / 3, "dose P/F1");
  expect(knn.at("a").f1() == 0.0, "a F1");

  const auto by_gamma = PrfByGamma(knn);
  const std::size_t n[] = {1, 2, 2, 4, 10};
  for (int b = 0; b < 5; ++b) expect(by_gamma[b].n_words == n[b], Fmt("gamma bucket %d size", b));
  expect(by_gamma[3].precision == 0.8 && by_gamma[3].recall == 2.0 / 3 &&
             by_gamma[3].f1 == 2.0 * 0.8 * (2.0 / 3) / (0.8 + 2.0 / 3),
         "gamma>=5 pooled P/R/F1");
  expect(std::isinf(*knn.at("dose").gamma) && GammaBucket(*knn.at("dose").gamma) == 3,
         "f_gd = 0 bucket");

  const auto dr = IncrementalRecall(knn, ft);
  expect(dr.size() == 9, "delta-R coverage");
  expect(dr.at("the") == 2.0 / 3 - 1.0 && dr.at("dosage") == 1.0 / 3 - 2.0 / 3, "delta-R values");
  expect(dr.at("dose") == 0.0, "delta-R zero");

  const auto occ = NeighborQualityByWord(micro::MicroSteps(), micro::kNeighborWords,
                                         micro::kSubwordMap);
  expect(occ.size() == 3, "occurrence count");
  if (occ.size() == 3) {
    const auto& d = occ[1].quality;
    expect(!occ[0].quality.unretrieved && d.unretrieved && !occ[2].quality.unretrieved,
           "non-retrieval");
    expect(occ[0].quality.gold_rank == 1.0 && d.gold_rank == 4.0 && occ[2].quality.gold_rank == 1,
           "gold rank");
    expect(occ[0].quality.gold_dist == 0.5 && d.gold_dist == 4.0 &&
               occ[2].quality.gold_dist == 0.1,
           "gold distance");
    expect(occ[0].quality.gold_count == 3 && d.gold_count == 0 && occ[2].quality.gold_count == 5,
           "gold count");
    expect(occ[0].quality.distinct_labels == 3 && d.distinct_labels == 4 &&
               occ[2].quality.distinct_labels == 1,
           "distinct labels");
  }
  const auto rank3 = StepNeighborQuality(micro::MicroSteps()[1].neighbors.value(), 5);
  expect(rank3.gold_rank == 3 && rank3.gold_count == 1 && rank3.distinct_labels == 4,
         "rank-3 list");

  std::string detail = errors.empty() ? "all hand-enumerated values match exactly"
                                      : "mismatches:";
  for (const auto& e : errors) detail += " " + e + ";";
  return {errors.empty(), detail};
}

// ---------------------------------------------------------------------------
// 10: persistence and the command-line tool.

int Shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json WithoutTimings(nlohmann::json j) {
  for (const char* k : {"nmt_ns_per_token", "knn_ns_per_token", "relative_speed",
                        "nmt_ns_samples", "knn_ns_samples"}) {
    j.erase(k);
  }
  return j;
}

Outcome CliRoundTrip(const PreparedTask& task) {
  std::vector<std::string> errors;
  const fs::path dir = oracle::TempDir("acceptance");

  task.datastore.Save(dir / "a.knds");
  const auto loaded = Datastore::Load(dir / "a.knds");
  loaded.Save(dir / "b.knds");
  if (!(loaded == task.datastore)) errors.push_back("datastore load != saved");
  if (oracle::ReadBytes(dir / "a.knds") != oracle::ReadBytes(dir / "b.knds")) {
    errors.push_back("datastore re-save bytes differ");
  }

  const std::string bin = KNNMT_CLI_PATH;
  const std::string d = dir.string();
  const std::string t = d + "/task";
  struct Run {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;
  };
  const std::vector<Run> runs = {
      {"synth",
       " synth --dim 16 --vocab 64 --n-general 8000 --n-indomain 4000 --n-val 400 --n-test 400"
       " --seed 11 --out-dir " + t,
       {"task/general.kncp", "task/train.kncp", "task/val.kncp", "task/test.kncp",
        "task/words.json", "task/base.knpj", "task/manifest.json"}},
      {"build", " build --pairs " + t + "/train.kncp --out " + d + "/ds.knds --report " + d +
                    "/build.json",
       {"ds.knds", "build.json"}},
      {"search", " search --datastore " + d + "/ds.knds --queries " + t +
                     "/val.kncp -k 4 --metric l2 --out " + d + "/search.csv",
       {"search.csv"}},
      {"score", " score --projection " + t + "/base.knpj --datastore " + d + "/ds.knds --pairs " +
                    t + "/test.kncp --out " + d + "/score.json",
       {"score.json"}},
      {"dual-check", " dual-check --trials 1000 --out " + d + "/dual.csv", {"dual.csv"}},
      {"grad-check", " grad-check --trials 100 --out " + d + "/grad.csv", {"grad.csv"}},
      {"finetune", " finetune --projection " + t + "/base.knpj --train " + t +
                       "/train.kncp --val " + t +
                       "/val.kncp --lr-grid 0.5,2 --alpha-grid 0,0.01 --steps 100"
                       " --save-projection " + d + "/ft.knpj --out " + d + "/ft.json",
       {"ft.knpj", "ft.json"}},
      {"compare", " compare --series " + d + "/score.json " + d + "/score.json --out " + d +
                      "/compare.json",
       {"compare.json"}},
      {"analyze", " analyze --task-dir " + t + " --ft-projection " + d + "/ft.knpj --datastore " +
                      d + "/ds.knds --neighbors-csv " + d + "/nbrs.csv --out " + d +
                      "/analyze.json",
       {"nbrs.csv", "analyze.json"}},
      {"bench", " bench --projection " + t + "/base.knpj --datastore " + d + "/ds.knds --queries " +
                    t + "/test.kncp --reps 3 --out " + d + "/bench.json",
       {"bench.json"}},
  };
  // Each subcommand runs twice with identical arguments; every output must be
  // byte-identical across the two runs (bench: outside its timing fields).
  std::size_t deterministic = 0;
  for (const auto& run : runs) {
    std::vector<std::string> first;
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const int code = Shell(bin + run.args + " > /dev/null 2> " + d + "/stderr.txt");
      if (code != 0) {
        errors.push_back(run.name + " exit " + std::to_string(code));
        ok = false;
      }
      for (std::size_t i = 0; i < run.outputs.size(); ++i) {
        const auto bytes = oracle::ReadBytes(dir / run.outputs[i]);
        if (rep == 0) {
          first.push_back(bytes);
          continue;
        }
        bool same = !bytes.empty() && bytes == first[i];
        if (run.name == "bench" && !bytes.empty() && !first[i].empty()) {
          same = WithoutTimings(nlohmann::json::parse(bytes)) ==
                 WithoutTimings(nlohmann::json::parse(first[i]));
        }
        if (!same) {
          errors.push_back(run.outputs[i] + " differs between runs");
          ok = false;
        }
      }
    }
    deterministic += ok ? 1 : 0;
  }

  std::string detail = errors.empty()
                           ? Fmt("datastore round trip bit-identical; %zu/%zu subcommands deterministic; "
                                 "dual-check (1000) and grad-check (100) exit 0",
                                 deterministic, runs.size())
                           : "problems:";
  for (const auto& e : errors) detail += " " + e + ";";
  return {errors.empty(), detail};
}

}  // namespace

int main() {
  std::vector<std::pair<int, std::function<Outcome()>>> criteria;
  int failures = 0;
  auto report = [&](int n, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](int n, const std::function<Outcome()>& f) {
    try {
      report(n, f());
    } catch (const std::exception& e) {
      report(n, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, DualForm);
  guarded(2, GradientOracle);
  guarded(3, TableOne);
  guarded(4, Retrieval);

  std::vector<PreparedTask> prepared;
  std::vector<SeedRun> runs;
  try {
    for (const auto seed : kTaskSeeds) {
      SynthConfig cfg;
      cfg.seed = seed;
      prepared.push_back(PrepareTask(cfg));
      runs.push_back(RunSeed(prepared.back(), seed));
    }
  } catch (const std::exception& e) {
    std::cerr << "synthetic studies failed: " << e.what() << "\n";
  }
  const bool have_runs = runs.size() == kTaskSeeds.size();
  auto need_runs = [&](auto f) {
    return [&, f]() -> Outcome {
      if (!have_runs) return {false, "synthetic studies did not complete"};
      return f(runs);
    };
  };

  guarded(5, [&] {
    if (prepared.empty()) return Outcome{false, "no synthetic task"};
    return DistributionAxioms(prepared.front());
  });
  guarded(6, need_runs(SimilarityDirection));
  guarded(7, need_runs(DomainGain));
  guarded(8, WordLevel);
  guarded(9, need_runs(FrequencyDirection));
  guarded(10, [&] {
    if (prepared.empty()) return Outcome{false, "no synthetic task"};
    return CliRoundTrip(prepared.front());
  });

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : Fmt("%d CRITERIA FAIL", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
