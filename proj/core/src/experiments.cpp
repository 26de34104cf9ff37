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

#include "knnmt/experiments.hpp"

namespace knnmt {
namespace {

ScoreOptions Options(ScoreVariant variant, bool retain = false) {
  ScoreOptions o;
  o.variant = variant;
  o.retain_neighbors = retain;
  return o;
}

}  // namespace

PreparedTask PrepareTask(const SynthConfig& cfg, const BaseTrainOptions& base) {
  SynthTask task = GenerateTask(cfg);
  BaseModel model = TrainBaseProjection(cfg, task.general.corpus.pairs, base);
  Datastore ds = Datastore::Build(task.train.corpus.pairs, cfg.dim, cfg.vocab_size);
  return PreparedTask{std::move(task), std::move(model), std::move(ds)};
}

SimilarityStudy RunSimilarityStudy(const PreparedTask& prepared, Metric metric,
                                   const ExperimentOptions& options) {
  const auto& proj = prepared.base.projection;
  const auto& val = prepared.task.val.corpus.pairs;
  const auto& test = prepared.task.test.corpus.pairs;

  SimilarityStudy study;
  study.metric = metric;
  study.knn = TuneKnn(proj, prepared.datastore, metric, val, options.knn_grid);
  const Hyper& hyper = study.knn.best;

  // OPL-FT trains on the same neighbors kNN-MT retrieves.
  std::vector<NeighborSet> val_sets;
  val_sets.reserve(val.size());
  for (const auto& s : val) val_sets.push_back(prepared.datastore.Search(s.context, hyper.k, metric));
  FtHyper base;
  base.steps = options.per_step_sgd_steps;
  study.opl = GridSearchPerStep(proj, val_sets, val, options.ft_grid, base, options.opl_grid_mode);

  study.nmt = {"NMT", GoldProbabilities(ScoreSequence(proj, prepared.datastore, hyper, test,
                                                      Options(ScoreVariant::kNmt)))};
  study.knn_mt = {"kNN-MT", GoldProbabilities(ScoreSequence(proj, prepared.datastore, hyper, test,
                                                            {}))};
  study.opl_ft = {"OPL-FT", GoldProbabilities(FinetunePerStep(proj, prepared.datastore, hyper,
                                                              test, study.opl.best))};
  return study;
}

DomainAdaptation RunDomainAdaptation(const PreparedTask& prepared, Metric metric,
                                     const ExperimentOptions& options) {
  const auto& proj = prepared.base.projection;
  const auto& train = prepared.task.train.corpus.pairs;
  const auto& val = prepared.task.val.corpus.pairs;
  const auto& test = prepared.task.test.corpus.pairs;

  DomainAdaptation out;
  out.metric = metric;
  out.base_ppl = ValidationPerplexity(proj, test);
  out.knn = TuneKnn(proj, prepared.datastore, metric, val, options.knn_grid);
  std::vector<double> logs;
  for (const auto& t : ScoreSequence(proj, prepared.datastore, out.knn.best, test)) {
    logs.push_back(t.log_p_gold);
  }
  out.knn_ppl = PerplexityFromLog(logs);
  out.ft = GridSearch(proj, train, val, options.ft_grid, options.full_ft, options.ft_grid_mode);
  out.ft_projection = FinetuneFull(proj, train, out.ft.best, val).projection;
  out.ft_ppl = ValidationPerplexity(out.ft_projection, test);
  return out;
}

WordAnalysis AnalyzeWords(const WordAnalysisInputs& in, const Hyper& knn_hyper,
                          const Projection& base, const Projection& ft_projection) {
  const SynthSplit& split = in.test;
  const auto& test = split.corpus.pairs;
  const auto refs = JoinSentences(split);

  const auto nmt = ScoreSequence(base, in.datastore, knn_hyper, test,
                                 Options(ScoreVariant::kNmt));
  const auto knn = ScoreSequence(base, in.datastore, knn_hyper, test,
                                 Options(ScoreVariant::kInterpolated, true));
  const auto ft = ScoreSequence(ft_projection, in.datastore, knn_hyper, test,
                                Options(ScoreVariant::kNmt));

  WordAnalysis out;
  auto stats = [&](std::span<const ScoredToken> scored) {
    auto hyp = HypothesisSentences(split, scored, in.subword_map);
    auto m = WordPrf(hyp, refs);
    AnnotateWords(m, in.indomain_word_freq, in.general_word_freq);
    return m;
  };
  out.nmt = stats(nmt);
  out.knn_mt = stats(knn);
  out.ft = stats(ft);
  out.delta_recall = IncrementalRecall(out.knn_mt, out.ft);
  out.delta_by_gamma = SummarizeByGamma(out.delta_recall, out.knn_mt);
  out.delta_by_frequency = SummarizeByFrequency(out.delta_recall, out.knn_mt);

  std::vector<std::string> flat;
  for (const auto& s : split.words) flat.insert(flat.end(), s.begin(), s.end());
  out.occurrences = NeighborQualityByWord(knn, flat, in.subword_map);
  out.neighbors_by_frequency = SummarizeNeighborsByFrequency(out.occurrences, out.knn_mt);
  return out;
}

WordAnalysis RunWordAnalysis(const PreparedTask& prepared, const Hyper& knn_hyper,
                             const Projection& ft_projection) {
  const auto& task = prepared.task;
  return AnalyzeWords({task.test, task.indomain_word_freq, task.general_word_freq,
                       task.subword_map, prepared.datastore},
                      knn_hyper, prepared.base.projection, ft_projection);
}

}  // namespace knnmt
