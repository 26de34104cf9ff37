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

#include <vector>

#include "knnmt/analysis.hpp"
#include "knnmt/datastore.hpp"
#include "knnmt/opl_finetune.hpp"
#include "knnmt/prediction.hpp"
#include "knnmt/synthdata.hpp"

namespace knnmt {

// End-to-end protocols on a synthetic task: the kNN-MT / OPL-FT similarity
// study, the domain-adaptation comparison and the word-level analysis.

struct ExperimentOptions {
  KnnGrid knn_grid = KnnGrid::Default();
  GridSpec ft_grid = GridSpec::Default();
  /// Grid protocol for per-step OPL-FT in the similarity study.
  GridMode opl_grid_mode = GridMode::kFull;
  /// Grid protocol for full-data fine-tuning.
  GridMode ft_grid_mode = GridMode::kStaged;
  /// SGD steps taken on each timestep's neighbors by per-step OPL-FT.
  std::size_t per_step_sgd_steps = 1;
  /// steps / batch / eval cadence for full-data OPL fine-tuning.
  FtHyper full_ft = {.lr = 0.1, .alpha = 0.0, .steps = 1000, .batch = 64,
                     .eval_interval = 50, .seed = 7};
  BaseTrainOptions base;
};

struct PreparedTask {
  SynthTask task;
  BaseModel base;
  Datastore datastore;
};

/// Generates the task, trains the base projection on general data and builds
/// the datastore from the in-domain training split.
PreparedTask PrepareTask(const SynthConfig& cfg, const BaseTrainOptions& base = {});

struct SimilarityStudy {
  Metric metric = Metric::kInnerProduct;
  KnnTuneResult knn;
  GridResult opl;
  GoldProbSeries nmt;
  GoldProbSeries knn_mt;
  GoldProbSeries opl_ft;
};

SimilarityStudy RunSimilarityStudy(const PreparedTask& prepared, Metric metric,
                                   const ExperimentOptions& options = {});

struct DomainAdaptation {
  Metric metric = Metric::kInnerProduct;
  double base_ppl = 0.0;
  double knn_ppl = 0.0;
  double ft_ppl = 0.0;
  KnnTuneResult knn;
  GridResult ft;
  Projection ft_projection;
};

DomainAdaptation RunDomainAdaptation(const PreparedTask& prepared, Metric metric,
                                     const ExperimentOptions& options = {});

struct WordAnalysis {
  WordStatsMap nmt;
  WordStatsMap knn_mt;
  WordStatsMap ft;
  /// Delta R of kNN-MT against the fully fine-tuned OPL.
  std::map<std::string, double> delta_recall;
  std::vector<BucketSummary> delta_by_gamma;
  std::vector<BucketSummary> delta_by_frequency;
  std::vector<WordOccurrence> occurrences;
  std::vector<NeighborSummary> neighbors_by_frequency;
};

struct WordAnalysisInputs {
  const SynthSplit& test;
  const FrequencyTable& indomain_word_freq;
  const FrequencyTable& general_word_freq;
  const SubwordMap& subword_map;
  const Datastore& datastore;
};

/// Word-level comparison of the base model, kNN-MT and a fine-tuned OPL on a
/// test split with known word segmentation.
WordAnalysis AnalyzeWords(const WordAnalysisInputs& in, const Hyper& knn_hyper,
                          const Projection& base, const Projection& ft_projection);

WordAnalysis RunWordAnalysis(const PreparedTask& prepared, const Hyper& knn_hyper,
                             const Projection& ft_projection);

}  // namespace knnmt
