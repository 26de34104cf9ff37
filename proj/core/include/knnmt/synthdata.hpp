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

#include <cstdint>
#include <string>
#include <vector>

#include "knnmt/analysis.hpp"
#include "knnmt/context_file.hpp"
#include "knnmt/opl_finetune.hpp"
#include "knnmt/prediction.hpp"

namespace knnmt {

// Synthetic stand-in for an encoder: class-conditional Gaussian context
// vectors, a general domain and a shifted in-domain split, and a small
// word / sub-word layer on top of the token vocabulary.
struct SynthConfig {
  std::uint32_t dim = 32;
  std::uint32_t vocab_size = 128;
  std::size_t n_general = 50000;
  std::size_t n_indomain = 20000;
  std::size_t n_val = 2000;
  std::size_t n_test = 2000;
  /// Expected distance between two class means.
  double class_sep = 6.0;
  /// Displacement of each in-domain class mean along a random unit direction.
  double shift = 3.0;
  /// Zipf exponent of the word frequency laws.
  double low_freq_skew = 1.1;
  /// Per-coordinate standard deviation of context noise.
  double noise = 2.0;
  /// Fraction of words promoted towards the head of the in-domain law.
  double domain_fraction = 0.3;
  /// Multiplier on the general-domain weight of domain words.
  double general_damp = 0.1;
  /// Global multiplier applied to every context coordinate, bias included.
  double context_scale = 0.2;
  std::size_t min_sentence_words = 8;
  std::size_t max_sentence_words = 24;
  std::uint64_t seed = 1;
};

void ValidateSynthConfig(const SynthConfig& cfg);

struct SynthSplit {
  ContextCorpus corpus;
  /// Reference words of every sentence, aligned with corpus sentences.
  std::vector<std::vector<std::string>> words;
  /// Token counts; sums to corpus.pairs.size().
  std::vector<std::uint64_t> token_counts;
};

struct SynthTask {
  SynthConfig config;
  SynthSplit general;
  SynthSplit train;  // in-domain training data (the datastore source)
  SynthSplit val;
  SynthSplit test;
  /// Word frequencies in general-domain data (f_GD) and in-domain training
  /// data (f_ID).
  FrequencyTable general_word_freq;
  FrequencyTable indomain_word_freq;
  SubwordMap subword_map;
};

SynthTask GenerateTask(const SynthConfig& cfg);

/// Sentences of a split joined into whitespace-separated lines.
std::vector<std::string> JoinSentences(const SynthSplit& split);

/// Rebuilds hypothesis words from per-step predicted tokens, reusing the
/// reference word segmentation (teacher forcing keeps the lengths aligned).
std::vector<std::string> HypothesisSentences(const SynthSplit& split,
                                             std::span<const ScoredToken> scored,
                                             const SubwordMap& subword_map);

std::string TokenString(TokenId token);

struct BaseTrainOptions {
  /// Step size for unit-scale contexts; divided by context_scale^2 in use.
  double lr = 0.5;
  std::size_t batch = 64;
  std::size_t chunk_steps = 500;
  std::size_t max_steps = 4000;
  std::size_t eval_interval = 100;
  /// Stop once a chunk improves validation PPL by less than this fraction.
  double plateau_tol = 0.005;
  /// Trailing fraction of the general pairs held out for validation.
  double holdout_fraction = 0.05;
};

struct BaseModel {
  Projection projection;
  double val_ppl = 0.0;
  std::size_t steps = 0;
};

/// General-domain "pre-trained" OPL: mini-batch ascent from zero weights on
/// the general pairs until the held-out perplexity plateaus.
BaseModel TrainBaseProjection(const SynthConfig& cfg, std::span<const ContextPair> general,
                              const BaseTrainOptions& options = {});

}  // namespace knnmt
