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

#include "knnmt/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knnmt/error.hpp"
#include "knnmt/random.hpp"

namespace knnmt {
namespace {

Rng Stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(SplitMix(seed ^ SplitMix(stream)));
}

struct Word {
  std::string text;
  std::vector<TokenId> pieces;
};

class WordSampler {
 public:
  explicit WordSampler(std::vector<double> weights) : cdf_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
    for (double& c : cdf_) c /= cdf_.back();
  }

  std::size_t Sample(Rng& rng) const {
    const double u = rng.Uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

std::vector<std::size_t> RankByKey(std::vector<std::pair<double, std::size_t>> keys) {
  std::sort(keys.begin(), keys.end());
  std::vector<std::size_t> rank(keys.size());
  for (std::size_t r = 0; r < keys.size(); ++r) rank[keys[r].second] = r;
  return rank;
}

// Zipf weights from a rank assignment: weight(w) = (rank(w) + 1)^-s.
std::vector<double> ZipfWeights(const std::vector<std::size_t>& rank_of, double s) {
  std::vector<double> w(rank_of.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::pow(static_cast<double>(rank_of[i] + 1), -s);
  }
  return w;
}

struct Geometry {
  std::vector<Vector> general_mean;
  std::vector<Vector> indomain_mean;
};

Geometry MakeGeometry(const SynthConfig& cfg) {
  Rng rng = Stream(cfg.seed, 1);
  const std::size_t free_dims = cfg.dim - 1;
  const double mean_sd = cfg.class_sep / std::sqrt(2.0 * static_cast<double>(free_dims));
  Geometry g;
  for (std::uint32_t v = 0; v < cfg.vocab_size; ++v) {
    Vector mu(cfg.dim, 0.0), dir(free_dims);
    for (std::size_t d = 0; d < free_dims; ++d) mu[d] = rng.Normal(0.0, mean_sd);
    double norm = 0.0;
    for (double& x : dir) {
      x = rng.Normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    Vector shifted = mu;
    for (std::size_t d = 0; d < free_dims; ++d) shifted[d] += cfg.shift * dir[d] / norm;
    // Constant coordinate: plays the role of a bias for the linear OPL.
    mu[free_dims] = 1.0;
    shifted[free_dims] = 1.0;
    g.general_mean.push_back(std::move(mu));
    g.indomain_mean.push_back(std::move(shifted));
  }
  return g;
}

SynthSplit GenerateSplit(const SynthConfig& cfg, std::size_t n_tokens,
                         const std::vector<Word>& words, const WordSampler& sampler,
                         const std::vector<Vector>& means, std::size_t fallback_word,
                         Rng rng) {
  SynthSplit split;
  split.corpus.dim = cfg.dim;
  split.corpus.vocab_size = cfg.vocab_size;
  split.token_counts.assign(cfg.vocab_size, 0);
  std::vector<ContextPair> sentence;
  std::vector<std::string> sentence_words;
  std::size_t produced = 0;
  const std::size_t free_dims = cfg.dim - 1;
  while (produced < n_tokens) {
    const std::size_t span = cfg.max_sentence_words - cfg.min_sentence_words + 1;
    const std::size_t length = cfg.min_sentence_words + rng.Below(span);
    sentence.clear();
    sentence_words.clear();
    for (std::size_t i = 0; i < length && produced < n_tokens; ++i) {
      const std::size_t remaining = n_tokens - produced;
      std::size_t w = sampler.Sample(rng);
      for (int tries = 0; words[w].pieces.size() > remaining && tries < 64; ++tries) {
        w = sampler.Sample(rng);
      }
      if (words[w].pieces.size() > remaining) w = fallback_word;
      for (TokenId t : words[w].pieces) {
        ContextPair p;
        p.context.resize(cfg.dim);
        for (std::size_t d = 0; d < free_dims; ++d) {
          p.context[d] = static_cast<float>(cfg.context_scale *
                                            (means[t][d] + rng.Normal(0.0, cfg.noise)));
        }
        p.context[free_dims] = static_cast<float>(cfg.context_scale);
        p.token = t;
        ++split.token_counts[t];
        sentence.push_back(std::move(p));
      }
      produced += words[w].pieces.size();
      sentence_words.push_back(words[w].text);
    }
    split.corpus.AddSentence(sentence);
    split.words.push_back(sentence_words);
  }
  return split;
}

}  // namespace

std::string TokenString(TokenId token) { return "t" + std::to_string(token); }

void ValidateSynthConfig(const SynthConfig& cfg) {
  if (cfg.dim < 2) Fail(ErrorCode::kInvalidArgument, "synth dim must be >= 2");
  if (cfg.vocab_size < 2) Fail(ErrorCode::kInvalidArgument, "vocab_size must be >= 2");
  if (cfg.n_general == 0 || cfg.n_indomain == 0 || cfg.n_val == 0 || cfg.n_test == 0) {
    Fail(ErrorCode::kInvalidArgument, "all split sizes must be >= 1");
  }
  if (!(cfg.class_sep > 0.0)) Fail(ErrorCode::kInvalidArgument, "class_sep must be > 0");
  if (!(cfg.shift >= 0.0)) Fail(ErrorCode::kInvalidArgument, "shift must be >= 0");
  if (!(cfg.low_freq_skew >= 1.0)) Fail(ErrorCode::kInvalidArgument, "low_freq_skew must be >= 1");
  if (!(cfg.noise > 0.0)) Fail(ErrorCode::kInvalidArgument, "noise must be > 0");
  if (!(cfg.context_scale > 0.0)) Fail(ErrorCode::kInvalidArgument, "context_scale must be > 0");
  if (!(cfg.domain_fraction >= 0.0 && cfg.domain_fraction <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "domain_fraction must lie in [0, 1]");
  }
  if (!(cfg.general_damp > 0.0 && cfg.general_damp <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "general_damp must lie in (0, 1]");
  }
  if (cfg.min_sentence_words == 0 || cfg.max_sentence_words < cfg.min_sentence_words) {
    Fail(ErrorCode::kInvalidArgument, "bad sentence length range");
  }
}

SynthTask GenerateTask(const SynthConfig& cfg) {
  ValidateSynthConfig(cfg);
  SynthTask task;
  task.config = cfg;
  const std::size_t n_words = cfg.vocab_size;

  // Frequency laws: a random subset of "domain words" is pushed towards the
  // tail of the general ranking and towards the head of the in-domain one.
  Rng law_rng = Stream(cfg.seed, 2);
  std::vector<std::pair<double, std::size_t>> general_keys, indomain_keys;
  std::vector<bool> is_domain(n_words);
  for (std::size_t w = 0; w < n_words; ++w) {
    const bool domain = law_rng.Uniform() < cfg.domain_fraction;
    is_domain[w] = domain;
    general_keys.emplace_back(law_rng.Uniform() + (domain ? 1.0 : 0.0), w);
    indomain_keys.emplace_back(law_rng.Uniform() + (domain ? 0.0 : 1.0), w);
  }
  const auto general_rank = RankByKey(general_keys);
  const auto indomain_rank = RankByKey(indomain_keys);

  // Sub-word layer: the lowest few token ids double as suffix pieces; words
  // in the rarer half of the general law are split into stem + suffix.
  const std::size_t n_suffix = std::max<std::size_t>(1, cfg.vocab_size / 32);
  std::vector<Word> words(n_words);
  std::size_t fallback = 0;
  for (std::size_t w = 0; w < n_words; ++w) {
    words[w].pieces.push_back(static_cast<TokenId>(w));
    if (w >= n_suffix && general_rank[w] >= n_words / 2) {
      words[w].pieces.push_back(static_cast<TokenId>(w % n_suffix));
    }
    for (TokenId t : words[w].pieces) words[w].text += TokenString(t);
    task.subword_map[words[w].text] = words[w].pieces;
    if (words[w].pieces.size() == 1 && general_rank[w] < general_rank[fallback]) fallback = w;
  }

  const Geometry geo = MakeGeometry(cfg);
  auto general_weights = ZipfWeights(general_rank, cfg.low_freq_skew);
  for (std::size_t w = 0; w < n_words; ++w) {
    if (is_domain[w]) general_weights[w] *= cfg.general_damp;
  }
  const WordSampler general_sampler(std::move(general_weights));
  const WordSampler indomain_sampler(ZipfWeights(indomain_rank, cfg.low_freq_skew));
  std::size_t indomain_fallback = fallback;
  for (std::size_t w = 0; w < n_words; ++w) {
    if (words[w].pieces.size() == 1 && indomain_rank[w] < indomain_rank[indomain_fallback]) {
      indomain_fallback = w;
    }
  }

  task.general = GenerateSplit(cfg, cfg.n_general, words, general_sampler, geo.general_mean,
                               fallback, Stream(cfg.seed, 10));
  task.train = GenerateSplit(cfg, cfg.n_indomain, words, indomain_sampler, geo.indomain_mean,
                             indomain_fallback, Stream(cfg.seed, 11));
  task.val = GenerateSplit(cfg, cfg.n_val, words, indomain_sampler, geo.indomain_mean,
                           indomain_fallback, Stream(cfg.seed, 12));
  task.test = GenerateSplit(cfg, cfg.n_test, words, indomain_sampler, geo.indomain_mean,
                            indomain_fallback, Stream(cfg.seed, 13));

  for (const auto& w : words) {
    task.general_word_freq[w.text] = 0;
    task.indomain_word_freq[w.text] = 0;
  }
  for (const auto& s : task.general.words) {
    for (const auto& w : s) ++task.general_word_freq[w];
  }
  for (const auto& s : task.train.words) {
    for (const auto& w : s) ++task.indomain_word_freq[w];
  }
  return task;
}

std::vector<std::string> JoinSentences(const SynthSplit& split) {
  std::vector<std::string> out;
  out.reserve(split.words.size());
  for (const auto& s : split.words) {
    std::string line;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) line += ' ';
      line += s[i];
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<std::string> HypothesisSentences(const SynthSplit& split,
                                             std::span<const ScoredToken> scored,
                                             const SubwordMap& subword_map) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (const auto& sentence : split.words) {
    std::string line;
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const auto& pieces = subword_map.at(sentence[i]);
      if (i) line += ' ';
      for (std::size_t j = 0; j < pieces.size(); ++j) {
        if (pos >= scored.size()) Fail(ErrorCode::kDimensionMismatch, "too few scored steps");
        line += TokenString(scored[pos++].predicted);
      }
    }
    out.push_back(std::move(line));
  }
  if (pos != scored.size()) Fail(ErrorCode::kDimensionMismatch, "scored steps left over");
  return out;
}

BaseModel TrainBaseProjection(const SynthConfig& cfg, std::span<const ContextPair> general,
                              const BaseTrainOptions& options) {
  if (general.empty()) Fail(ErrorCode::kEmptyInput, "empty general-domain data");
  const auto holdout = std::max<std::size_t>(
      1, static_cast<std::size_t>(options.holdout_fraction * static_cast<double>(general.size())));
  const auto split = general.size() > holdout ? general.size() - holdout : 0;
  const auto train = general.first(split == 0 ? general.size() : split);
  const auto val = general.last(holdout);

  BaseModel model;
  model.projection = Projection::Zeros(cfg.vocab_size, cfg.dim);
  model.val_ppl = ValidationPerplexity(model.projection, val);
  std::size_t chunk = 0;
  while (model.steps < options.max_steps) {
    FtHyper ft;
    ft.lr = options.lr / (cfg.context_scale * cfg.context_scale);
    ft.alpha = 0.0;
    ft.batch = options.batch;
    ft.steps = std::min(options.chunk_steps, options.max_steps - model.steps);
    ft.eval_interval = options.eval_interval;
    ft.seed = SplitMix(cfg.seed + 1000 + chunk++);
    const FinetuneResult r = FinetuneFull(model.projection, train, ft, val);
    model.steps += ft.steps;
    const double previous = model.val_ppl;
    model.projection = r.projection;
    model.val_ppl = r.best_val_ppl;
    if (previous - model.val_ppl < options.plateau_tol * previous) break;
  }
  return model;
}

}  // namespace knnmt
