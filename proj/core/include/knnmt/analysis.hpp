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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnmt/datastore.hpp"
#include "knnmt/prediction.hpp"

namespace knnmt {

/// Gold-label probabilities of one system over a teacher-forced test set.
struct GoldProbSeries {
  std::string variant;  // "NMT", "kNN-MT", "OPL-FT", ...
  std::vector<double> probs;
};

/// M(A - B) = mean of p_A - p_B.
double MeanDiff(const GoldProbSeries& a, const GoldProbSeries& b);
/// V(A - B) with the n - 1 denominator.
double VarDiff(const GoldProbSeries& a, const GoldProbSeries& b);

double Perplexity(std::span<const double> probs);
inline double Perplexity(const GoldProbSeries& s) { return Perplexity(s.probs); }
/// exp(mean(-log p)) from log probabilities, for series that may underflow.
double PerplexityFromLog(std::span<const double> log_probs);

/// gamma(w) = f_id / f_gd, +inf when f_gd = 0. Requires f_id >= 1.
double Gamma(std::uint64_t f_id, std::uint64_t f_gd);

/// Buckets [0,1), [1,2), [2,5), [5,inf) -> 0..3.
int GammaBucket(double gamma);
std::string_view GammaBucketLabel(int bucket);

/// In-domain frequency rank percentile buckets: top 1%, 1-5%, 5-20%, 20-100%.
int FrequencyBucket(double rank_pct);
std::string_view FrequencyBucketLabel(int bucket);

inline constexpr int kBucketCount = 4;

using FrequencyTable = std::map<std::string, std::uint64_t>;

struct WordStats {
  std::string word;
  std::uint64_t hyp_count = 0;
  std::uint64_t ref_count = 0;
  std::uint64_t match_count = 0;
  /// Set only for words seen in the in-domain training data.
  std::optional<double> gamma;
  std::optional<double> in_domain_rank_pct;

  double precision() const;
  double recall() const;
  double f1() const;
};

using WordStatsMap = std::map<std::string, WordStats>;

std::vector<std::string> SplitWords(std::string_view sentence);

/// Per-word precision/recall counts with per-sentence clipped matches.
/// Sentences are whitespace-tokenized; hyp and ref are aligned by index.
WordStatsMap WordPrf(std::span<const std::string> hyp_sentences,
                     std::span<const std::string> ref_sentences);

/// 1-based rank percentile of each word by descending in-domain frequency
/// (ties by word). Words ranked r of n get 100 * r / n.
std::map<std::string, double> InDomainRankPct(const FrequencyTable& f_id);

/// Fills gamma and in_domain_rank_pct for every word present in f_id.
void AnnotateWords(WordStatsMap& stats, const FrequencyTable& f_id,
                   const FrequencyTable& f_gd);

/// Delta R(w) = R_S(w) - R_FT(w) over words present in the reference.
std::map<std::string, double> IncrementalRecall(const WordStatsMap& system,
                                                const WordStatsMap& ft_proxy);

struct BucketSummary {
  std::string label;
  std::size_t n_words = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 when n_words < 2
};

/// Mean / std of a per-word value inside each gamma bucket. Words without a
/// gamma annotation are skipped.
std::vector<BucketSummary> SummarizeByGamma(const std::map<std::string, double>& values,
                                            const WordStatsMap& annotated);

/// Same, over gamma >= 5 words bucketed by in-domain frequency rank.
std::vector<BucketSummary> SummarizeByFrequency(const std::map<std::string, double>& values,
                                                const WordStatsMap& annotated);

struct BucketPrf {
  std::string label;
  std::size_t n_words = 0;
  std::uint64_t ref_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Pooled P/R/F1 per gamma bucket (plus a final "SUM" row).
std::vector<BucketPrf> PrfByGamma(const WordStatsMap& annotated);
/// Pooled P/R/F1 per frequency bucket over gamma >= 5 words.
std::vector<BucketPrf> PrfByFrequency(const WordStatsMap& annotated);

struct NeighborQuality {
  bool unretrieved = false;
  double gold_rank = 1.0;
  double gold_dist = 0.0;
  std::size_t gold_count = 0;
  std::size_t distinct_labels = 1;
};

/// Quality of one step's neighbor list against its gold token. Absent gold
/// takes the last neighbor's rank and distance. Distances are the score
/// under inner product and the negated score (squared L2) under negative-L2.
NeighborQuality StepNeighborQuality(const NeighborSet& nbrs, TokenId gold);

struct WordOccurrence {
  std::string word;
  std::size_t first_step = 0;
  NeighborQuality quality;
};

using SubwordMap = std::map<std::string, std::vector<TokenId>>;

/// Aligns reference words to scored steps through `subword_map` and reduces
/// the sub-token step qualities per word occurrence: unretrieved if any
/// sub-token is unretrieved, mean rank and distance, minimum gold count,
/// maximum distinct labels.
std::vector<WordOccurrence> NeighborQualityByWord(std::span<const ScoredToken> steps,
                                                  std::span<const std::string> ref_words,
                                                  const SubwordMap& subword_map);

struct NeighborSummary {
  std::string label;
  std::size_t occurrences = 0;
  double unretrieved_pct = 0.0;
  double gold_rank = 0.0;
  double gold_dist = 0.0;
  double gold_count = 0.0;
  double distinct_labels = 0.0;
};

/// Occurrence-weighted averages per frequency bucket over gamma >= 5 words.
std::vector<NeighborSummary> SummarizeNeighborsByFrequency(
    std::span<const WordOccurrence> occurrences, const WordStatsMap& annotated);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Sample mean and standard deviation (n - 1), stddev 0 for n < 2.
MeanStd ComputeMeanStd(std::span<const double> values);

}  // namespace knnmt
