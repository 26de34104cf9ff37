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

#include "knnmt/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "knnmt/error.hpp"

namespace knnmt {
namespace {

void CheckSameLength(const GoldProbSeries& a, const GoldProbSeries& b) {
  if (a.probs.size() != b.probs.size()) {
    Fail(ErrorCode::kDimensionMismatch, "series length mismatch: " + a.variant + " vs " + b.variant);
  }
  if (a.probs.empty()) Fail(ErrorCode::kEmptyInput, "empty series");
}

double SafeRatio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double HarmonicF1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

template <class BucketOf>
std::vector<BucketSummary> Summarize(const std::map<std::string, double>& values,
                                     const WordStatsMap& annotated, BucketOf bucket_of,
                                     std::string_view (*label)(int)) {
  std::vector<std::vector<double>> groups(kBucketCount);
  for (const auto& [word, value] : values) {
    const auto it = annotated.find(word);
    if (it == annotated.end()) continue;
    const int b = bucket_of(it->second);
    if (b >= 0) groups[b].push_back(value);
  }
  std::vector<BucketSummary> out;
  for (int b = 0; b < kBucketCount; ++b) {
    const MeanStd ms = ComputeMeanStd(groups[b]);
    out.push_back({std::string(label(b)), groups[b].size(), ms.mean, ms.stddev});
  }
  return out;
}

int GammaBucketOf(const WordStats& s) { return s.gamma ? GammaBucket(*s.gamma) : -1; }

int FrequencyBucketOf(const WordStats& s) {
  if (!s.gamma || *s.gamma < 5.0 || !s.in_domain_rank_pct) return -1;
  return FrequencyBucket(*s.in_domain_rank_pct);
}

template <class BucketOf>
std::vector<BucketPrf> PooledPrf(const WordStatsMap& annotated, BucketOf bucket_of,
                                 std::string_view (*label)(int), bool with_sum) {
  struct Acc {
    std::size_t n = 0;
    std::uint64_t hyp = 0, ref = 0, match = 0;
  };
  std::vector<Acc> acc(kBucketCount + 1);
  for (const auto& [word, s] : annotated) {
    const int b = bucket_of(s);
    if (b >= 0) {
      ++acc[b].n;
      acc[b].hyp += s.hyp_count;
      acc[b].ref += s.ref_count;
      acc[b].match += s.match_count;
    }
    ++acc[kBucketCount].n;
    acc[kBucketCount].hyp += s.hyp_count;
    acc[kBucketCount].ref += s.ref_count;
    acc[kBucketCount].match += s.match_count;
  }
  std::vector<BucketPrf> out;
  for (int b = 0; b <= kBucketCount; ++b) {
    if (b == kBucketCount && !with_sum) break;
    const auto& a = acc[b];
    const double p = SafeRatio(static_cast<double>(a.match), static_cast<double>(a.hyp));
    const double r = SafeRatio(static_cast<double>(a.match), static_cast<double>(a.ref));
    out.push_back({b == kBucketCount ? std::string("SUM") : std::string(label(b)), a.n, a.ref, p,
                   r, HarmonicF1(p, r)});
  }
  return out;
}

}  // namespace

double MeanDiff(const GoldProbSeries& a, const GoldProbSeries& b) {
  CheckSameLength(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) s += a.probs[i] - b.probs[i];
  return s / static_cast<double>(a.probs.size());
}

double VarDiff(const GoldProbSeries& a, const GoldProbSeries& b) {
  CheckSameLength(a, b);
  const std::size_t n = a.probs.size();
  if (n < 2) Fail(ErrorCode::kInvalidArgument, "variance needs at least two tokens");
  const double m = MeanDiff(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = a.probs[i] - b.probs[i] - m;
    s += e * e;
  }
  return s / static_cast<double>(n - 1);
}

double Perplexity(std::span<const double> probs) {
  if (probs.empty()) Fail(ErrorCode::kEmptyInput, "perplexity of empty series");
  double nll = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) Fail(ErrorCode::kNonFinite, "zero gold probability; use log-domain PPL");
    nll -= std::log(p);
  }
  return std::exp(nll / static_cast<double>(probs.size()));
}

double PerplexityFromLog(std::span<const double> log_probs) {
  if (log_probs.empty()) Fail(ErrorCode::kEmptyInput, "perplexity of empty series");
  double nll = 0.0;
  for (double lp : log_probs) nll -= lp;
  return std::exp(nll / static_cast<double>(log_probs.size()));
}

double Gamma(std::uint64_t f_id, std::uint64_t f_gd) {
  if (f_id == 0) Fail(ErrorCode::kInvalidArgument, "gamma undefined: word not in-domain");
  if (f_gd == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(f_id) / static_cast<double>(f_gd);
}

int GammaBucket(double gamma) {
  if (gamma < 1.0) return 0;
  if (gamma < 2.0) return 1;
  if (gamma < 5.0) return 2;
  return 3;
}

std::string_view GammaBucketLabel(int bucket) {
  static constexpr std::string_view kLabels[] = {"0~1", "1~2", "2~5", "5~"};
  return kLabels[bucket];
}

int FrequencyBucket(double rank_pct) {
  if (rank_pct <= 1.0) return 0;
  if (rank_pct <= 5.0) return 1;
  if (rank_pct <= 20.0) return 2;
  return 3;
}

std::string_view FrequencyBucketLabel(int bucket) {
  static constexpr std::string_view kLabels[] = {"top 1%", "top 1~5%", "top 5~20%",
                                                 "top 20~100%"};
  return kLabels[bucket];
}

double WordStats::precision() const {
  return SafeRatio(static_cast<double>(match_count), static_cast<double>(hyp_count));
}

double WordStats::recall() const {
  return SafeRatio(static_cast<double>(match_count), static_cast<double>(ref_count));
}

double WordStats::f1() const { return HarmonicF1(precision(), recall()); }

std::vector<std::string> SplitWords(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    const std::size_t start = i;
    while (i < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    if (i > start) out.emplace_back(sentence.substr(start, i - start));
  }
  return out;
}

WordStatsMap WordPrf(std::span<const std::string> hyp_sentences,
                     std::span<const std::string> ref_sentences) {
  WordStatsMap stats;
  const std::size_t n = std::max(hyp_sentences.size(), ref_sentences.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string, std::uint64_t> hyp, ref;
    if (i < hyp_sentences.size()) {
      for (auto& w : SplitWords(hyp_sentences[i])) ++hyp[w];
    }
    if (i < ref_sentences.size()) {
      for (auto& w : SplitWords(ref_sentences[i])) ++ref[w];
    }
    for (const auto& [w, c] : hyp) {
      auto& s = stats[w];
      s.word = w;
      s.hyp_count += c;
      const auto it = ref.find(w);
      if (it != ref.end()) s.match_count += std::min(c, it->second);
    }
    for (const auto& [w, c] : ref) {
      auto& s = stats[w];
      s.word = w;
      s.ref_count += c;
    }
  }
  return stats;
}

std::map<std::string, double> InDomainRankPct(const FrequencyTable& f_id) {
  std::vector<std::pair<std::string, std::uint64_t>> items;
  for (const auto& [w, c] : f_id) {
    if (c > 0) items.emplace_back(w, c);
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::string, double> pct;
  const double n = static_cast<double>(items.size());
  for (std::size_t r = 0; r < items.size(); ++r) {
    pct[items[r].first] = 100.0 * static_cast<double>(r + 1) / n;
  }
  return pct;
}

void AnnotateWords(WordStatsMap& stats, const FrequencyTable& f_id, const FrequencyTable& f_gd) {
  const auto pct = InDomainRankPct(f_id);
  for (auto& [word, s] : stats) {
    const auto id = f_id.find(word);
    if (id == f_id.end() || id->second == 0) {
      s.gamma.reset();
      s.in_domain_rank_pct.reset();
      continue;
    }
    const auto gd = f_gd.find(word);
    s.gamma = Gamma(id->second, gd == f_gd.end() ? 0 : gd->second);
    s.in_domain_rank_pct = pct.at(word);
  }
}

std::map<std::string, double> IncrementalRecall(const WordStatsMap& system,
                                                const WordStatsMap& ft_proxy) {
  std::map<std::string, double> out;
  for (const auto& [word, s] : system) {
    if (s.ref_count == 0) continue;
    const auto it = ft_proxy.find(word);
    if (it == ft_proxy.end() || it->second.ref_count == 0) continue;
    out[word] = s.recall() - it->second.recall();
  }
  return out;
}

std::vector<BucketSummary> SummarizeByGamma(const std::map<std::string, double>& values,
                                            const WordStatsMap& annotated) {
  return Summarize(values, annotated, GammaBucketOf, GammaBucketLabel);
}

std::vector<BucketSummary> SummarizeByFrequency(const std::map<std::string, double>& values,
                                                const WordStatsMap& annotated) {
  return Summarize(values, annotated, FrequencyBucketOf, FrequencyBucketLabel);
}

std::vector<BucketPrf> PrfByGamma(const WordStatsMap& annotated) {
  return PooledPrf(annotated, GammaBucketOf, GammaBucketLabel, true);
}

std::vector<BucketPrf> PrfByFrequency(const WordStatsMap& annotated) {
  return PooledPrf(annotated, FrequencyBucketOf, FrequencyBucketLabel, false);
}

NeighborQuality StepNeighborQuality(const NeighborSet& nbrs, TokenId gold) {
  if (nbrs.empty()) Fail(ErrorCode::kEmptyInput, "empty neighbor set");
  auto distance = [&](const Neighbor& n) {
    return nbrs.metric == Metric::kNegativeL2 ? -n.score : n.score;
  };
  NeighborQuality q;
  std::set<TokenId> labels;
  std::optional<std::size_t> first_gold;
  for (std::size_t r = 0; r < nbrs.size(); ++r) {
    const auto& n = nbrs.entries[r];
    labels.insert(n.value);
    if (n.value == gold) {
      ++q.gold_count;
      if (!first_gold) first_gold = r;
    }
  }
  const std::size_t at = first_gold.value_or(nbrs.size() - 1);
  q.unretrieved = !first_gold.has_value();
  q.gold_rank = static_cast<double>(at + 1);
  q.gold_dist = distance(nbrs.entries[at]);
  q.distinct_labels = labels.size();
  return q;
}

std::vector<WordOccurrence> NeighborQualityByWord(std::span<const ScoredToken> steps,
                                                  std::span<const std::string> ref_words,
                                                  const SubwordMap& subword_map) {
  std::vector<WordOccurrence> out;
  out.reserve(ref_words.size());
  std::size_t pos = 0;
  for (const auto& word : ref_words) {
    const auto it = subword_map.find(word);
    if (it == subword_map.end() || it->second.empty()) {
      Fail(ErrorCode::kOutOfRange, "word missing from sub-word map: " + word);
    }
    const auto& pieces = it->second;
    if (pos + pieces.size() > steps.size()) {
      Fail(ErrorCode::kDimensionMismatch, "reference words exceed scored steps");
    }
    WordOccurrence occ;
    occ.word = word;
    occ.first_step = pos;
    occ.quality.gold_count = std::numeric_limits<std::size_t>::max();
    occ.quality.distinct_labels = 0;
    double rank = 0.0, dist = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const auto& step = steps[pos + i];
      if (step.gold_token != pieces[i]) {
        Fail(ErrorCode::kInvalidArgument, "reference word '" + word + "' misaligned with step " +
                                              std::to_string(pos + i));
      }
      if (!step.neighbors) {
        Fail(ErrorCode::kInvalidArgument, "missing neighbor retention at step " +
                                              std::to_string(pos + i));
      }
      const NeighborQuality q = StepNeighborQuality(*step.neighbors, step.gold_token);
      occ.quality.unretrieved = occ.quality.unretrieved || q.unretrieved;
      rank += q.gold_rank;
      dist += q.gold_dist;
      occ.quality.gold_count = std::min(occ.quality.gold_count, q.gold_count);
      occ.quality.distinct_labels = std::max(occ.quality.distinct_labels, q.distinct_labels);
    }
    const double n = static_cast<double>(pieces.size());
    occ.quality.gold_rank = rank / n;
    occ.quality.gold_dist = dist / n;
    pos += pieces.size();
    out.push_back(std::move(occ));
  }
  if (pos != steps.size()) {
    Fail(ErrorCode::kDimensionMismatch, "reference words do not cover all scored steps");
  }
  return out;
}

std::vector<NeighborSummary> SummarizeNeighborsByFrequency(
    std::span<const WordOccurrence> occurrences, const WordStatsMap& annotated) {
  std::vector<NeighborSummary> out(kBucketCount);
  for (int b = 0; b < kBucketCount; ++b) out[b].label = std::string(FrequencyBucketLabel(b));
  for (const auto& occ : occurrences) {
    const auto it = annotated.find(occ.word);
    if (it == annotated.end()) continue;
    const int b = FrequencyBucketOf(it->second);
    if (b < 0) continue;
    auto& s = out[b];
    ++s.occurrences;
    s.unretrieved_pct += occ.quality.unretrieved ? 1.0 : 0.0;
    s.gold_rank += occ.quality.gold_rank;
    s.gold_dist += occ.quality.gold_dist;
    s.gold_count += static_cast<double>(occ.quality.gold_count);
    s.distinct_labels += static_cast<double>(occ.quality.distinct_labels);
  }
  for (auto& s : out) {
    if (s.occurrences == 0) continue;
    const double n = static_cast<double>(s.occurrences);
    s.unretrieved_pct *= 100.0 / n;
    s.gold_rank /= n;
    s.gold_dist /= n;
    s.gold_count /= n;
    s.distinct_labels /= n;
  }
  return out;
}

MeanStd ComputeMeanStd(std::span<const double> values) {
  MeanStd ms;
  if (values.empty()) return ms;
  double s = 0.0;
  for (double v : values) s += v;
  ms.mean = s / static_cast<double>(values.size());
  if (values.size() < 2) return ms;
  double ss = 0.0;
  for (double v : values) ss += (v - ms.mean) * (v - ms.mean);
  ms.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return ms;
}

}  // namespace knnmt
