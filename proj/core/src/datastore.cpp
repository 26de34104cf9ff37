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

#include "knnmt/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "knnmt/error.hpp"

namespace knnmt {
namespace {

constexpr std::array<char, 4> kMagic = {'K', 'N', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

struct Candidate {
  double score;
  std::size_t index;
};

// Heap order: "a < b" means a ranks ahead of b, so the heap top is the
// current worst survivor.
bool RanksAhead(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

}  // namespace

std::string_view MetricName(Metric metric) {
  return metric == Metric::kInnerProduct ? "ip" : "l2";
}

Metric ParseMetric(std::string_view text) {
  if (text == "ip" || text == "inner-product") return Metric::kInnerProduct;
  if (text == "l2" || text == "negative-l2") return Metric::kNegativeL2;
  Fail(ErrorCode::kInvalidArgument, "unknown metric: " + std::string(text));
}

NeighborSet NeighborSet::prefix(std::size_t k) const {
  NeighborSet out;
  out.metric = metric;
  out.query_dim = query_dim;
  const std::size_t n = std::min(k, entries.size());
  out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Datastore::Datastore(std::uint32_t dim, std::uint32_t vocab_size)
    : dim_(dim), vocab_size_(vocab_size) {
  if (dim == 0) Fail(ErrorCode::kInvalidArgument, "datastore dim must be positive");
  if (vocab_size == 0) Fail(ErrorCode::kInvalidArgument, "vocab_size must be positive");
}

Datastore::Datastore(std::uint32_t dim, std::uint32_t vocab_size, std::vector<float> keys,
                     std::vector<TokenId> values)
    : dim_(dim), vocab_size_(vocab_size), keys_(std::move(keys)), values_(std::move(values)) {}

Datastore Datastore::Build(std::span<const ContextPair> pairs, std::uint32_t dim,
                           std::uint32_t vocab_size) {
  Datastore ds(dim, vocab_size);
  ds.Reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.context.size() != dim) {
      Fail(ErrorCode::kDimensionMismatch,
           "pair " + std::to_string(i) + ": vector length " + std::to_string(p.context.size()) +
               " != dim " + std::to_string(dim));
    }
    if (p.token >= vocab_size) {
      Fail(ErrorCode::kOutOfRange, "pair " + std::to_string(i) + ": token id " +
                                       std::to_string(p.token) + " >= vocab_size");
    }
    if (!AllFinite(p.context)) {
      Fail(ErrorCode::kNonFinite, "pair " + std::to_string(i) + ": non-finite key");
    }
    ds.Add(p.context, p.token);
  }
  return ds;
}

void Datastore::Reserve(std::size_t count) {
  keys_.reserve(count * dim_);
  values_.reserve(count);
}

void Datastore::Add(std::span<const double> key, TokenId value) {
  if (key.size() != dim_) Fail(ErrorCode::kDimensionMismatch, "key length != dim");
  if (value >= vocab_size_) Fail(ErrorCode::kOutOfRange, "token id >= vocab_size");
  for (double x : key) {
    const auto f = static_cast<float>(x);
    if (!std::isfinite(f)) Fail(ErrorCode::kNonFinite, "non-finite key");
    keys_.push_back(f);
  }
  values_.push_back(value);
}

double Datastore::Score(std::size_t i, std::span<const double> query, Metric metric) const {
  const float* k = keys_.data() + i * dim_;
  double s = 0.0;
  if (metric == Metric::kInnerProduct) {
    for (std::uint32_t d = 0; d < dim_; ++d) s += static_cast<double>(k[d]) * query[d];
    return s;
  }
  for (std::uint32_t d = 0; d < dim_; ++d) {
    const double diff = static_cast<double>(k[d]) - query[d];
    s += diff * diff;
  }
  return -s;
}

NeighborSet Datastore::Search(std::span<const double> query, std::size_t k,
                              Metric metric) const {
  if (empty()) Fail(ErrorCode::kEmptyDatastore, "empty datastore");
  if (k == 0) Fail(ErrorCode::kInvalidArgument, "k must be positive");
  if (query.size() != dim_) Fail(ErrorCode::kDimensionMismatch, "query length != dim");

  const std::size_t keep = std::min(k, count());
  std::vector<Candidate> heap;
  heap.reserve(keep + 1);
  for (std::size_t i = 0; i < count(); ++i) {
    const Candidate c{Score(i, query, metric), i};
    if (heap.size() < keep) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), RanksAhead);
    } else if (RanksAhead(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), RanksAhead);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), RanksAhead);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), RanksAhead);

  NeighborSet out;
  out.metric = metric;
  out.query_dim = dim_;
  out.entries.reserve(heap.size());
  for (const auto& c : heap) {
    Neighbor n;
    n.index = c.index;
    const auto raw = key(c.index);
    n.key.assign(raw.begin(), raw.end());
    n.value = values_[c.index];
    n.score = c.score;
    out.entries.push_back(std::move(n));
  }
  return out;
}

void Datastore::Save(const std::filesystem::path& path) const {
  detail::LeWriter w;
  w.Bytes(kMagic.data(), kMagic.size());
  w.Int<std::uint16_t>(kVersion);
  w.Int<std::uint32_t>(dim_);
  w.Int<std::uint32_t>(vocab_size_);
  w.Int<std::uint64_t>(count());
  for (std::size_t i = 0; i < count(); ++i) {
    for (float f : key(i)) w.F32(f);
    w.Int<std::uint32_t>(values_[i]);
  }
  w.Commit(path);
}

Datastore Datastore::Load(const std::filesystem::path& path) {
  detail::LeReader r(path);
  if (r.Magic() != kMagic) Fail(ErrorCode::kBadMagic, "bad magic: not a KNDS datastore");
  const auto version = r.Int<std::uint16_t>("version");
  if (version != kVersion) {
    Fail(ErrorCode::kVersionMismatch,
         "version mismatch: file has " + std::to_string(version) + ", expected 1");
  }
  const auto dim = r.Int<std::uint32_t>("dim");
  const auto vocab = r.Int<std::uint32_t>("vocab_size");
  const auto count = r.Int<std::uint64_t>("count");
  if (dim == 0 || vocab == 0) Fail(ErrorCode::kInvalidArgument, "zero dim or vocab_size");
  const std::uint64_t record = 4ull * dim + 4ull;
  if (count > r.remaining() / record) {
    Fail(ErrorCode::kTruncatedFile, "truncated file: count " + std::to_string(count) +
                                        " exceeds remaining bytes");
  }
  std::vector<float> keys;
  std::vector<TokenId> values;
  keys.reserve(count * dim);
  values.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint32_t d = 0; d < dim; ++d) keys.push_back(r.F32("key"));
    const auto v = r.Int<std::uint32_t>("value");
    if (v >= vocab) Fail(ErrorCode::kOutOfRange, "stored token id >= vocab_size");
    values.push_back(v);
  }
  return Datastore(dim, vocab, std::move(keys), std::move(values));
}

}  // namespace knnmt
