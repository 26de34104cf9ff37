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
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "knnmt/types.hpp"

namespace knnmt {

enum class Metric {
  kInnerProduct,
  kNegativeL2,
};

std::string_view MetricName(Metric metric);

/// Parses "ip" / "l2" (also the long forms "inner-product", "negative-l2").
Metric ParseMetric(std::string_view text);

struct Neighbor {
  std::size_t index = 0;
  Vector key;
  TokenId value = 0;
  double score = 0.0;
};

/// Result of an exact top-k query. Entries are ordered by non-increasing
/// score, ties by ascending datastore index.
struct NeighborSet {
  std::vector<Neighbor> entries;
  Metric metric = Metric::kInnerProduct;
  std::size_t query_dim = 0;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  /// The first `k` entries (all of them when k >= size()).
  NeighborSet prefix(std::size_t k) const;
};

/// Append-only key/value translation memory. Keys are held as 32-bit floats,
/// scoring accumulates in double.
class Datastore {
 public:
  Datastore(std::uint32_t dim, std::uint32_t vocab_size);

  static Datastore Build(std::span<const ContextPair> pairs, std::uint32_t dim,
                         std::uint32_t vocab_size);

  void Add(std::span<const double> key, TokenId value);
  void Reserve(std::size_t count);

  std::uint32_t dim() const noexcept { return dim_; }
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t count() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const float> key(std::size_t i) const {
    return {keys_.data() + i * dim_, dim_};
  }
  TokenId value(std::size_t i) const { return values_[i]; }

  std::span<const float> raw_keys() const noexcept { return keys_; }
  std::span<const TokenId> values() const noexcept { return values_; }

  /// Score of entry i against `query` under `metric`.
  double Score(std::size_t i, std::span<const double> query, Metric metric) const;

  NeighborSet Search(std::span<const double> query, std::size_t k, Metric metric) const;

  void Save(const std::filesystem::path& path) const;
  static Datastore Load(const std::filesystem::path& path);

  friend bool operator==(const Datastore&, const Datastore&) = default;

 private:
  Datastore(std::uint32_t dim, std::uint32_t vocab_size, std::vector<float> keys,
            std::vector<TokenId> values);

  std::uint32_t dim_;
  std::uint32_t vocab_size_;
  std::vector<float> keys_;
  std::vector<TokenId> values_;
};

}  // namespace knnmt
