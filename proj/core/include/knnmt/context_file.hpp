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
#include <vector>

#include "knnmt/types.hpp"

namespace knnmt {

/// Teacher-forcing stream: (context vector, gold token) pairs grouped into
/// sentences. On disk this is the "KNCP" format, where each sentence is
/// terminated by a sentinel record (token 0xFFFFFFFF, zero vector).
struct ContextCorpus {
  std::uint32_t dim = 0;
  std::uint32_t vocab_size = 0;
  std::vector<ContextPair> pairs;
  /// Exclusive end offsets into `pairs`, one per sentence, non-decreasing.
  std::vector<std::size_t> sentence_ends;

  std::size_t sentence_count() const noexcept { return sentence_ends.size(); }
  std::span<const ContextPair> sentence(std::size_t s) const;

  /// Appends a sentence; validates vector lengths and token ids.
  void AddSentence(std::span<const ContextPair> sentence);
};

void SaveContextCorpus(const ContextCorpus& corpus, const std::filesystem::path& path);
ContextCorpus LoadContextCorpus(const std::filesystem::path& path);

}  // namespace knnmt
