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

#include "knnmt/context_file.hpp"

#include <string>

#include "binary_io.hpp"
#include "knnmt/error.hpp"

namespace knnmt {
namespace {

constexpr std::array<char, 4> kMagic = {'K', 'N', 'C', 'P'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::span<const ContextPair> ContextCorpus::sentence(std::size_t s) const {
  const std::size_t begin = s == 0 ? 0 : sentence_ends[s - 1];
  return std::span<const ContextPair>(pairs).subspan(begin, sentence_ends[s] - begin);
}

void ContextCorpus::AddSentence(std::span<const ContextPair> sentence) {
  for (const auto& p : sentence) {
    if (p.context.size() != dim) Fail(ErrorCode::kDimensionMismatch, "context length != dim");
    if (p.token >= vocab_size) Fail(ErrorCode::kOutOfRange, "gold token id >= vocab_size");
    pairs.push_back(p);
  }
  sentence_ends.push_back(pairs.size());
}

void SaveContextCorpus(const ContextCorpus& corpus, const std::filesystem::path& path) {
  detail::LeWriter w;
  w.Bytes(kMagic.data(), kMagic.size());
  w.Int<std::uint16_t>(kVersion);
  w.Int<std::uint32_t>(corpus.dim);
  w.Int<std::uint32_t>(corpus.vocab_size);
  w.Int<std::uint64_t>(corpus.pairs.size() + corpus.sentence_ends.size());
  std::size_t s = 0;
  for (std::size_t i = 0; i <= corpus.pairs.size(); ++i) {
    while (s < corpus.sentence_ends.size() && corpus.sentence_ends[s] == i) {
      for (std::uint32_t d = 0; d < corpus.dim; ++d) w.F32(0.0f);
      w.Int<std::uint32_t>(kSentinelToken);
      ++s;
    }
    if (i == corpus.pairs.size()) break;
    const auto& p = corpus.pairs[i];
    for (double x : p.context) w.F32(static_cast<float>(x));
    w.Int<std::uint32_t>(p.token);
  }
  w.Commit(path);
}

ContextCorpus LoadContextCorpus(const std::filesystem::path& path) {
  detail::LeReader r(path);
  if (r.Magic() != kMagic) Fail(ErrorCode::kBadMagic, "bad magic: not a KNCP context file");
  const auto version = r.Int<std::uint16_t>("version");
  if (version != kVersion) {
    Fail(ErrorCode::kVersionMismatch,
         "version mismatch: file has " + std::to_string(version) + ", expected 1");
  }
  ContextCorpus c;
  c.dim = r.Int<std::uint32_t>("dim");
  c.vocab_size = r.Int<std::uint32_t>("vocab_size");
  const auto count = r.Int<std::uint64_t>("count");
  if (c.dim == 0 || c.vocab_size == 0) Fail(ErrorCode::kInvalidArgument, "zero dim or vocab_size");
  const std::uint64_t record = 4ull * c.dim + 4ull;
  if (count > r.remaining() / record) {
    Fail(ErrorCode::kTruncatedFile, "truncated file: count exceeds remaining bytes");
  }
  std::vector<double> buf(c.dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint32_t d = 0; d < c.dim; ++d) buf[d] = r.F32("vector");
    const auto token = r.Int<std::uint32_t>("token");
    if (token == kSentinelToken) {
      c.sentence_ends.push_back(c.pairs.size());
      continue;
    }
    if (token >= c.vocab_size) Fail(ErrorCode::kOutOfRange, "gold token id >= vocab_size");
    c.pairs.push_back(ContextPair{buf, token});
  }
  // A stream without a trailing sentinel still closes its last sentence.
  if (c.sentence_ends.empty() || c.sentence_ends.back() != c.pairs.size()) {
    if (!c.pairs.empty()) c.sentence_ends.push_back(c.pairs.size());
  }
  return c;
}

}  // namespace knnmt
