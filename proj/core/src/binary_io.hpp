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

// Little-endian framing shared by the datastore and context-pair formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "knnmt/error.hpp"

namespace knnmt::detail {

class LeWriter {
 public:
  void Bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }

  template <typename T>
  void Int(T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buffer_.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFFu));
    }
  }

  void F32(float value) { Int(std::bit_cast<std::uint32_t>(value)); }
  void F64(double value) { Int(std::bit_cast<std::uint64_t>(value)); }

  const std::vector<unsigned char>& buffer() const noexcept { return buffer_; }

  /// Writes to a sibling temp file, then renames over `path`.
  void Commit(const std::filesystem::path& path) const {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) Fail(ErrorCode::kIo, "cannot open for writing: " + tmp.string());
      out.write(reinterpret_cast<const char*>(buffer_.data()),
                static_cast<std::streamsize>(buffer_.size()));
      if (!out) Fail(ErrorCode::kIo, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      Fail(ErrorCode::kIo, "rename failed: " + path.string());
    }
  }

 private:
  std::vector<unsigned char> buffer_;
};

class LeReader {
 public:
  explicit LeReader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) Fail(ErrorCode::kIo, "cannot open for reading: " + path.string());
    buffer_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::size_t remaining() const noexcept { return buffer_.size() - pos_; }

  void Need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      Fail(ErrorCode::kTruncatedFile, std::string("truncated file while reading ") + what);
    }
  }

  std::array<char, 4> Magic() {
    Need(4, "magic");
    std::array<char, 4> m{};
    std::memcpy(m.data(), buffer_.data() + pos_, 4);
    pos_ += 4;
    return m;
  }

  template <typename T>
  T Int(const char* what) {
    Need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(buffer_[pos_ + i]))
                              << (8 * i));
    }
    pos_ += sizeof(T);
    return value;
  }

  float F32(const char* what) { return std::bit_cast<float>(Int<std::uint32_t>(what)); }
  double F64(const char* what) { return std::bit_cast<double>(Int<std::uint64_t>(what)); }

 private:
  std::vector<char> buffer_;
  std::size_t pos_ = 0;
};

}  // namespace knnmt::detail
