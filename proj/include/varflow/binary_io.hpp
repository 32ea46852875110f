// Copyright 2026 The Varflow Authors
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

#ifndef VARFLOW_BINARY_IO_HPP_
#define VARFLOW_BINARY_IO_HPP_

// Little-endian byte buffers shared by the dataset and checkpoint formats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "varflow/error.hpp"

namespace varflow {

class ByteWriter {
 public:
  void magic(const char (&m)[5]) { bytes_.insert(bytes_.end(), m, m + 4); }

  template <class T>
  void put(T value) {
    static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }

  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataError::Kind::kIo, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw DataError(DataError::Kind::kIo, "write failed: " + path);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes, std::string label = "buffer")
      : bytes_(std::move(bytes)), label_(std::move(label)) {}

  static ByteReader load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::kIo, "cannot open " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw DataError(DataError::Kind::kIo, "read failed: " + path);
    return ByteReader(std::move(data), path);
  }

  void expect_magic(const char (&m)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, m, 4) != 0) {
      throw DataError(DataError::Kind::kBadMagic, label_ + ": bad magic, expected " + std::string(m, 4));
    }
    pos_ += 4;
  }

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& label() const noexcept { return label_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(DataError::Kind::kTruncated, label_ + ": truncated at byte " + std::to_string(pos_));
    }
  }

  std::vector<std::uint8_t> bytes_;
  std::string label_;
  std::size_t pos_ = 0;
};

}  // namespace varflow

#endif  // VARFLOW_BINARY_IO_HPP_
