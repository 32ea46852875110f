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

#ifndef VARFLOW_TOYSET_HPP_
#define VARFLOW_TOYSET_HPP_

// 3x3 RGB toy videos with four possible lengths, a finite scalar catalog for
// oracle tests, and the FCDS container.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "varflow/binary_io.hpp"
#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/random.hpp"

namespace varflow {

inline constexpr FrameShape kToyShape{3, 3, 3};

struct ToyOptions {
  std::vector<int> lengths{15, 20, 25, 30};
  std::vector<double> weights{1.0, 1.0, 1.0, 1.0};
};

struct ToyVideo {
  FrameSeq frames;
  int rotations = 1;      // full turns of the boundary gradient over the video
  double phase0 = 0.0;    // gradient phase at frame 0
  int jump_frame = 1;     // first frame showing the second middle level
  std::array<double, 2> levels{};

  std::size_t length() const noexcept { return frames.size(); }

  double phase(std::size_t f) const { return phase_at(f, frames.size()); }

  double phase_at(std::size_t f, std::size_t n) const {
    return phase0 + 2.0 * std::numbers::pi * rotations * static_cast<double>(f) / (static_cast<double>(n) - 1.0);
  }
};

// Boundary pixels in clockwise order starting at the top-left corner.
inline constexpr std::array<std::array<int, 2>, 8> kRing{{{0, 0}, {0, 1}, {0, 2}, {1, 2}, {2, 2}, {2, 1}, {2, 0}, {1, 0}}};

// Fully saturated HSV colour, hue in turns, as RGB in [0, 1].
inline std::array<double, 3> hue_to_rgb(double hue) {
  hue -= std::floor(hue);
  std::array<double, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double k = std::fmod(5.0 - 2.0 * c + hue * 6.0, 6.0);
    rgb[static_cast<std::size_t>(c)] = 1.0 - std::max(0.0, std::min({k, 4.0 - k, 1.0}));
  }
  return rgb;
}

namespace detail {

inline void set_pixel(std::vector<float>& v, int r, int c, const std::array<double, 3>& rgb) {
  for (int ch = 0; ch < 3; ++ch) {
    v[static_cast<std::size_t>((r * 3 + c) * 3 + ch)] = static_cast<float>(2.0 * rgb[static_cast<std::size_t>(ch)] - 1.0);
  }
}

}  // namespace detail

inline ToyVideo make_toy_video(int length, Rng& rng) {
  if (length < 3) throw InvalidArgument("make_toy_video: length must be >= 3");
  ToyVideo video;
  video.rotations = 1 + static_cast<int>(std::uniform_int_distribution<int>(0, 1)(rng));
  video.phase0 = 2.0 * std::numbers::pi * uniform01(rng);
  video.jump_frame = std::uniform_int_distribution<int>(1, length - 1)(rng);
  const double lo = std::uniform_real_distribution<double>(-1.0, 0.2)(rng);
  video.levels = {lo, lo + std::uniform_real_distribution<double>(0.4, 0.8)(rng)};
  const double hue_a = uniform01(rng);
  const double hue_b = hue_a + std::uniform_real_distribution<double>(0.25, 0.5)(rng);

  video.frames = FrameSeq(kToyShape);
  for (int f = 0; f < length; ++f) {
    std::vector<float> v(kToyShape.size(), 0.0f);
    const double phi = video.phase_at(static_cast<std::size_t>(f), static_cast<std::size_t>(length));
    for (std::size_t p = 0; p < kRing.size(); ++p) {
      const double w = 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * static_cast<double>(p) / 8.0 - phi));
      detail::set_pixel(v, kRing[p][0], kRing[p][1], hue_to_rgb(hue_a + w * (hue_b - hue_a)));
    }
    const double mid = f < video.jump_frame ? video.levels[0] : video.levels[1];
    detail::set_pixel(v, 1, 1, {(mid + 1.0) / 2.0, (mid + 1.0) / 2.0, (mid + 1.0) / 2.0});
    video.frames.push_back(FrameTensor(kToyShape, std::move(v)));
  }
  return video;
}

inline std::vector<ToyVideo> gen_toy(std::size_t count, Rng& rng, const ToyOptions& opt = {}) {
  if (count == 0) throw InvalidArgument("gen_toy: count must be >= 1");
  if (opt.lengths.empty() || opt.lengths.size() != opt.weights.size()) {
    throw InvalidArgument("gen_toy: lengths and weights must be non-empty and aligned");
  }
  std::discrete_distribution<std::size_t> pick(opt.weights.begin(), opt.weights.end());
  std::vector<ToyVideo> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_toy_video(opt.lengths[pick(rng)], rng));
  return out;
}

inline std::vector<FrameSeq> toy_frames(const std::vector<ToyVideo>& videos) {
  std::vector<FrameSeq> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(v.frames);
  return out;
}

inline constexpr FrameShape kScalarShape{1, 1, 1};

// Four scalar-frame videos of lengths 2, 3, 4 and 5.
inline const std::vector<FrameSeq>& mixture_catalog() {
  static const std::vector<FrameSeq> catalog = [] {
    std::vector<FrameSeq> c;
    for (int k = 0; k < 4; ++k) {
      FrameSeq seq(kScalarShape);
      for (int i = 0; i < k + 2; ++i) {
        seq.push_back(FrameTensor(kScalarShape, std::vector<float>{-0.9f + 0.25f * static_cast<float>(k) + 0.3f * static_cast<float>(i)}));
      }
      c.push_back(std::move(seq));
    }
    return c;
  }();
  return catalog;
}

inline std::vector<FrameSeq> gen_mixture(std::size_t count, Rng& rng) {
  if (count == 0) throw InvalidArgument("gen_mixture: count must be >= 1");
  const auto& cat = mixture_catalog();
  std::uniform_int_distribution<std::size_t> pick(0, cat.size() - 1);
  std::vector<FrameSeq> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(cat[pick(rng)]);
  return out;
}

inline constexpr std::uint32_t kDatasetVersion = 1;

inline ByteWriter encode_dataset(const std::vector<FrameSeq>& videos) {
  ByteWriter w;
  w.magic("FCDS");
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(videos.size()));
  for (const auto& v : videos) {
    if (v.size() > 0xffff) throw InvalidArgument("write_dataset: video longer than 65535 frames");
    const FrameShape s = v.shape().value_or(FrameShape{0, 0, 0});
    if (s.height > 255 || s.width > 255 || s.channels > 255) {
      throw InvalidArgument("write_dataset: frame dimensions must fit in one byte");
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(v.size()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.height));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.width));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.channels));
    for (const auto& f : v) {
      for (float x : f.values()) w.put<float>(x);
    }
  }
  return w;
}

inline std::vector<FrameSeq> decode_dataset(ByteReader r) {
  r.expect_magic("FCDS");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw DataError(DataError::Kind::kVersionMismatch,
                    r.label() + ": dataset version " + std::to_string(version) + ", expected " +
                        std::to_string(kDatasetVersion));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<FrameSeq> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    const FrameShape s{r.get<std::uint8_t>(), r.get<std::uint8_t>(), r.get<std::uint8_t>()};
    if (len > 0 && s.size() == 0) throw DataError(DataError::Kind::kShape, r.label() + ": empty frame shape");
    if (static_cast<std::size_t>(len) * s.size() * sizeof(float) > r.remaining()) {
      throw DataError(DataError::Kind::kTruncated, r.label() + ": video " + std::to_string(i) + " is truncated");
    }
    FrameSeq seq(s);
    for (std::uint16_t f = 0; f < len; ++f) {
      std::vector<float> v(s.size());
      for (float& x : v) x = r.get<float>();
      try {
        seq.push_back(FrameTensor(s, std::move(v)));
      } catch (const InvalidArgument& e) {
        throw DataError(DataError::Kind::kParse, r.label() + ": " + e.what());
      }
    }
    out.push_back(std::move(seq));
  }
  if (!r.at_end()) throw DataError(DataError::Kind::kParse, r.label() + ": trailing bytes after last video");
  return out;
}

inline void write_dataset(const std::string& path, const std::vector<FrameSeq>& videos) {
  encode_dataset(videos).save(path);
}

inline std::vector<FrameSeq> read_dataset(const std::string& path) {
  return decode_dataset(ByteReader::load(path));
}

}  // namespace varflow

#endif  // VARFLOW_TOYSET_HPP_
