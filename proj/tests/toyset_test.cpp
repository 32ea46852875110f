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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "varflow/toyset.hpp"

namespace varflow {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("varflow_" + name)).string();
}

TEST(GenToy, LengthsAreUniformOverFourModes) {
  Rng rng = substream(1, Stream::kData);
  const auto videos = gen_toy(10000, rng);
  std::map<std::size_t, int> counts;
  for (const auto& v : videos) ++counts[v.length()];
  ASSERT_EQ(counts.size(), 4u);
  const double sigma = std::sqrt(0.25 * 0.75 / 10000.0);
  for (std::size_t l : {15u, 20u, 25u, 30u}) EXPECT_NEAR(counts[l] / 10000.0, 0.25, 3 * sigma);
}

TEST(GenToy, FrameInvariants) {
  Rng rng = substream(2, Stream::kData);
  for (const auto& v : gen_toy(500, rng)) {
    ASSERT_EQ(*v.frames.shape(), (FrameShape{3, 3, 3}));
    // Integer number of rotations: the gradient phase closes on itself.
    const double turns = (v.phase(v.length() - 1) - v.phase(0)) / (2.0 * std::numbers::pi);
    EXPECT_NEAR(turns, std::round(turns), 1e-6);
    for (const auto& [r, c] : kRing) {
      for (int ch = 0; ch < 3; ++ch) {
        const std::size_t idx = static_cast<std::size_t>((r * 3 + c) * 3 + ch);
        EXPECT_NEAR(v.frames[0][idx], v.frames[v.length() - 1][idx], 1e-5);
      }
    }
    // The middle pixel takes exactly two values, switching once.
    std::set<float> mids;
    int switches = 0;
    for (std::size_t f = 0; f < v.length(); ++f) {
      mids.insert(v.frames[f][12]);
      if (f > 0 && v.frames[f][12] != v.frames[f - 1][12]) ++switches;
    }
    EXPECT_EQ(mids.size(), 2u);
    EXPECT_EQ(switches, 1);
    for (const auto& f : v.frames) {
      for (float x : f.values()) {
        EXPECT_GE(x, -1.0f);
        EXPECT_LE(x, 1.0f);
      }
    }
  }
}

TEST(GenToy, DeterministicGivenSeed) {
  Rng a = substream(3, Stream::kData), b = substream(3, Stream::kData);
  EXPECT_EQ(toy_frames(gen_toy(50, a)), toy_frames(gen_toy(50, b)));
  EXPECT_THROW(gen_toy(0, a), InvalidArgument);
}

TEST(GenToy, ConfigurableWeights) {
  Rng rng = substream(4, Stream::kData);
  ToyOptions opt;
  opt.weights = {1, 0, 0, 0};
  for (const auto& v : gen_toy(100, rng, opt)) EXPECT_EQ(v.length(), 15u);
}

TEST(Mixture, CatalogAndFrequencies) {
  const auto& cat = mixture_catalog();
  ASSERT_EQ(cat.size(), 4u);
  for (std::size_t i = 0; i < cat.size(); ++i) EXPECT_EQ(cat[i].size(), i + 2);
  EXPECT_EQ(mixture_catalog()[2], cat[2]);
  Rng rng = substream(5, Stream::kData);
  const auto draws = gen_mixture(20000, rng);
  std::map<std::size_t, int> counts;
  for (const auto& v : draws) ++counts[v.size()];
  const double sigma = std::sqrt(0.25 * 0.75 / 20000.0);
  for (std::size_t l = 2; l <= 5; ++l) EXPECT_NEAR(counts[l] / 20000.0, 0.25, 3 * sigma);
}

TEST(DatasetFile, RoundTripIsBitExact) {
  Rng rng = substream(6, Stream::kData);
  auto videos = toy_frames(gen_toy(20, rng));
  videos.push_back(mixture_catalog()[1]);
  const std::string path = temp_path("roundtrip.fcds");
  write_dataset(path, videos);
  EXPECT_EQ(read_dataset(path), videos);
  const auto bytes = encode_dataset(videos).bytes();
  write_dataset(path, read_dataset(path));
  EXPECT_EQ(encode_dataset(read_dataset(path)).bytes(), bytes);
  std::remove(path.c_str());
}

TEST(DatasetFile, HeaderLayout) {
  const auto bytes = encode_dataset({mixture_catalog()[0]}).bytes();
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 + 3 + 2 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FCDS");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 1);  // count
  EXPECT_EQ(bytes[12], 2);  // length
  EXPECT_EQ(bytes[14], 1);
}

DataError::Kind error_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_dataset(ByteReader(bytes));
  } catch (const DataError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return DataError::Kind::kIo;
}

TEST(DatasetFile, StructuredErrors) {
  const auto good = encode_dataset({mixture_catalog()[3]}).bytes();
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_EQ(error_kind(truncated), DataError::Kind::kTruncated);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(error_kind(magic), DataError::Kind::kBadMagic);
  auto version = good;
  version[4] = 9;
  EXPECT_EQ(error_kind(version), DataError::Kind::kVersionMismatch);
  auto nan = good;
  const float bad = std::nanf("");
  std::memcpy(nan.data() + 17, &bad, 4);
  EXPECT_EQ(error_kind(nan), DataError::Kind::kParse);
  try {
    read_dataset(temp_path("does_not_exist.fcds"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kIo);
  }
}

}  // namespace
}  // namespace varflow
