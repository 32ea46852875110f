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

#include "varflow/config.hpp"
#include "varflow/eval.hpp"
#include "varflow/toyset.hpp"

namespace varflow {
namespace {

TEST(Config, SectionsAndDottedKeys) {
  const auto cfg = ConfigParser().parse_string(R"(
# comment
train.lr = 0.001
[train]
batch_size = 16   ; trailing comment
optimizer = SGD
[schedule]
family = power
power_p = 2
[sampler]
h = 0.05
thinning = poisson
w_s = 2.5
)");
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.001);
  EXPECT_EQ(cfg.train.batch_size, 16u);
  EXPECT_EQ(cfg.train.optimizer, OptimizerKind::kSgd);
  EXPECT_DOUBLE_EQ(cfg.sampler.h, 0.05);
  EXPECT_EQ(cfg.sampler.thinning, Thinning::kPoisson);
  EXPECT_DOUBLE_EQ(cfg.sampler.w_s, 2.5);
  EXPECT_DOUBLE_EQ(cfg.sampler.scheduler.exponent(), 2.0);
  EXPECT_DOUBLE_EQ(cfg.train.scheduler.exponent(), 2.0);
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    try {
      ConfigParser().parse_string(text);
    } catch (const DataError& e) {
      EXPECT_EQ(e.kind(), DataError::Kind::kParse);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("train.lr = 1e-3\ntrain.bogus = 1\n").find(":2: unknown key train.bogus"), std::string::npos);
  EXPECT_NE(message("\n\nsampler.h = abc\n").find(":3:"), std::string::npos);
  EXPECT_NE(message("sampler.h = 0\n").find("h must be in (0, 1]"), std::string::npos);
  EXPECT_NE(message("just words\n").find(":1:"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/varflow.ini"), DataError);
}

TEST(Histogram, TotalVariation) {
  const std::vector<std::size_t> a{2, 2, 3, 3}, b{2, 3, 3, 3}, c{7, 8};
  const auto ha = LengthHistogram::of_lengths(a), hb = LengthHistogram::of_lengths(b);
  EXPECT_DOUBLE_EQ(ha.tv(ha), 0.0);
  EXPECT_DOUBLE_EQ(ha.tv(hb), 0.25);
  EXPECT_DOUBLE_EQ(hb.tv(ha), 0.25);
  EXPECT_DOUBLE_EQ(ha.tv(LengthHistogram::of_lengths(c)), 1.0);
  EXPECT_DOUBLE_EQ(ha.mean(), 2.5);
  EXPECT_DOUBLE_EQ(ha.stddev(), 0.5);
  EXPECT_DOUBLE_EQ(hb.mass_near(2, 0), 0.25);
  EXPECT_DOUBLE_EQ(hb.mass_near(2, 1), 1.0);
}

TEST(Evaluate, NearModeMassCountsEachSampleOnce) {
  const auto& cat = mixture_catalog();
  const std::vector<FrameSeq> ref{cat[0], cat[3]};
  const std::vector<FrameSeq> gen{cat[0], cat[1], cat[2], cat[3]};
  const auto r = evaluate_lengths(gen, ref, 1);
  EXPECT_DOUBLE_EQ(r.near_mode_mass, 1.0);
  EXPECT_DOUBLE_EQ(r.mode_mass.at(2), 0.5);
  EXPECT_DOUBLE_EQ(r.length_tv, 0.5);
  EXPECT_DOUBLE_EQ(evaluate_lengths(gen, gen).length_tv, 0.0);
}

TEST(Evaluate, ContextPreserved) {
  const auto& v = mixture_catalog()[2];
  ContextSpec ctx;
  ctx.frames.push_back({0, v[0], ContextRole::kActive});
  EXPECT_TRUE(context_preserved(v, ctx));
  ctx.frames.push_back({1, v[0], ContextRole::kActive});
  EXPECT_FALSE(context_preserved(v, ctx));
}

TEST(SignTest, MatchesBinomialTail) {
  EXPECT_DOUBLE_EQ(sign_test_p(0, 0), 1.0);
  EXPECT_NEAR(sign_test_p(3, 0), 0.125, 1e-12);
  EXPECT_NEAR(sign_test_p(2, 1), 0.5, 1e-12);
  // P(X >= 60), X ~ Bin(100, 1/2)
  EXPECT_NEAR(sign_test_p(60, 40), 0.028443966820490392, 1e-10);
}

}  // namespace
}  // namespace varflow
