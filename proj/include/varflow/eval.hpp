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

#ifndef VARFLOW_EVAL_HPP_
#define VARFLOW_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/field.hpp"

namespace varflow {

class LengthHistogram {
 public:
  LengthHistogram() = default;

  static LengthHistogram of(std::span<const FrameSeq> videos) {
    LengthHistogram h;
    for (const auto& v : videos) h.add(v.size());
    return h;
  }

  static LengthHistogram of_lengths(std::span<const std::size_t> lengths) {
    LengthHistogram h;
    for (auto l : lengths) h.add(l);
    return h;
  }

  void add(std::size_t length, std::size_t times = 1) {
    counts_[length] += times;
    total_ += times;
  }

  std::size_t total() const noexcept { return total_; }
  const std::map<std::size_t, std::size_t>& counts() const noexcept { return counts_; }

  double mass(std::size_t length) const {
    if (total_ == 0) return 0.0;
    auto it = counts_.find(length);
    return it == counts_.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total_);
  }

  // Share of samples within +-tol of `length`.
  double mass_near(std::size_t length, std::size_t tol) const {
    double m = 0.0;
    for (const auto& [l, c] : counts_) {
      const std::size_t dist = l > length ? l - length : length - l;
      if (dist <= tol) m += static_cast<double>(c);
    }
    return total_ == 0 ? 0.0 : m / static_cast<double>(total_);
  }

  double mean() const {
    if (total_ == 0) throw InvalidArgument("LengthHistogram: empty");
    double s = 0.0;
    for (const auto& [l, c] : counts_) s += static_cast<double>(l) * static_cast<double>(c);
    return s / static_cast<double>(total_);
  }

  double stddev() const {
    const double mu = mean();
    double s = 0.0;
    for (const auto& [l, c] : counts_) s += (static_cast<double>(l) - mu) * (static_cast<double>(l) - mu) * static_cast<double>(c);
    return std::sqrt(s / static_cast<double>(total_));
  }

  // Total variation 0.5 * sum |p - q|.
  double tv(const LengthHistogram& other) const {
    if (total_ == 0 || other.total_ == 0) throw InvalidArgument("LengthHistogram: TV of an empty histogram");
    std::map<std::size_t, bool> keys;
    for (const auto& [l, c] : counts_) keys[l] = true;
    for (const auto& [l, c] : other.counts_) keys[l] = true;
    double acc = 0.0;
    for (const auto& [l, unused] : keys) acc += std::abs(mass(l) - other.mass(l));
    return std::min(1.0, 0.5 * acc);
  }

 private:
  std::map<std::size_t, std::size_t> counts_;
  std::size_t total_ = 0;
};

struct EvalReport {
  double length_tv = 0.0;
  std::map<std::size_t, double> mode_mass;  // reference mode -> generated mass within +-1
  double near_mode_mass = 0.0;
  double mean_length = 0.0;
  double std_length = 0.0;
  bool context_fidelity = true;
  double mean_steps = 0.0;
};

// Length statistics of `generated` against the histogram of `reference`.
inline EvalReport evaluate_lengths(std::span<const FrameSeq> generated, std::span<const FrameSeq> reference,
                                   std::size_t mode_tol = 1) {
  if (generated.empty() || reference.empty()) throw InvalidArgument("evaluate: empty input");
  const auto gen = LengthHistogram::of(generated);
  const auto ref = LengthHistogram::of(reference);
  EvalReport r;
  r.length_tv = gen.tv(ref);
  r.mean_length = gen.mean();
  r.std_length = gen.stddev();
  std::vector<bool> near(generated.size(), false);
  for (const auto& [mode, c] : ref.counts()) {
    r.mode_mass[mode] = gen.mass_near(mode, mode_tol);
    for (std::size_t i = 0; i < generated.size(); ++i) {
      const std::size_t l = generated[i].size();
      if ((l > mode ? l - mode : mode - l) <= mode_tol) near[i] = true;
    }
  }
  r.near_mode_mass = static_cast<double>(std::count(near.begin(), near.end(), true)) / static_cast<double>(near.size());
  return r;
}

// True when every context frame sits bit-identical at its recorded position.
inline bool context_preserved(const FrameSeq& video, const ContextSpec& ctx) {
  for (const auto& c : ctx.frames) {
    if (c.position >= video.size() || !(video[c.position] == c.frame)) return false;
  }
  return true;
}

// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
inline double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                  std::lgamma(static_cast<double>(n - k) + 1) - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, p);
}

}  // namespace varflow

#endif  // VARFLOW_EVAL_HPP_
