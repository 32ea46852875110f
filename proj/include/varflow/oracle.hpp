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

#ifndef VARFLOW_ORACLE_HPP_
#define VARFLOW_ORACLE_HPP_

// Closed-form fields used to verify the sampler, the schedule and the cost
// model: the conditional oracle (one known target), the length-posterior
// oracle (exact marginal rates for a known length law) and a zero-rate stub.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/field.hpp"
#include "varflow/random.hpp"
#include "varflow/scheduler.hpp"

namespace varflow {

// Knows the target X1 and which target frame every visible frame is. Rates
// are the pending counts K_j, velocities the straight-path velocity
// (X1 - x) / (1 - t) = X1 - X0.
class ConditionalOracle {
 public:
  static constexpr long kOrphan = -1;

  ConditionalOracle(FrameSeq target, const std::vector<bool>& visible, std::uint64_t seed = 0)
      : target_(std::move(target)), rng_(substream(seed, Stream::kOracle)) {
    if (visible.size() != target_.size()) throw InvalidArgument("ConditionalOracle: mask length mismatch");
    reveal_time_.assign(target_.size(), std::nullopt);
    for (std::size_t i = 0; i < visible.size(); ++i) {
      if (visible[i]) {
        alignment_.push_back(static_cast<long>(i));
        reveal_time_[i] = 0.0;
      }
    }
    if (alignment_.empty() || alignment_.front() != 0) {
      throw InvalidArgument("ConditionalOracle: the first target frame must be visible");
    }
  }

  // Start of a generation run: the first n_start frames are visible.
  static ConditionalOracle for_generation(FrameSeq target, std::size_t n_start,
                                          std::uint64_t seed = 0) {
    if (n_start == 0 || n_start > target.size()) {
      throw InvalidArgument("ConditionalOracle: n_start must be in [1, target length]");
    }
    std::vector<bool> mask(target.size(), false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n_start), true);
    return ConditionalOracle(std::move(target), mask, seed);
  }

  // Snapshot view: frame i is visible iff offsets[i] <= t_g.
  static ConditionalOracle at_time(FrameSeq target, const std::vector<double>& offsets, double t_g) {
    if (offsets.size() != target.size()) throw InvalidArgument("ConditionalOracle: offsets length mismatch");
    std::vector<bool> mask(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) mask[i] = offsets[i] <= t_g;
    return ConditionalOracle(std::move(target), mask);
  }

  const FrameSeq& target() const noexcept { return target_; }
  std::span<const long> alignment() const noexcept { return alignment_; }
  const std::vector<std::optional<double>>& reveal_times() const noexcept { return reveal_time_; }
  std::size_t orphan_count() const noexcept { return orphans_; }

  // K_j: target frames still hidden whose nearest visible left neighbour is j.
  std::vector<int> pending_counts() const {
    std::vector<int> k(alignment_.size(), 0);
    for (std::size_t j = 0; j < alignment_.size(); ++j) {
      if (alignment_[j] == kOrphan) continue;
      long next = static_cast<long>(target_.size());
      for (std::size_t q = j + 1; q < alignment_.size(); ++q) {
        if (alignment_[q] != kOrphan) {
          next = alignment_[q];
          break;
        }
      }
      k[j] = static_cast<int>(next - alignment_[j] - 1);
    }
    return k;
  }

  FieldOutput eval(const FrameSeq& x, std::span<const double> t, const ContextSpec&, bool) const {
    if (x.size() != alignment_.size()) {
      throw InvalidArgument("ConditionalOracle: sequence length " + std::to_string(x.size()) +
                            " does not match tracked alignment " +
                            std::to_string(alignment_.size()));
    }
    FieldOutput out;
    const std::vector<int> k = pending_counts();
    out.rate.assign(k.begin(), k.end());
    out.velocity.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      FrameTensor v(x[i].shape(), 0.0f);
      if (alignment_[i] != kOrphan && t[i] < 1.0) {
        const FrameTensor& x1 = target_[static_cast<std::size_t>(alignment_[i])];
        const double inv = 1.0 / (1.0 - t[i]);
        for (std::size_t e = 0; e < v.size(); ++e) {
          v[e] = static_cast<float>((static_cast<double>(x1[e]) - x[i][e]) * inv);
        }
      }
      out.velocity.push_back(std::move(v));
    }
    return out;
  }

  // counts[j] new frames were placed to the right of visible frame j. Each
  // pending frame of the slot is equally likely to be the one revealed.
  void observe_insertions(std::span<const int> counts, double t_g) {
    if (counts.size() != alignment_.size()) throw InvalidArgument("observe_insertions: length mismatch");
    const std::vector<int> k = pending_counts();
    std::vector<long> next;
    next.reserve(alignment_.size());
    for (std::size_t j = 0; j < alignment_.size(); ++j) {
      next.push_back(alignment_[j]);
      const int c = counts[j];
      if (c <= 0) continue;
      const int take = std::min(c, k[j]);
      std::vector<long> pool(static_cast<std::size_t>(k[j]));
      std::iota(pool.begin(), pool.end(), alignment_[j] + 1);
      std::shuffle(pool.begin(), pool.end(), rng_);
      pool.resize(static_cast<std::size_t>(take));
      std::sort(pool.begin(), pool.end());
      for (long a : pool) {
        next.push_back(a);
        reveal_time_[static_cast<std::size_t>(a)] = t_g;
      }
      for (int extra = take; extra < c; ++extra) {
        next.push_back(kOrphan);
        ++orphans_;
      }
    }
    alignment_ = std::move(next);
  }

 private:
  FrameSeq target_;
  std::vector<long> alignment_;
  std::vector<std::optional<double>> reveal_time_;
  std::size_t orphans_ = 0;
  Rng rng_;
};

// rho(t_g) * K_j: the full CTMC insertion rate of the conditional path.
inline std::vector<double> oracle_rate_scaled(const ConditionalOracle& oracle, double t_g,
                                              const Scheduler& s) {
  const double rho = hazard(s, t_g);
  std::vector<double> out;
  for (int k : oracle.pending_counts()) out.push_back(rho * k);
  return out;
}

// Exact marginal insertion rates when only the length law of the data is
// known. Given m visible frames at global time t the posterior over the
// target length N is
//   P(N | m, t) ~ P(N) C(N - n_start, m - n_start) kappa^{m - n_start} (1 - kappa)^{N - m}
// and the expected number of hidden frames is spread evenly over the slots
// that can still receive insertions.
class LengthPosteriorOracle {
 public:
  LengthPosteriorOracle(std::vector<double> length_pmf, Scheduler s, std::size_t n_start)
      : pmf_(std::move(length_pmf)), sched_(s), n_start_(n_start) {
    if (n_start_ == 0) throw InvalidArgument("LengthPosteriorOracle: n_start must be >= 1");
    const double total = std::accumulate(pmf_.begin(), pmf_.end(), 0.0);
    if (!(total > 0.0)) throw InvalidArgument("LengthPosteriorOracle: empty length law");
    for (double& p : pmf_) {
      if (p < 0.0) throw InvalidArgument("LengthPosteriorOracle: negative mass");
      p /= total;
    }
  }

  // Length law from observed lengths.
  static LengthPosteriorOracle from_lengths(std::span<const std::size_t> lengths, Scheduler s,
                                            std::size_t n_start) {
    std::size_t max_len = 0;
    for (auto l : lengths) max_len = std::max(max_len, l);
    std::vector<double> pmf(max_len + 1, 0.0);
    for (auto l : lengths) pmf[l] += 1.0;
    return LengthPosteriorOracle(std::move(pmf), s, n_start);
  }

  double expected_remaining(std::size_t m, double t_g) const {
    if (m < n_start_) throw InvalidArgument("LengthPosteriorOracle: fewer frames than n_start");
    const double kap = sched_.kappa(t_g);
    if (kap >= 1.0) return 0.0;
    const double log_k = kap > 0.0 ? std::log(kap) : -INFINITY;
    const double log_1k = std::log1p(-kap);
    double best = -INFINITY;
    std::vector<double> logw(pmf_.size(), -INFINITY);
    for (std::size_t n = m; n < pmf_.size(); ++n) {
      if (pmf_[n] <= 0.0) continue;
      const double a = static_cast<double>(n - n_start_);
      const double b = static_cast<double>(m - n_start_);
      double lw = std::log(pmf_[n]) + std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1) +
                  static_cast<double>(n - m) * log_1k;
      if (b > 0) lw += b * log_k;
      logw[n] = lw;
      best = std::max(best, lw);
    }
    if (best == -INFINITY) return 0.0;
    double z = 0.0, e = 0.0;
    for (std::size_t n = m; n < pmf_.size(); ++n) {
      if (logw[n] == -INFINITY) continue;
      const double w = std::exp(logw[n] - best);
      z += w;
      e += w * static_cast<double>(n - m);
    }
    return e / z;
  }

  FieldOutput eval(const FrameSeq& x, std::span<const double> t, const ContextSpec&, bool) const {
    const std::size_t m = x.size();
    const double t_g = *std::max_element(t.begin(), t.end());
    FieldOutput out;
    out.rate.assign(m, 0.0);
    const double remaining = expected_remaining(m, t_g);
    const std::size_t open_slots = m - n_start_ + 1;
    for (std::size_t j = n_start_ - 1; j < m; ++j) out.rate[j] = remaining / static_cast<double>(open_slots);
    for (const auto& f : x) out.velocity.emplace_back(f.shape(), 0.0f);
    return out;
  }

 private:
  std::vector<double> pmf_;
  Scheduler sched_;
  std::size_t n_start_;
};

// lambda == 0 and v == 0 everywhere.
struct ZeroRateModel {
  FieldOutput eval(const FrameSeq& x, std::span<const double>, const ContextSpec&, bool) const {
    FieldOutput out;
    out.rate.assign(x.size(), 0.0);
    for (const auto& f : x) out.velocity.emplace_back(f.shape(), 0.0f);
    return out;
  }
};

}  // namespace varflow

#endif  // VARFLOW_ORACLE_HPP_
