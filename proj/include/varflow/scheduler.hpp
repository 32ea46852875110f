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

#ifndef VARFLOW_SCHEDULER_HPP_
#define VARFLOW_SCHEDULER_HPP_

// Reveal scheduler kappa, its hazard, inverse-CDF insertion offsets and the
// training-time sampler for extended global/per-frame times.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/random.hpp"

namespace varflow {

// Hazards and integrated hazards are only evaluated below this time.
inline constexpr double kSingularityGuard = 1e-9;

class Scheduler {
 public:
  enum class Family { kLinear, kPower };

  static Scheduler linear() { return Scheduler(Family::kLinear, 1.0); }

  static Scheduler power(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("Scheduler::power: exponent must be positive, got " + std::to_string(p));
    }
    return Scheduler(Family::kPower, p);
  }

  Family family() const noexcept { return family_; }
  double exponent() const noexcept { return p_; }

  // kappa(t): expected fraction of non-starting frames revealed by time t.
  double kappa(double t) const {
    t = std::clamp(t, 0.0, 1.0);
    return family_ == Family::kLinear ? t : std::pow(t, p_);
  }

  double kappa_dot(double t) const {
    if (t < 0.0 || t > 1.0) return 0.0;
    if (family_ == Family::kLinear) return 1.0;
    return p_ * std::pow(t, p_ - 1.0);
  }

  double kappa_inv(double u) const {
    if (std::isnan(u)) throw InvalidArgument("kappa_inv: NaN");
    u = std::clamp(u, 0.0, 1.0);
    return family_ == Family::kLinear ? u : std::pow(u, 1.0 / p_);
  }

 private:
  Scheduler(Family f, double p) : family_(f), p_(p) {}

  Family family_;
  double p_;
};

// rho(t) = kappa'(t) / (1 - kappa(t)); zero before the support starts.
inline double hazard(const Scheduler& s, double t) {
  if (std::isnan(t)) throw InvalidArgument("hazard: NaN time");
  if (t < 0.0) return 0.0;
  if (t >= 1.0 - kSingularityGuard) {
    throw DivergenceError("hazard: diverges at t = " + std::to_string(t));
  }
  const double r = s.kappa_dot(t) / (1.0 - s.kappa(t));
  if (!std::isfinite(r)) throw DivergenceError("hazard: non-finite at t = " + std::to_string(t));
  return r;
}

// Integral of the hazard over [t, t + h], i.e. -log of the survival ratio.
inline double integrated_hazard(const Scheduler& s, double t, double h) {
  if (std::isnan(t) || std::isnan(h)) throw InvalidArgument("integrated_hazard: NaN");
  if (t < 0.0 || h < 0.0) throw InvalidArgument("integrated_hazard: negative interval");
  if (t + h > 1.0 - kSingularityGuard) {
    throw DivergenceError("integrated_hazard: interval reaches the singularity at 1");
  }
  if (h == 0.0) return 0.0;
  return std::log1p(-s.kappa(t)) - std::log1p(-s.kappa(t + h));
}

inline std::vector<double> offsets_from_uniforms(const Scheduler& s, std::span<const double> u,
                                                 std::size_t n_start) {
  if (n_start > u.size()) throw InvalidArgument("offsets: n_start exceeds frame count");
  std::vector<double> out(u.size(), 0.0);
  for (std::size_t i = n_start; i < u.size(); ++i) out[i] = s.kappa_inv(u[i]);
  return out;
}

// Insertion delays kappa^{-1}(u_i); the first n_start frames start at zero.
inline std::vector<double> sample_offsets(const Scheduler& s, std::size_t n, std::size_t n_start,
                                          Rng& rng) {
  if (n_start > n) {
    throw InvalidArgument("sample_offsets: n_start (" + std::to_string(n_start) +
                          ") > n (" + std::to_string(n) + ")");
  }
  std::vector<double> u(n, 0.0);
  for (std::size_t i = n_start; i < n; ++i) u[i] = uniform01(rng);
  return offsets_from_uniforms(s, u, n_start);
}

struct GlobalTimeDist {
  enum class Kind { kUniform, kLogitNormal, kLogNormScaled };

  Kind kind = Kind::kLogNormScaled;
  double mu = 0.0;
  double sigma = 1.0;

  static GlobalTimeDist uniform() { return {Kind::kUniform, 0.0, 1.0}; }

  // Draws tau_g in [0, tau_max].
  double sample(double tau_max, Rng& rng) const {
    switch (kind) {
      case Kind::kUniform:
        return std::uniform_real_distribution<double>(0.0, tau_max)(rng);
      case Kind::kLogitNormal: {
        const double z = std::normal_distribution<double>(mu, sigma)(rng);
        return tau_max / (1.0 + std::exp(-z));
      }
      case Kind::kLogNormScaled: {
        // lognormal(mu, sigma) truncated to (0, 1], then scaled by tau_max.
        std::lognormal_distribution<double> dist(mu, sigma);
        for (int attempt = 0; attempt < 100000; ++attempt) {
          const double z = dist(rng);
          if (z <= 1.0) return z * tau_max;
        }
        throw NumericalError("GlobalTimeDist: lognormal mass below 1 is negligible");
      }
    }
    return 0.0;
  }
};

struct TrainingTimes {
  std::vector<double> offsets;
  double tau_max = 1.0;
  TimeState times;

  std::vector<bool> visible_mask() const { return times.visible_mask(); }
};

// tau_i = tau_g - offset_i for a fixed global time.
inline TrainingTimes training_times_from(std::vector<double> offsets, double tau_g) {
  TrainingTimes out;
  out.tau_max = 1.0 + (offsets.empty() ? 0.0 : *std::max_element(offsets.begin(), offsets.end()));
  std::vector<double> tau(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) tau[i] = tau_g - offsets[i];
  out.offsets = std::move(offsets);
  out.times = TimeState(tau_g, std::move(tau));
  return out;
}

// Draws offsets first, caps tau_max = max(offset) + 1 and then samples tau_g on
// [0, tau_max], redrawing tau_g until at least one frame is flowing.
inline TrainingTimes sample_training_times(const Scheduler& s, const GlobalTimeDist& dist,
                                           std::size_t n, std::size_t n_start, Rng& rng) {
  if (n == 0) throw InvalidArgument("sample_training_times: empty video");
  std::vector<double> offsets = sample_offsets(s, n, n_start, rng);
  const double tau_max = 1.0 + *std::max_element(offsets.begin(), offsets.end());
  for (int attempt = 0; attempt < 100000; ++attempt) {
    TrainingTimes tt = training_times_from(offsets, dist.sample(tau_max, rng));
    if (tt.times.count(FrameState::kFlowing) > 0) return tt;
  }
  throw NumericalError("sample_training_times: could not draw a flowing frame");
}

}  // namespace varflow

#endif  // VARFLOW_SCHEDULER_HPP_
