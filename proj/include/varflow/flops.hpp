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

#ifndef VARFLOW_FLOPS_HPP_
#define VARFLOW_FLOPS_HPP_

// Attention-score cost model. Only the quadratic token-mixing term is
// counted; projections and MLPs are ignored.

#include <cstddef>

#include "varflow/error.hpp"
#include "varflow/sampler.hpp"

namespace varflow {

struct FlopsParams {
  double n = 0;       // frames
  double tokens = 0;  // tokens per frame
  double t_full = 0;  // denoising steps of a full-sequence model
  double t_ar = 0;    // denoising steps per autoregressive frame
  double alpha = 2;   // step multiplier of the interleaved sampler
};

struct FlopsReport {
  FlopsParams params;
  double full_seq = 0;
  double ar_nocache = 0;
  double ar_nocache_bound = 0;  // (n / 3) T_AR (nL)^2
  double ar_cache = 0;
  double interleaved_analytic = 0;
  double interleaved_empirical = 0;
};

inline FlopsReport analytic_costs(double n, double tokens, double t_full, double t_ar, double alpha) {
  if (!(n > 0 && tokens > 0 && t_full > 0 && t_ar > 0 && alpha > 0)) {
    throw InvalidArgument("analytic_costs: all parameters must be positive");
  }
  FlopsReport r;
  r.params = {n, tokens, t_full, t_ar, alpha};
  const double nl = n * tokens;
  const double l2 = tokens * tokens;
  // Closed forms of sum_{j<=n} j^2 and sum_{j<=n} j.
  const double sum_sq = n * (n + 1) * (2 * n + 1) / 6.0;
  const double sum_j = n * (n + 1) / 2.0;
  r.full_seq = t_full * nl * nl;
  r.ar_nocache = t_ar * l2 * sum_sq;
  r.ar_nocache_bound = (n / 3.0) * t_ar * nl * nl;
  r.ar_cache = t_ar * l2 * sum_j;
  r.interleaved_analytic = (alpha / 3.0) * t_full * nl * nl;
  return r;
}

// Sum over sampler steps of (active frames * tokens)^2.
inline double empirical_cost(const SampleTrace& trace, double tokens) {
  double acc = 0.0;
  for (const auto& s : trace.steps) {
    const double a = static_cast<double>(s.n_active) * tokens;
    acc += a * a;
  }
  return acc;
}

}  // namespace varflow

#endif  // VARFLOW_FLOPS_HPP_
