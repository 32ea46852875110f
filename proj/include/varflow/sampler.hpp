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

#ifndef VARFLOW_SAMPLER_HPP_
#define VARFLOW_SAMPLER_HPP_

// Generation loop: every step advances the flowing frames along the model
// velocity, then draws insertions per slot from the predicted rates and the
// scheduler hazard. Frames inserted in a step are pure noise at t = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/field.hpp"
#include "varflow/random.hpp"
#include "varflow/scheduler.hpp"

namespace varflow {

enum class Thinning { kBernoulli, kPoisson };

// How Bernoulli draws of different slots in one step relate. Systematic
// draws keep every slot's firing probability but make the step total the
// stochastic rounding of the summed probabilities.
enum class SlotCoupling { kIndependent, kSystematic };

struct SamplerConfig {
  double h = 0.02;
  std::size_t n_start = 1;
  Thinning thinning = Thinning::kBernoulli;
  SlotCoupling coupling = SlotCoupling::kIndependent;
  bool exact_integral = true;
  double w_s = 1.0;
  double gamma = 1.0;
  std::size_t max_len = 64;
  int max_inserts_per_slot_step = 8;
  std::uint64_t seed = 0;
  FrameShape frame{3, 3, 3};
  Scheduler scheduler = Scheduler::linear();

  void validate() const {
    if (!(h > 0.0 && h <= 1.0)) throw InvalidArgument("SamplerConfig: h must be in (0, 1]");
    if (n_start < 1) throw InvalidArgument("SamplerConfig: n_start must be >= 1");
    if (!(w_s >= 1.0)) throw InvalidArgument("SamplerConfig: w_s must be >= 1");
    if (!(gamma >= 1.0)) throw InvalidArgument("SamplerConfig: gamma must be >= 1");
    if (max_len < n_start) throw InvalidArgument("SamplerConfig: max_len < n_start");
    if (max_inserts_per_slot_step < 1) {
      throw InvalidArgument("SamplerConfig: max_inserts_per_slot_step must be >= 1");
    }
    if (frame.size() == 0) throw InvalidArgument("SamplerConfig: empty frame shape");
  }

  // Upper bound on outer iterations for gamma == 1.
  std::size_t step_bound() const {
    return 2 * static_cast<std::size_t>(std::ceil(1.0 / h - 1e-12)) + 1;
  }
};

struct InsertionEvent {
  std::size_t slot = 0;  // 0-based index of the frame the new one follows
  double t_g = 0.0;
};

struct StepRecord {
  std::size_t step = 0;
  double t_g = 0.0;           // global time at the start of the step
  std::size_t n_active = 0;   // flowing frames evaluated by this step
  std::size_t n_visible = 0;  // sequence length after the step
  std::vector<InsertionEvent> insertions;
  std::vector<double> t_before;
  std::vector<double> t_after;
};

struct SampleTrace {
  std::vector<StepRecord> steps;
  std::size_t final_length = 0;
  bool truncated = false;

  std::size_t step_count() const noexcept { return steps.size(); }
  std::size_t insertion_count() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.insertions.size();
    return n;
  }
};

struct SampleResult {
  FrameSeq video;
  SampleTrace trace;
  ContextSpec context;  // final context positions
};

// Geometric interpolation lambda_c^w * lambda_u^(1 - w).
inline std::vector<double> rate_cfg(std::span<const double> cond, std::span<const double> uncond,
                                    double w_s) {
  if (cond.size() != uncond.size()) throw InvalidArgument("rate_cfg: length mismatch");
  std::vector<double> out(cond.size());
  for (std::size_t j = 0; j < cond.size(); ++j) {
    if (!(cond[j] > 0.0) || !(uncond[j] > 0.0)) {
      throw InvalidArgument("rate_cfg: rates must be positive");
    }
    out[j] = w_s == 1.0 ? cond[j] : std::exp(w_s * std::log(cond[j]) + (1.0 - w_s) * std::log(uncond[j]));
  }
  return out;
}

struct WarpStep {
  double t = 0.0;
  double dt = 0.0;
};

// Per-frame clock t = u^gamma; a uniform solver step du maps to a physical
// step that is small right after insertion.
inline WarpStep time_warp(double u, double du, double gamma) {
  if (!(u >= 0.0 && du >= 0.0 && u + du <= 1.0 + 1e-12)) throw InvalidArgument("time_warp: need 0 <= u <= u + du <= 1");
  if (!(gamma >= 1.0)) throw InvalidArgument("time_warp: gamma must be >= 1");
  const double t = std::pow(u, gamma);
  return {t, std::pow(std::min(1.0, u + du), gamma) - t};
}

// Expected insertion mass per unit rate over [t_g, t_g + h].
inline double insertion_exposure(double t_g, double h, const Scheduler& s, bool exact) {
  if (exact) {
    if (t_g + h > 1.0 - kSingularityGuard) return INFINITY;
    return integrated_hazard(s, t_g, h);
  }
  return h * hazard(s, t_g);
}

inline std::vector<bool> bernoulli_insertions(std::span<const double> lambda, double t_g, double h,
                                              const Scheduler& s, const SamplerConfig& cfg, Rng& rng) {
  if (t_g >= 1.0 - kSingularityGuard) throw InvalidArgument("bernoulli_insertions: t_g must be < 1");
  const double exposure = insertion_exposure(t_g, h, s, cfg.exact_integral);
  std::vector<bool> fire(lambda.size(), false);
  const bool systematic = cfg.coupling == SlotCoupling::kSystematic;
  double next = systematic ? uniform01(rng) : 0.0;
  double cum = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    if (!(lambda[j] > 0.0)) continue;
    double p = cfg.exact_integral ? -std::expm1(-lambda[j] * exposure) : lambda[j] * exposure;
    p = std::clamp(p, 0.0, 1.0);
    if (!systematic) {
      fire[j] = uniform01(rng) < p;
      continue;
    }
    cum += p;
    if (cum >= next) {
      fire[j] = true;
      next += 1.0;
    }
  }
  return fire;
}

inline int poisson_draw(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

inline std::vector<int> poisson_insertions(std::span<const double> lambda, double t_g, double h,
                                           const Scheduler& s, const SamplerConfig& cfg, Rng& rng) {
  if (t_g >= 1.0 - kSingularityGuard) throw InvalidArgument("poisson_insertions: t_g must be < 1");
  const double exposure = insertion_exposure(t_g, h, s, cfg.exact_integral);
  std::vector<int> counts(lambda.size(), 0);
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    if (!(lambda[j] > 0.0)) continue;
    if (!std::isfinite(exposure)) {
      counts[j] = cfg.max_inserts_per_slot_step;
      continue;
    }
    counts[j] = std::min(poisson_draw(lambda[j] * exposure, rng), cfg.max_inserts_per_slot_step);
  }
  return counts;
}

// Insertions for the last interval, whose integrated hazard is unbounded:
// every slot receives its predicted count. Each slot keeps floor(lambda) and
// the fractional remainders are placed by systematic sampling, so slot j gets
// an extra frame with probability frac(lambda_j) while the total is the
// stochastic rounding of sum(lambda).
inline std::vector<int> final_insertions(std::span<const double> lambda, const SamplerConfig& cfg, Rng& rng) {
  std::vector<int> counts(lambda.size(), 0);
  const double cap = static_cast<double>(cfg.max_len);
  double next = uniform01(rng);
  double cum = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    if (!(lambda[j] > 0.0)) continue;
    const double l = std::min(lambda[j], cap);
    const double fl = std::floor(l);
    counts[j] = static_cast<int>(fl);
    cum += l - fl;
    if (cum >= next) {
      ++counts[j];
      next += 1.0;
    }
  }
  return counts;
}

namespace detail {

inline double snap_to_one(double t) { return t >= 1.0 - kSingularityGuard ? 1.0 : t; }

}  // namespace detail

// Task presets. Positions are assigned by generate().
inline ContextSpec image_to_video(FrameTensor first) {
  ContextSpec c;
  c.frames.push_back({0, std::move(first), ContextRole::kActive});
  return c;
}

// All frames active except the last, which is passive.
inline ContextSpec interpolation(std::vector<FrameTensor> frames) {
  ContextSpec c;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    c.frames.push_back({i, std::move(frames[i]),
                        i + 1 == frames.size() ? ContextRole::kPassive : ContextRole::kActive});
  }
  return c;
}

// Mutable state of one generation run.
struct SamplerState {
  FrameSeq x;
  std::vector<double> t;
  std::vector<double> u;     // per-frame solver coordinate, t = u^gamma
  std::vector<int> ctx_of;   // context index per position, -1 for generated frames
  double t_g = 0.0;
  ContextSpec source;        // context frames as supplied, in order
  bool truncated = false;
  Rng noise_rng;
  Rng thin_rng;

  bool finished() const {
    if (t_g < 1.0) return false;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (ctx_of[i] < 0 && t[i] < 1.0) return false;
    }
    return true;
  }

  bool passive(std::size_t i) const {
    return ctx_of[i] >= 0 && source.frames[static_cast<std::size_t>(ctx_of[i])].role == ContextRole::kPassive;
  }

  // Context frames at their current positions.
  ContextSpec context() const {
    ContextSpec c;
    for (std::size_t p = 0; p < ctx_of.size(); ++p) {
      if (ctx_of[p] >= 0) {
        const auto& src = source.frames[static_cast<std::size_t>(ctx_of[p])];
        c.frames.push_back({p, src.frame, src.role});
      }
    }
    return c;
  }

  FrameTensor noise_frame(const FrameShape& shape) {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<float> v(shape.size());
    for (float& z : v) z = normal(noise_rng);
    return FrameTensor(shape, std::move(v));
  }
};

// Context frames are laid out in order with the n_start noise frames placed
// right after the first active context frame (or first, without one); context
// frames are held at t = 1 and never modified.
inline SamplerState initial_state(const SamplerConfig& cfg, const ContextSpec& context) {
  cfg.validate();
  SamplerState st{FrameSeq(cfg.frame), {}, {}, {}, 0.0, context, false,
                  substream(cfg.seed, Stream::kNoise), substream(cfg.seed, Stream::kThinning)};
  std::size_t insert_after = 0;
  for (std::size_t i = 0; i < context.frames.size(); ++i) {
    if (context.frames[i].role == ContextRole::kActive) {
      insert_after = i + 1;
      break;
    }
  }
  for (std::size_t i = 0; i <= context.frames.size(); ++i) {
    if (i == insert_after) {
      for (std::size_t s = 0; s < cfg.n_start; ++s) {
        st.x.push_back(st.noise_frame(cfg.frame));
        st.t.push_back(0.0);
        st.u.push_back(0.0);
        st.ctx_of.push_back(-1);
      }
    }
    if (i < context.frames.size()) {
      st.x.push_back(context.frames[i].frame);
      st.t.push_back(1.0);
      st.u.push_back(1.0);
      st.ctx_of.push_back(static_cast<int>(i));
    }
  }
  if (st.x.size() > cfg.max_len) throw InvalidArgument("generate: context exceeds max_len");
  return st;
}

// One outer iteration: flow update of every flowing frame, then insertions
// for the global-time interval [t_g, min(1, t_g + h)].
template <class M>
  requires FieldModel<M>
StepRecord step(M& model, SamplerState& st, const SamplerConfig& cfg) {
  if (st.finished()) throw InvalidArgument("step: every frame is already clean");
  StepRecord rec;
  rec.t_g = st.t_g;
  rec.t_before = st.t;
  for (std::size_t i = 0; i < st.t.size(); ++i) rec.n_active += (st.ctx_of[i] < 0 && st.t[i] < 1.0) ? 1 : 0;

  const ContextSpec ctx = st.context();
  const FieldOutput out = eval(model, st.x, st.t, ctx, false);
  std::vector<double> lambda = out.rate;
  if (cfg.w_s != 1.0 && !ctx.empty()) {
    const FieldOutput un = eval(model, st.x, st.t, ctx, true);
    lambda = rate_cfg(out.rate, un.rate, cfg.w_s);
  }
  for (std::size_t i = 0; i < st.t.size(); ++i) {
    if (st.passive(i)) lambda[i] = 0.0;
  }

  for (std::size_t i = 0; i < st.t.size(); ++i) {
    if (st.ctx_of[i] >= 0 || st.t[i] >= 1.0) continue;
    double dt;
    if (cfg.gamma == 1.0) {
      dt = std::min(cfg.h, 1.0 - st.t[i]);
      st.t[i] = detail::snap_to_one(st.t[i] + dt);
    } else {
      dt = time_warp(st.u[i], std::min(cfg.h, 1.0 - st.u[i]), cfg.gamma).dt;
      st.u[i] = detail::snap_to_one(std::min(1.0, st.u[i] + cfg.h));
      st.t[i] = st.u[i] >= 1.0 ? 1.0 : std::pow(st.u[i], cfg.gamma);
    }
    auto xi = st.x[i].values();
    const auto vi = out.velocity[i].values();
    for (std::size_t e = 0; e < xi.size(); ++e) {
      xi[e] = static_cast<float>(static_cast<double>(xi[e]) + dt * static_cast<double>(vi[e]));
    }
  }
  const double t_g = st.t_g;
  const double t_g_next = detail::snap_to_one(std::min(1.0, t_g + cfg.h));

  std::vector<int> counts(st.x.size(), 0);
  if (t_g < 1.0 - kSingularityGuard) {
    if (t_g_next < 1.0 - kSingularityGuard) {
      const double dh = t_g_next - t_g;
      if (cfg.thinning == Thinning::kBernoulli) {
        const auto fire = bernoulli_insertions(lambda, t_g, dh, cfg.scheduler, cfg, st.thin_rng);
        for (std::size_t j = 0; j < fire.size(); ++j) counts[j] = fire[j] ? 1 : 0;
      } else {
        counts = poisson_insertions(lambda, t_g, dh, cfg.scheduler, cfg, st.thin_rng);
      }
    } else {
      counts = final_insertions(lambda, cfg, st.thin_rng);
    }
  }
  std::size_t room = cfg.max_len - st.x.size();
  for (int& c : counts) {
    const auto allowed = static_cast<int>(std::min<std::size_t>(room, static_cast<std::size_t>(c)));
    if (allowed < c) st.truncated = true;
    c = allowed;
    room -= static_cast<std::size_t>(allowed);
  }

  if (std::any_of(counts.begin(), counts.end(), [](int c) { return c > 0; })) {
    FrameSeq nx(cfg.frame);
    std::vector<double> nt, nu;
    std::vector<int> nctx;
    for (std::size_t j = 0; j < st.x.size(); ++j) {
      nx.push_back(st.x[j]);
      nt.push_back(st.t[j]);
      nu.push_back(st.u[j]);
      nctx.push_back(st.ctx_of[j]);
      for (int c = 0; c < counts[j]; ++c) {
        nx.push_back(st.noise_frame(cfg.frame));
        nt.push_back(0.0);
        nu.push_back(0.0);
        nctx.push_back(-1);
        rec.insertions.push_back({j, t_g_next});
      }
    }
    st.x = std::move(nx);
    st.t = std::move(nt);
    st.u = std::move(nu);
    st.ctx_of = std::move(nctx);
  }
  if constexpr (InsertionObserver<M>) {
    if (t_g < 1.0 - kSingularityGuard) model.observe_insertions(std::span<const int>(counts), t_g_next);
  }

  st.t_g = t_g_next;
  rec.t_after = st.t;
  rec.n_visible = st.x.size();
  return rec;
}

// Runs the sampler until every generated frame is clean.
template <class M>
  requires FieldModel<M>
SampleResult generate(M& model, const SamplerConfig& cfg, const ContextSpec& context = {}) {
  SamplerState st = initial_state(cfg, context);
  SampleResult result;
  const std::size_t hard_cap = 4 * cfg.step_bound() + 16;
  while (!st.finished()) {
    if (result.trace.steps.size() >= hard_cap) throw NumericalError("generate: step budget exhausted");
    StepRecord rec = step(model, st, cfg);
    rec.step = result.trace.steps.size();
    result.trace.steps.push_back(std::move(rec));
  }
  result.trace.truncated = st.truncated;
  result.trace.final_length = st.x.size();
  result.context = st.context();
  result.video = std::move(st.x);
  return result;
}

}  // namespace varflow

#endif  // VARFLOW_SAMPLER_HPP_
