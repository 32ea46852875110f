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

#ifndef VARFLOW_LOSSES_HPP_
#define VARFLOW_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/field.hpp"
#include "varflow/scheduler.hpp"

namespace varflow {

// k[j] = number of masked frames between the j-th visible frame and the next
// visible one (or the end).
inline std::vector<int> pending_counts(const std::vector<bool>& visible_mask) {
  if (visible_mask.empty()) return {};
  if (!visible_mask.front()) {
    throw InvalidArgument("pending_counts: first frame must be visible (unanchored masked prefix)");
  }
  std::vector<int> k;
  for (bool v : visible_mask) {
    if (v) {
      k.push_back(0);
    } else {
      ++k.back();
    }
  }
  return k;
}

// Poisson negative log-likelihood sum_j (lambda_j - k_j log lambda_j).
inline double insertion_loss(std::span<const double> lambda, std::span<const int> k) {
  if (lambda.size() != k.size()) throw InvalidArgument("insertion_loss: length mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    const double l = lambda[j];
    if (std::isnan(l)) throw InvalidArgument("insertion_loss: NaN rate");
    if (k[j] < 0) throw InvalidArgument("insertion_loss: negative count");
    if (k[j] > 0 && l <= 0.0) {
      throw InvalidArgument("insertion_loss: rate " + std::to_string(l) + " at slot " +
                            std::to_string(j) + " with pending count " + std::to_string(k[j]));
    }
    acc += l;
    if (k[j] > 0) acc -= k[j] * std::log(l);
  }
  return acc;
}

// Same objective parameterized by log-rates; fills d/d(log rate) = lambda - k.
inline double insertion_loss_log(std::span<const double> log_rate, std::span<const int> k,
                                 std::vector<double>* grad = nullptr) {
  if (log_rate.size() != k.size()) throw InvalidArgument("insertion_loss_log: length mismatch");
  if (grad) grad->assign(k.size(), 0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    if (!std::isfinite(log_rate[j])) throw NumericalError("insertion_loss_log: non-finite log-rate");
    const double l = std::exp(log_rate[j]);
    acc += l - k[j] * log_rate[j];
    if (grad) (*grad)[j] = l - k[j];
  }
  return acc;
}

struct VelocityTerm {
  double sum = 0.0;
  std::size_t active = 0;
};

// Unreduced sum of ||v - (x1 - x0)||^2 over active frames.
inline VelocityTerm velocity_sum(std::span<const FrameTensor> v_pred, std::span<const FrameTensor> x1,
                                 std::span<const FrameTensor> x0, const std::vector<bool>& active) {
  const std::size_t n = v_pred.size();
  if (x1.size() != n || x0.size() != n || active.size() != n) {
    throw InvalidArgument("velocity_loss: length mismatch");
  }
  VelocityTerm out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    if (v_pred[i].shape() != x1[i].shape() || x0[i].shape() != x1[i].shape()) {
      throw InvalidArgument("velocity_loss: shape mismatch at frame " + std::to_string(i));
    }
    double s = 0.0;
    for (std::size_t e = 0; e < v_pred[i].size(); ++e) {
      const double r = static_cast<double>(v_pred[i][e]) - (static_cast<double>(x1[i][e]) - x0[i][e]);
      s += r * r;
    }
    out.sum += s;
    ++out.active;
  }
  return out;
}

// Mean over active frames of ||v - (x1 - x0)||^2.
inline double velocity_loss(std::span<const FrameTensor> v_pred, std::span<const FrameTensor> x1,
                            std::span<const FrameTensor> x0, const std::vector<bool>& active) {
  const VelocityTerm t = velocity_sum(v_pred, x1, x0, active);
  if (t.active == 0) throw InvalidArgument("velocity_loss: no active frames");
  return t.sum / static_cast<double>(t.active);
}

// Batch reduction: squared errors summed over every active frame of every
// sample, divided by the total active count.
inline double velocity_loss_batch(std::span<const VelocityTerm> terms) {
  VelocityTerm total;
  for (const auto& t : terms) {
    total.sum += t.sum;
    total.active += t.active;
  }
  if (total.active == 0) throw InvalidArgument("velocity_loss: no active frames in batch");
  return total.sum / static_cast<double>(total.active);
}

// One training example: the visible frames of a noised video plus targets.
struct TrainingSnapshot {
  FrameSeq x;                       // noised visible frames
  FrameSeq x0;                      // noise for each visible frame
  FrameSeq x1;                      // clean content for each visible frame
  std::vector<double> t;            // per-frame times
  double t_g = 0.0;
  std::vector<bool> active;         // flowing frames (velocity is supervised)
  std::vector<int> k;               // pending counts per visible frame
  std::vector<bool> slot_enabled;   // false for slots owned by passive context
  std::vector<std::size_t> alignment;  // visible index -> index in the source video
  ContextSpec ctx;
  bool cond_dropped = false;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
  }

  void validate() const {
    const std::size_t n = x.size();
    if (n == 0) throw InvalidArgument("TrainingSnapshot: empty");
    if (x0.size() != n || x1.size() != n || t.size() != n || active.size() != n || k.size() != n ||
        slot_enabled.size() != n) {
      throw InvalidArgument("TrainingSnapshot: inconsistent field lengths");
    }
    if (active_count() == 0) throw InvalidArgument("TrainingSnapshot: no flowing frame");
    ctx.validate(n);
  }
};

struct LossOptions {
  double w_ins = 1.0;
  bool elbo_weighted = false;
  Scheduler scheduler = Scheduler::linear();

  // Factor on the insertion term: 1, or the hazard at t_g when ELBO-weighted.
  double insertion_weight(double t_g) const {
    if (!elbo_weighted) return w_ins;
    if (t_g >= 1.0 - kSingularityGuard) return 0.0;
    return w_ins * hazard(scheduler, t_g);
  }
};

struct LossReport {
  double insertion_nll = 0.0;
  double velocity_mse = 0.0;
  std::size_t active_frame_count = 0;
  double total = 0.0;
};

inline LossReport total_loss(const FieldOutput& out, const TrainingSnapshot& snap,
                             const LossOptions& opt = {}) {
  snap.validate();
  out.validate(snap.size(), snap.x.shape());
  std::vector<double> lambda;
  std::vector<int> k;
  for (std::size_t j = 0; j < snap.size(); ++j) {
    if (!snap.slot_enabled[j]) continue;
    lambda.push_back(out.rate[j]);
    k.push_back(snap.k[j]);
  }
  LossReport r;
  r.insertion_nll = insertion_loss(lambda, k);
  r.velocity_mse = velocity_loss(out.velocity, snap.x1.frames(), snap.x0.frames(), snap.active);
  r.active_frame_count = snap.active_count();
  r.total = opt.insertion_weight(snap.t_g) * r.insertion_nll + r.velocity_mse;
  if (!std::isfinite(r.total)) throw NumericalError("total_loss: non-finite loss");
  return r;
}

}  // namespace varflow

#endif  // VARFLOW_LOSSES_HPP_
