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

#ifndef VARFLOW_FIELD_HPP_
#define VARFLOW_FIELD_HPP_

// The model contract: (X, t, context) -> per-frame velocities and
// non-negative insertion rates for the slot to the right of each frame.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"

namespace varflow {

struct FieldOutput {
  std::vector<FrameTensor> velocity;
  std::vector<double> rate;

  void validate(std::size_t n, const std::optional<FrameShape>& shape) const {
    if (velocity.size() != n || rate.size() != n) {
      throw InvalidArgument("FieldOutput: expected " + std::to_string(n) + " outputs, got " +
                            std::to_string(velocity.size()) + " velocities and " +
                            std::to_string(rate.size()) + " rates");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (shape && velocity[i].shape() != *shape) {
        throw InvalidArgument("FieldOutput: velocity shape mismatch at frame " + std::to_string(i));
      }
      if (!velocity[i].all_finite()) throw NumericalError("FieldOutput: non-finite velocity");
      if (!std::isfinite(rate[i]) || rate[i] < 0.0) {
        throw NumericalError("FieldOutput: invalid rate " + std::to_string(rate[i]));
      }
    }
  }
};

enum class ContextRole { kActive, kPassive };

// A clean conditioning frame. Active frames allow insertions in their right
// slot, passive ones never do.
struct ContextFrame {
  std::size_t position = 0;
  FrameTensor frame;
  ContextRole role = ContextRole::kActive;
};

struct ContextSpec {
  std::vector<ContextFrame> frames;

  bool empty() const noexcept { return frames.empty(); }
  std::size_t size() const noexcept { return frames.size(); }

  // Positions must be strictly increasing and inside a sequence of length n.
  void validate(std::size_t n) const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].position >= n) {
        throw InvalidArgument("ContextSpec: position " + std::to_string(frames[i].position) +
                              " outside sequence of length " + std::to_string(n));
      }
      if (i > 0 && frames[i].position <= frames[i - 1].position) {
        throw InvalidArgument("ContextSpec: positions must be strictly increasing");
      }
    }
  }

  // Per-position context index, -1 for generated frames.
  std::vector<int> index_by_position(std::size_t n) const {
    std::vector<int> out(n, -1);
    for (std::size_t i = 0; i < frames.size(); ++i) out[frames[i].position] = static_cast<int>(i);
    return out;
  }
};

template <class M>
concept FieldModel = requires(const M& m, const FrameSeq& x, std::span<const double> t,
                              const ContextSpec& ctx, bool dropped) {
  { m.eval(x, t, ctx, dropped) } -> std::convertible_to<FieldOutput>;
};

// Models that track which frames were inserted (the conditional oracle).
template <class M>
concept InsertionObserver = requires(M& m, std::span<const int> counts, double t_g) {
  m.observe_insertions(counts, t_g);
};

// Checked evaluation: validates inputs and the output contract.
template <FieldModel M>
FieldOutput eval(const M& model, const FrameSeq& x, std::span<const double> t,
                 const ContextSpec& ctx, bool cond_dropped) {
  if (x.empty()) throw InvalidArgument("eval: empty sequence");
  if (t.size() != x.size()) {
    throw InvalidArgument("eval: " + std::to_string(t.size()) + " times for " +
                          std::to_string(x.size()) + " frames");
  }
  ctx.validate(x.size());
  FieldOutput out = model.eval(x, t, ctx, cond_dropped);
  out.validate(x.size(), x.shape());
  return out;
}

}  // namespace varflow

#endif  // VARFLOW_FIELD_HPP_
