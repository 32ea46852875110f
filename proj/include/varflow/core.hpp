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

#ifndef VARFLOW_CORE_HPP_
#define VARFLOW_CORE_HPP_

// Variable-length frame sequences, the insertion/strip primitives and the
// extended-time bookkeeping shared by the rest of the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "varflow/error.hpp"

namespace varflow {

struct FrameShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }

  friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

inline std::string to_string(const FrameShape& s) {
  return "(" + std::to_string(s.height) + "," + std::to_string(s.width) + "," +
         std::to_string(s.channels) + ")";
}

// A single H x W x C frame, stored row-major as 32-bit floats.
class FrameTensor {
 public:
  FrameTensor() = default;

  explicit FrameTensor(FrameShape shape, float fill = 0.0f)
      : shape_(shape), values_(shape.size(), fill) {
    if (!std::isfinite(fill)) throw InvalidArgument("FrameTensor: non-finite fill value");
  }

  FrameTensor(FrameShape shape, std::vector<float> values)
      : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw InvalidArgument("FrameTensor: " + std::to_string(values_.size()) +
                            " values for shape " + to_string(shape_));
    }
    for (float v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("FrameTensor: non-finite entry");
    }
  }

  const FrameShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  float operator[](std::size_t i) const { return values_[i]; }
  float& operator[](std::size_t i) { return values_[i]; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const FrameTensor&, const FrameTensor&) = default;

 private:
  FrameShape shape_{};
  std::vector<float> values_;
};

// An ordered, variable-length list of frames sharing one shape.
class FrameSeq {
 public:
  FrameSeq() = default;
  explicit FrameSeq(FrameShape shape) : shape_(shape) {}

  explicit FrameSeq(std::vector<FrameTensor> frames) : frames_(std::move(frames)) {
    if (!frames_.empty()) {
      shape_ = frames_.front().shape();
      for (const auto& f : frames_) check_shape(f);
    }
  }

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  const std::optional<FrameShape>& shape() const noexcept { return shape_; }

  const FrameTensor& operator[](std::size_t i) const { return frames_[i]; }
  FrameTensor& operator[](std::size_t i) { return frames_[i]; }

  const std::vector<FrameTensor>& frames() const noexcept { return frames_; }

  auto begin() const noexcept { return frames_.begin(); }
  auto end() const noexcept { return frames_.end(); }

  void push_back(FrameTensor f) {
    check_shape(f);
    if (!shape_) shape_ = f.shape();
    frames_.push_back(std::move(f));
  }

  // Inserts `f` so that it ends up at 0-based index `pos`.
  void insert_at(std::size_t pos, FrameTensor f) {
    if (pos > frames_.size()) throw InvalidArgument("FrameSeq::insert_at: index out of range");
    check_shape(f);
    if (!shape_) shape_ = f.shape();
    frames_.insert(frames_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(f));
  }

  void erase_at(std::size_t pos) {
    if (pos >= frames_.size()) throw InvalidArgument("FrameSeq::erase_at: index out of range");
    frames_.erase(frames_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  friend bool operator==(const FrameSeq& a, const FrameSeq& b) { return a.frames_ == b.frames_; }

 private:
  void check_shape(const FrameTensor& f) const {
    if (shape_ && f.shape() != *shape_) {
      throw InvalidArgument("FrameSeq: frame shape " + to_string(f.shape()) +
                            " does not match sequence shape " + to_string(*shape_));
    }
  }

  std::optional<FrameShape> shape_;
  std::vector<FrameTensor> frames_;
};

// ins(X, i, f): insert `f` immediately after the i-th frame (1-based), so the
// new frame lands at position i + 1. Slot 0 only seeds an empty sequence.
inline FrameSeq ins(const FrameSeq& x, std::size_t i, const FrameTensor& f) {
  if (x.empty()) {
    if (i != 0) throw InvalidArgument("ins: only slot 0 is valid on an empty sequence");
  } else if (i < 1 || i > x.size()) {
    throw InvalidArgument("ins: slot " + std::to_string(i) + " out of range [1, " +
                          std::to_string(x.size()) + "]");
  }
  FrameSeq out = x;
  out.insert_at(i, f);
  return out;
}

// Removes the frame at 1-based position `i`; the inverse of ins(X, i - 1, .).
inline FrameSeq remove_at(const FrameSeq& x, std::size_t i) {
  if (i < 1 || i > x.size()) throw InvalidArgument("remove_at: position out of range");
  FrameSeq out = x;
  out.erase_at(i - 1);
  return out;
}

// A fixed-length sequence whose slots are either frames or the blank token.
using AugmentedSeq = std::vector<std::optional<FrameTensor>>;

struct StripResult {
  FrameSeq visible;
  // alignment[k] is the 0-based slot index of the k-th visible frame.
  std::vector<std::size_t> alignment;
};

inline StripResult strip(const AugmentedSeq& z) {
  StripResult out;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i]) {
      out.visible.push_back(*z[i]);
      out.alignment.push_back(i);
    }
  }
  return out;
}

// Same as strip() for any per-slot payload, driven by a visibility mask.
template <class T>
std::vector<T> strip_masked(std::span<const T> values, const std::vector<bool>& mask) {
  if (values.size() != mask.size()) throw InvalidArgument("strip_masked: length mismatch");
  std::vector<T> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) out.push_back(values[i]);
  }
  return out;
}

inline double clip(double tau) {
  if (std::isnan(tau)) throw InvalidArgument("clip: NaN time");
  return std::max(0.0, std::min(1.0, tau));
}

enum class FrameState { kDeleted, kFlowing, kTerminal };

inline FrameState frame_state(double tau) {
  if (std::isnan(tau)) throw InvalidArgument("frame_state: NaN time");
  if (tau < 0.0) return FrameState::kDeleted;
  if (tau < 1.0) return FrameState::kFlowing;
  return FrameState::kTerminal;
}

inline const char* to_string(FrameState s) {
  switch (s) {
    case FrameState::kDeleted: return "deleted";
    case FrameState::kFlowing: return "flowing";
    case FrameState::kTerminal: return "terminal";
  }
  return "?";
}

// Extended and clipped times for every frame of a full-length target.
struct TimeState {
  double tau_g = 0.0;
  std::vector<double> tau;
  std::vector<double> t;
  std::vector<FrameState> states;

  TimeState() = default;

  TimeState(double tau_global, std::vector<double> tau_frames)
      : tau_g(tau_global), tau(std::move(tau_frames)) {
    t.reserve(tau.size());
    states.reserve(tau.size());
    for (double x : tau) {
      t.push_back(clip(x));
      states.push_back(frame_state(x));
    }
  }

  double t_g() const { return clip(tau_g); }

  std::size_t count(FrameState s) const {
    return static_cast<std::size_t>(std::count(states.begin(), states.end(), s));
  }

  std::vector<bool> visible_mask() const {
    std::vector<bool> m(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) m[i] = states[i] != FrameState::kDeleted;
    return m;
  }
};

}  // namespace varflow

#endif  // VARFLOW_CORE_HPP_
