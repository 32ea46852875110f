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

#ifndef VARFLOW_TRAINER_HPP_
#define VARFLOW_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varflow/binary_io.hpp"
#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/field.hpp"
#include "varflow/losses.hpp"
#include "varflow/random.hpp"
#include "varflow/reference_net.hpp"
#include "varflow/scheduler.hpp"

namespace varflow {

enum class OptimizerKind { kSgd, kAdam };
enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 3e-4;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t steps = 1000;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double cond_dropout_prob = 0.1;
  double context_prob = 0.5;  // share of snapshots trained as image-to-video
  std::size_t n_start = 1;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;     // global gradient norm cap, 0 disables
  std::size_t log_every = 50;
  Scheduler scheduler = Scheduler::linear();
  GlobalTimeDist time_dist{};
  LossOptions loss{};
  NetConfig net{};

  void validate() const {
    if (batch_size < 1) throw InvalidArgument("train.batch_size must be >= 1");
    if (!(lr >= 0.0)) throw InvalidArgument("train.lr must be >= 0");
    if (!(cond_dropout_prob >= 0.0 && cond_dropout_prob < 1.0)) {
      throw InvalidArgument("train.cond_dropout_prob must be in [0, 1)");
    }
    if (!(context_prob >= 0.0 && context_prob <= 1.0)) throw InvalidArgument("train.context_prob must be in [0, 1]");
    if (n_start < 1) throw InvalidArgument("train.n_start must be >= 1");
    if (!(grad_clip >= 0.0)) throw InvalidArgument("train.grad_clip must be >= 0");
    if (!(loss.w_ins >= 0.0)) throw InvalidArgument("loss.w_ins must be >= 0");
    net.validate();
  }
};

struct SnapshotOptions {
  std::size_t n_start = 1;
  double context_prob = 0.0;
  double cond_dropout_prob = 0.0;
};

// Noised view of one video at a random point of the training schedule. With
// probability context_prob the first frame becomes an active context frame
// held at t = 1; the next n_start frames are the starting frames.
inline TrainingSnapshot make_snapshot(const FrameSeq& video, const Scheduler& s, const GlobalTimeDist& dist,
                                      const SnapshotOptions& opt, Rng& rng) {
  const std::size_t n = video.size();
  if (n < 1) throw InvalidArgument("make_snapshot: empty video");
  if (opt.n_start < 1) throw InvalidArgument("make_snapshot: n_start must be >= 1");
  const bool with_context = opt.context_prob > 0.0 && n > opt.n_start && uniform01(rng) < opt.context_prob;
  const std::size_t lead = std::min(n, opt.n_start + (with_context ? 1 : 0));
  const TrainingTimes tt = sample_training_times(s, dist, n, lead, rng);

  TrainingSnapshot snap;
  snap.t_g = tt.times.t_g();
  const auto mask = tt.visible_mask();
  snap.k = pending_counts(mask);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  snap.x = FrameSeq(*video.shape());
  snap.x0 = FrameSeq(*video.shape());
  snap.x1 = FrameSeq(*video.shape());
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const bool is_ctx = with_context && i == 0;
    const double ti = is_ctx ? 1.0 : tt.times.t[i];
    std::vector<float> noise(video[i].size());
    for (float& z : noise) z = normal(rng);
    std::vector<float> xt(noise.size());
    for (std::size_t e = 0; e < xt.size(); ++e) {
      xt[e] = ti >= 1.0 ? video[i][e]
                        : static_cast<float>(ti * video[i][e] + (1.0 - ti) * static_cast<double>(noise[e]));
    }
    snap.x.push_back(FrameTensor(*video.shape(), std::move(xt)));
    snap.x0.push_back(FrameTensor(*video.shape(), std::move(noise)));
    snap.x1.push_back(video[i]);
    snap.t.push_back(ti);
    snap.active.push_back(!is_ctx && tt.times.states[i] == FrameState::kFlowing);
    snap.alignment.push_back(i);
  }
  snap.slot_enabled.assign(snap.x.size(), true);
  if (with_context) {
    snap.ctx.frames.push_back({0, video[0], ContextRole::kActive});
    snap.cond_dropped = uniform01(rng) < opt.cond_dropout_prob;
  }
  return snap;
}

struct BatchLoss {
  double insertion_nll = 0.0;  // per enabled slot
  double velocity_mse = 0.0;   // per active frame
  double total = 0.0;
  std::size_t slots = 0;
  std::size_t active_frames = 0;
};

// Batch objective w_ins * sum(NLL) / slots + sum(sq. error) / active frames
// and its gradient. With mean_insertion = false the insertion sum is not
// normalized, which for a single snapshot equals total_loss().
template <class Scalar>
BatchLoss loss_and_grad(const ReferenceNet<Scalar>& net, std::span<const TrainingSnapshot> batch,
                        const LossOptions& opt, ParamVector<Scalar>* grad, bool mean_insertion = true) {
  using Mat = typename ReferenceNet<Scalar>::Mat;
  if (batch.empty()) throw InvalidArgument("loss_and_grad: empty batch");
  BatchLoss out;
  for (const auto& s : batch) {
    s.validate();
    out.active_frames += s.active_count();
    out.slots += static_cast<std::size_t>(std::count(s.slot_enabled.begin(), s.slot_enabled.end(), true));
  }
  const double ins_norm = mean_insertion ? 1.0 / static_cast<double>(std::max<std::size_t>(out.slots, 1)) : 1.0;
  const double vel_norm = 1.0 / static_cast<double>(out.active_frames);
  if (grad) grad->assign(net.param_count(), Scalar(0));

  double ins_sum = 0.0, vel_sum = 0.0;
  const int d = net.config().frame_dim();
  for (const auto& s : batch) {
    const auto cache = net.forward(s.x, s.t, s.ctx, s.cond_dropped);
    const double w = opt.insertion_weight(s.t_g);
    const std::size_t n = s.size();
    std::vector<Scalar> d_ell(n, Scalar(0));
    Mat d_v = Mat::Zero(static_cast<Eigen::Index>(n), d);
    for (std::size_t j = 0; j < n; ++j) {
      if (!s.slot_enabled[j]) continue;
      const double ell = static_cast<double>(cache.log_rate[j]);
      if (!std::isfinite(ell) || ell > 60.0) throw NumericalError("loss_and_grad: log-rate overflow");
      const double lam = std::exp(ell);
      ins_sum += w * (lam - s.k[j] * ell);
      d_ell[j] = static_cast<Scalar>(w * ins_norm * (lam - s.k[j]));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.active[i]) continue;
      for (int e = 0; e < d; ++e) {
        const double target = static_cast<double>(s.x1[i][static_cast<std::size_t>(e)]) - s.x0[i][static_cast<std::size_t>(e)];
        const double r = static_cast<double>(cache.velocity(static_cast<Eigen::Index>(i), e)) - target;
        vel_sum += r * r;
        d_v(static_cast<Eigen::Index>(i), e) = static_cast<Scalar>(2.0 * r * vel_norm);
      }
    }
    if (grad) net.backward(cache, d_v, d_ell, *grad);
  }
  out.insertion_nll = ins_sum * ins_norm;
  out.velocity_mse = vel_sum * vel_norm;
  out.total = out.insertion_nll + out.velocity_mse;
  if (!std::isfinite(out.total)) throw NumericalError("loss_and_grad: non-finite loss");
  return out;
}

struct AdamState {
  std::uint64_t t = 0;
  std::vector<float> m;
  std::vector<float> v;
};

struct TrainStats {
  std::size_t snapshots = 0;
  std::size_t conditional = 0;
  std::size_t dropped = 0;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<FrameSeq> data)
      : cfg_(std::move(cfg)), data_(std::move(data)), net_(cfg_.net, cfg_.seed) {
    cfg_.validate();
    if (data_.empty()) throw InvalidArgument("Trainer: empty dataset");
    for (const auto& v : data_) {
      if (v.empty() || *v.shape() != cfg_.net.frame) {
        throw InvalidArgument("Trainer: dataset frames do not match model frame shape " + to_string(cfg_.net.frame));
      }
    }
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  ReferenceNet<float>& net() noexcept { return net_; }
  const ReferenceNet<float>& net() const noexcept { return net_; }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }
  AdamState& adam() noexcept { return adam_; }
  const TrainStats& stats() const noexcept { return stats_; }

  double lr_at(std::uint64_t step) const {
    if (cfg_.lr_schedule == LrSchedule::kConstant || cfg_.steps == 0) return cfg_.lr;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg_.steps));
    return 0.5 * cfg_.lr * (1.0 + std::cos(std::numbers::pi * frac));
  }

  // Deterministic batch for a given step index.
  std::vector<TrainingSnapshot> make_batch(std::uint64_t step) {
    Rng rng = substream(cfg_.seed, Stream::kBatch, step);
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    const SnapshotOptions so{cfg_.n_start, cfg_.context_prob, cfg_.cond_dropout_prob};
    std::vector<TrainingSnapshot> batch;
    batch.reserve(cfg_.batch_size);
    for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
      batch.push_back(make_snapshot(data_[pick(rng)], cfg_.scheduler, cfg_.time_dist, so, rng));
      ++stats_.snapshots;
      if (!batch.back().ctx.empty()) {
        ++stats_.conditional;
        if (batch.back().cond_dropped) ++stats_.dropped;
      }
    }
    return batch;
  }

  BatchLoss train_step(std::span<const TrainingSnapshot> batch) {
    ParamVector<float> grad;
    const BatchLoss loss = loss_and_grad(net_, batch, cfg_.loss, &grad);
    double norm2 = 0.0;
    for (float g : grad) {
      if (!std::isfinite(g)) throw NumericalError("train_step: non-finite gradient at step " + std::to_string(step_));
      norm2 += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(norm2);
    const double clip = (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;
    auto& p = net_.params();
    const double lr = lr_at(step_);
    if (lr == 0.0) {
      ++step_;
      return loss;
    }
    if (cfg_.optimizer == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= static_cast<float>(lr * clip * grad[i]);
    } else {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      if (adam_.m.size() != p.size()) {
        adam_.m.assign(p.size(), 0.0f);
        adam_.v.assign(p.size(), 0.0f);
      }
      ++adam_.t;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_.t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_.t));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = clip * grad[i];
        adam_.m[i] = static_cast<float>(b1 * adam_.m[i] + (1.0 - b1) * g);
        adam_.v[i] = static_cast<float>(b2 * adam_.v[i] + (1.0 - b2) * g * g);
        p[i] -= static_cast<float>(lr * (adam_.m[i] / c1) / (std::sqrt(adam_.v[i] / c2) + eps));
      }
    }
    ++step_;
    return loss;
  }

  // Runs until step() == cfg.steps; `log` sees every log_every-th step.
  void run(const std::function<void(std::uint64_t, const BatchLoss&)>& log = {}) {
    while (step_ < cfg_.steps) {
      const std::uint64_t s = step_;
      const auto batch = make_batch(s);
      const BatchLoss loss = train_step(batch);
      if (log && (cfg_.log_every == 0 || s % cfg_.log_every == 0 || s + 1 == cfg_.steps)) log(s, loss);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<FrameSeq> data_;
  ReferenceNet<float> net_;
  AdamState adam_;
  TrainStats stats_;
  std::uint64_t step_ = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetConfig net;
  std::uint64_t step = 0;
  ParamVector<float> params;
  std::optional<AdamState> adam;
};

inline ByteWriter encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.magic("FCKP");
  w.put<std::uint32_t>(kCheckpointVersion);
  for (int v : {ck.net.frame.height, ck.net.frame.width, ck.net.frame.channels, ck.net.width, ck.net.blocks,
                ck.net.mlp_ratio, ck.net.time_freqs, ck.net.max_len, ck.net.embed_dim}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  }
  w.put<std::uint64_t>(ck.step);
  const auto manifest = parameter_manifest(ck.net);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.size()));
  for (const auto& e : manifest) {
    w.put_string(e.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.cols));
    w.put<std::uint64_t>(e.offset);
  }
  w.put<std::uint64_t>(ck.params.size());
  w.put<std::uint8_t>(ck.adam ? 1 : 0);
  for (float p : ck.params) w.put<float>(p);
  if (ck.adam) {
    w.put<std::uint64_t>(ck.adam->t);
    for (float x : ck.adam->m) w.put<float>(x);
    for (float x : ck.adam->v) w.put<float>(x);
  }
  return w;
}

inline Checkpoint decode_checkpoint(ByteReader r) {
  r.expect_magic("FCKP");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError(DataError::Kind::kVersionMismatch, r.label() + ": checkpoint version " +
                                                           std::to_string(version) + ", expected " +
                                                           std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  int* fields[] = {&ck.net.frame.height, &ck.net.frame.width, &ck.net.frame.channels, &ck.net.width, &ck.net.blocks,
                   &ck.net.mlp_ratio, &ck.net.time_freqs, &ck.net.max_len, &ck.net.embed_dim};
  for (int* f : fields) *f = static_cast<int>(r.get<std::uint32_t>());
  try {
    ck.net.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(DataError::Kind::kShape, r.label() + ": " + e.what());
  }
  ck.step = r.get<std::uint64_t>();
  const auto expected = parameter_manifest(ck.net);
  const auto count = r.get<std::uint32_t>();
  if (count != expected.size()) throw DataError(DataError::Kind::kShape, r.label() + ": tensor count mismatch");
  for (const auto& e : expected) {
    const std::string name = r.get_string();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto off = r.get<std::uint64_t>();
    if (name != e.name || rows != static_cast<std::uint32_t>(e.rows) || cols != static_cast<std::uint32_t>(e.cols) ||
        off != e.offset) {
      throw DataError(DataError::Kind::kShape, r.label() + ": manifest entry " + name + " does not match architecture");
    }
  }
  const auto n = r.get<std::uint64_t>();
  if (n != expected.back().offset + expected.back().size()) {
    throw DataError(DataError::Kind::kShape, r.label() + ": parameter count mismatch");
  }
  const bool has_adam = r.get<std::uint8_t>() != 0;
  if (r.remaining() < n * sizeof(float)) throw DataError(DataError::Kind::kTruncated, r.label() + ": truncated parameters");
  ck.params.resize(n);
  for (float& p : ck.params) p = r.get<float>();
  if (has_adam) {
    AdamState a;
    a.t = r.get<std::uint64_t>();
    if (r.remaining() < 2 * n * sizeof(float)) throw DataError(DataError::Kind::kTruncated, r.label() + ": truncated optimizer state");
    a.m.resize(n);
    a.v.resize(n);
    for (float& x : a.m) x = r.get<float>();
    for (float& x : a.v) x = r.get<float>();
    ck.adam = std::move(a);
  }
  if (!r.at_end()) throw DataError(DataError::Kind::kParse, r.label() + ": trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const ReferenceNet<float>& net, std::uint64_t step,
                            const AdamState* adam = nullptr) {
  Checkpoint ck{net.config(), step, net.params(), std::nullopt};
  if (adam && !adam->m.empty()) ck.adam = *adam;
  encode_checkpoint(ck).save(path);
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(ByteReader::load(path)); }

// Parameters of `ck` copied into a network of the expected architecture.
inline void load_into(const Checkpoint& ck, ReferenceNet<float>& net) {
  if (!(ck.net == net.config())) {
    throw DataError(DataError::Kind::kShape, "checkpoint architecture does not match the model configuration");
  }
  net.params() = ck.params;
}

inline ReferenceNet<float> net_from_checkpoint(const Checkpoint& ck) {
  ReferenceNet<float> net(ck.net);
  net.params() = ck.params;
  return net;
}

}  // namespace varflow

#endif  // VARFLOW_TRAINER_HPP_
