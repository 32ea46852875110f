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

#ifndef VARFLOW_REFERENCE_NET_HPP_
#define VARFLOW_REFERENCE_NET_HPP_

// Small residual attention network over frames with per-frame time
// modulation, a dense velocity head and an exponential rate head. Forward and
// backward are written out by hand on Eigen matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/field.hpp"
#include "varflow/random.hpp"

namespace varflow {

struct NetConfig {
  FrameShape frame{3, 3, 3};
  int width = 64;
  int blocks = 4;
  int mlp_ratio = 2;
  int time_freqs = 6;
  int max_len = 64;
  int embed_dim = 16;

  int frame_dim() const { return static_cast<int>(frame.size()); }
  int cond_dim() const { return 4 * time_freqs + 2 * embed_dim; }
  int hidden() const { return width * mlp_ratio; }

  void validate() const {
    if (frame.size() == 0) throw InvalidArgument("NetConfig: empty frame shape");
    if (width < 1 || blocks < 1 || mlp_ratio < 1 || time_freqs < 1 || max_len < 2 || embed_dim < 1) {
      throw InvalidArgument("NetConfig: all sizes must be positive");
    }
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct TensorEntry {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Names, shapes and offsets of every parameter tensor, in storage order.
inline std::vector<TensorEntry> parameter_manifest(const NetConfig& c) {
  std::vector<TensorEntry> m;
  std::size_t off = 0;
  auto add = [&](std::string name, int r, int k) {
    m.push_back({std::move(name), r, k, off});
    off += m.back().size();
  };
  const int d = c.frame_dim(), w = c.width, e = c.embed_dim;
  add("input.w", 2 * d, w);
  add("input.b", 1, w);
  add("time.w1", c.cond_dim(), w);
  add("time.b1", 1, w);
  add("time.w2", w, 4 * w * c.blocks);
  add("time.b2", 1, 4 * w * c.blocks);
  add("length_embed", c.max_len, e);
  add("position_embed", c.max_len, e);
  for (int b = 0; b < c.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    add(p + "wq", w, w);
    add(p + "wk", w, w);
    add(p + "wv", w, w);
    add(p + "wo", w, w);
    add(p + "w1", w, c.hidden());
    add(p + "b1", 1, c.hidden());
    add(p + "w2", c.hidden(), w);
    add(p + "b2", 1, w);
  }
  add("velocity.w", w, d);
  add("velocity.b", 1, d);
  add("rate.token", 1, e);
  add("rate.w1", w + e, w);
  add("rate.b1", 1, w);
  add("rate.w2", w, 1);
  add("rate.b2", 1, 1);
  return m;
}

// Parameter and gradient storage. The fixed alignment keeps vectorized
// reductions bit-reproducible across allocations.
template <class Scalar>
using ParamVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

template <class Scalar>
class ReferenceNet {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;

  explicit ReferenceNet(NetConfig cfg) : cfg_(cfg), manifest_(parameter_manifest(cfg)) {
    cfg_.validate();
    params_.assign(manifest_.back().offset + manifest_.back().size(), Scalar(0));
    for (std::size_t i = 0; i < manifest_.size(); ++i) index_[manifest_[i].name] = i;
  }

  ReferenceNet(NetConfig cfg, std::uint64_t seed) : ReferenceNet(cfg) { init(seed); }

  const NetConfig& config() const noexcept { return cfg_; }
  const std::vector<TensorEntry>& manifest() const noexcept { return manifest_; }
  ParamVector<Scalar>& params() noexcept { return params_; }
  const ParamVector<Scalar>& params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  const TensorEntry& entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("ReferenceNet: unknown tensor " + name);
    return manifest_[it->second];
  }

  MapM tensor(const std::string& name) { return tensor_in(params_, name); }
  CMapM tensor(const std::string& name) const { return tensor_in(params_, name); }

  MapM tensor_in(ParamVector<Scalar>& buf, const std::string& name) const {
    const auto& e = entry(name);
    return MapM(buf.data() + e.offset, e.rows, e.cols);
  }
  CMapM tensor_in(const ParamVector<Scalar>& buf, const std::string& name) const {
    const auto& e = entry(name);
    return CMapM(buf.data() + e.offset, e.rows, e.cols);
  }

  // Fan-in scaled normal weights; residual outputs, modulation and the rate
  // read-out start at zero so every block is the identity at step 0.
  void init(std::uint64_t seed) {
    Rng rng = substream(seed, Stream::kInit);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::fill(params_.begin(), params_.end(), Scalar(0));
    for (const auto& e : manifest_) {
      const std::string& n = e.name;
      const bool bias = n.ends_with(".b") || n.ends_with(".b1") || n.ends_with(".b2");
      const bool zero = n == "time.w2" || n.ends_with(".wo") || n.ends_with(".w2");
      if (bias || zero) continue;
      double std = 1.0 / std::sqrt(static_cast<double>(e.rows));
      if (n.ends_with("_embed") || n == "rate.token") std = 0.1;
      for (std::size_t i = 0; i < e.size(); ++i) params_[e.offset + i] = static_cast<Scalar>(std * normal(rng));
    }
  }

  template <class Other>
  ReferenceNet<Other> cast() const {
    ReferenceNet<Other> out(cfg_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = static_cast<Other>(params_[i]);
    return out;
  }

  struct BlockCache {
    Mat h_in, za, q, k, v, p, a, h_mid, zm, u, g;
  };

  struct Cache {
    Mat x_in, cond, hc_pre, hc, mod, h_out, rate_in, r_pre, r_act;
    std::vector<BlockCache> blocks;
    Mat velocity;                // n x D
    std::vector<Scalar> log_rate;  // n
    std::size_t length_index = 0;
  };

  // Forward pass over one sequence. `t` are per-frame times; context frames
  // contribute their content on the second half of the input channels.
  Cache forward(const FrameSeq& x, std::span<const double> t, const ContextSpec& ctx,
                bool cond_dropped) const {
    const int n = static_cast<int>(x.size());
    const int d = cfg_.frame_dim(), w = cfg_.width, f = cfg_.time_freqs, e = cfg_.embed_dim;
    if (n < 1) throw InvalidArgument("ReferenceNet: empty sequence");
    if (x.shape() && *x.shape() != cfg_.frame) {
      throw InvalidArgument("ReferenceNet: frame shape " + to_string(*x.shape()) + " but net expects " +
                            to_string(cfg_.frame));
    }
    if (static_cast<int>(t.size()) != n) throw InvalidArgument("ReferenceNet: time count mismatch");
    const std::vector<int> ctx_index = ctx.index_by_position(x.size());

    Cache c;
    c.x_in = Mat::Zero(n, 2 * d);
    for (int i = 0; i < n; ++i) {
      const bool is_ctx = ctx_index[i] >= 0;
      if (is_ctx && cond_dropped) continue;
      for (int j = 0; j < d; ++j) c.x_in(i, j) = static_cast<Scalar>(x[i][j]);
      if (is_ctx) {
        const auto& cf = ctx.frames[static_cast<std::size_t>(ctx_index[i])].frame;
        for (int j = 0; j < d; ++j) c.x_in(i, d + j) = static_cast<Scalar>(cf[j]);
      }
    }

    double t_g = 0.0;
    for (int i = 0; i < n; ++i) {
      if (ctx_index[i] < 0) t_g = std::max(t_g, t[i]);
    }
    c.length_index = std::min<std::size_t>(x.size(), static_cast<std::size_t>(cfg_.max_len - 1));
    auto len_emb = tensor("length_embed");
    auto pos_emb = tensor("position_embed");
    c.cond = Mat::Zero(n, cfg_.cond_dim());
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < f; ++k) {
        const double omega = std::numbers::pi * std::ldexp(1.0, k);
        c.cond(i, 2 * k) = static_cast<Scalar>(std::sin(omega * t[i]));
        c.cond(i, 2 * k + 1) = static_cast<Scalar>(std::cos(omega * t[i]));
        c.cond(i, 2 * f + 2 * k) = static_cast<Scalar>(std::sin(omega * t_g));
        c.cond(i, 2 * f + 2 * k + 1) = static_cast<Scalar>(std::cos(omega * t_g));
      }
      const int pos = std::min(i, cfg_.max_len - 1);
      c.cond.block(i, 4 * f, 1, e) = len_emb.row(static_cast<Eigen::Index>(c.length_index));
      c.cond.block(i, 4 * f + e, 1, e) = pos_emb.row(pos);
    }

    c.hc_pre = (c.cond * tensor("time.w1")).rowwise() + row("time.b1");
    c.hc = silu(c.hc_pre);
    c.mod = (c.hc * tensor("time.w2")).rowwise() + row("time.b2");

    Mat h = (c.x_in * tensor("input.w")).rowwise() + row("input.b");
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(w));
    c.blocks.resize(static_cast<std::size_t>(cfg_.blocks));
    for (int b = 0; b < cfg_.blocks; ++b) {
      BlockCache& bc = c.blocks[static_cast<std::size_t>(b)];
      const std::string p = "block" + std::to_string(b) + ".";
      const int m0 = 4 * w * b;
      bc.h_in = h;
      bc.za = h.cwiseProduct((c.mod.middleCols(m0, w).array() + Scalar(1)).matrix()) + c.mod.middleCols(m0 + w, w);
      bc.q = bc.za * tensor(p + "wq");
      bc.k = bc.za * tensor(p + "wk");
      bc.v = bc.za * tensor(p + "wv");
      bc.p = softmax_rows((bc.q * bc.k.transpose()) * scale);
      bc.a = bc.p * bc.v;
      h = h + bc.a * tensor(p + "wo");
      bc.h_mid = h;
      bc.zm = h.cwiseProduct((c.mod.middleCols(m0 + 2 * w, w).array() + Scalar(1)).matrix()) +
              c.mod.middleCols(m0 + 3 * w, w);
      bc.u = (bc.zm * tensor(p + "w1")).rowwise() + row(p + "b1");
      bc.g = silu(bc.u);
      h = h + ((bc.g * tensor(p + "w2")).rowwise() + row(p + "b2"));
    }
    c.h_out = h;
    c.velocity = (h * tensor("velocity.w")).rowwise() + row("velocity.b");

    c.rate_in = Mat(n, w + e);
    c.rate_in.leftCols(w) = h;
    c.rate_in.rightCols(e) = tensor("rate.token").replicate(n, 1);
    c.r_pre = (c.rate_in * tensor("rate.w1")).rowwise() + row("rate.b1");
    c.r_act = silu(c.r_pre);
    const Mat ell = (c.r_act * tensor("rate.w2")).rowwise() + row("rate.b2");
    c.log_rate.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) c.log_rate[static_cast<std::size_t>(i)] = ell(i, 0);
    return c;
  }

  // Accumulates parameter gradients into `grad` given d(loss)/d(velocity) and
  // d(loss)/d(log rate).
  void backward(const Cache& c, const Mat& d_velocity, std::span<const Scalar> d_log_rate,
                ParamVector<Scalar>& grad) const {
    if (grad.size() != params_.size()) grad.assign(params_.size(), Scalar(0));
    const int n = static_cast<int>(c.h_out.rows());
    const int w = cfg_.width, f = cfg_.time_freqs, e = cfg_.embed_dim;
    auto G = [&](const std::string& name) { return tensor_in(grad, name); };

    Mat d_ell(n, 1);
    for (int i = 0; i < n; ++i) d_ell(i, 0) = d_log_rate[static_cast<std::size_t>(i)];
    G("rate.w2") += c.r_act.transpose() * d_ell;
    G("rate.b2") += d_ell.colwise().sum();
    Mat d_r_pre = (d_ell * tensor("rate.w2").transpose()).cwiseProduct(silu_grad(c.r_pre));
    G("rate.w1") += c.rate_in.transpose() * d_r_pre;
    G("rate.b1") += d_r_pre.colwise().sum();
    const Mat d_rate_in = d_r_pre * tensor("rate.w1").transpose();
    G("rate.token") += d_rate_in.rightCols(e).colwise().sum();

    G("velocity.w") += c.h_out.transpose() * d_velocity;
    G("velocity.b") += d_velocity.colwise().sum();
    Mat dh = d_velocity * tensor("velocity.w").transpose() + d_rate_in.leftCols(w);

    Mat d_mod = Mat::Zero(n, c.mod.cols());
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(w));
    for (int b = cfg_.blocks - 1; b >= 0; --b) {
      const BlockCache& bc = c.blocks[static_cast<std::size_t>(b)];
      const std::string p = "block" + std::to_string(b) + ".";
      const int m0 = 4 * w * b;

      // MLP branch.
      G(p + "w2") += bc.g.transpose() * dh;
      G(p + "b2") += dh.colwise().sum();
      const Mat du = (dh * tensor(p + "w2").transpose()).cwiseProduct(silu_grad(bc.u));
      G(p + "w1") += bc.zm.transpose() * du;
      G(p + "b1") += du.colwise().sum();
      const Mat dzm = du * tensor(p + "w1").transpose();
      d_mod.middleCols(m0 + 2 * w, w) += dzm.cwiseProduct(bc.h_mid);
      d_mod.middleCols(m0 + 3 * w, w) += dzm;
      dh += dzm.cwiseProduct((c.mod.middleCols(m0 + 2 * w, w).array() + Scalar(1)).matrix());

      // Attention branch.
      G(p + "wo") += bc.a.transpose() * dh;
      const Mat da = dh * tensor(p + "wo").transpose();
      const Mat dp = da * bc.v.transpose();
      const Mat dv = bc.p.transpose() * da;
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = dp.cwiseProduct(bc.p).rowwise().sum();
      const Mat ds = (bc.p.array() * (dp.colwise() - dot).array()).matrix() * scale;
      const Mat dq = ds * bc.k;
      const Mat dk = ds.transpose() * bc.q;
      G(p + "wq") += bc.za.transpose() * dq;
      G(p + "wk") += bc.za.transpose() * dk;
      G(p + "wv") += bc.za.transpose() * dv;
      const Mat dza = dq * tensor(p + "wq").transpose() + dk * tensor(p + "wk").transpose() +
                      dv * tensor(p + "wv").transpose();
      d_mod.middleCols(m0, w) += dza.cwiseProduct(bc.h_in);
      d_mod.middleCols(m0 + w, w) += dza;
      dh += dza.cwiseProduct((c.mod.middleCols(m0, w).array() + Scalar(1)).matrix());
    }
    G("input.w") += c.x_in.transpose() * dh;
    G("input.b") += dh.colwise().sum();

    G("time.w2") += c.hc.transpose() * d_mod;
    G("time.b2") += d_mod.colwise().sum();
    const Mat d_hc_pre = (d_mod * tensor("time.w2").transpose()).cwiseProduct(silu_grad(c.hc_pre));
    G("time.w1") += c.cond.transpose() * d_hc_pre;
    G("time.b1") += d_hc_pre.colwise().sum();
    const Mat d_cond = d_hc_pre * tensor("time.w1").transpose();
    auto g_len = G("length_embed");
    auto g_pos = G("position_embed");
    for (int i = 0; i < n; ++i) {
      g_len.row(static_cast<Eigen::Index>(c.length_index)) += d_cond.block(i, 4 * f, 1, e);
      g_pos.row(std::min(i, cfg_.max_len - 1)) += d_cond.block(i, 4 * f + e, 1, e);
    }
  }

  FieldOutput eval(const FrameSeq& x, std::span<const double> t, const ContextSpec& ctx,
                   bool cond_dropped) const {
    const Cache c = forward(x, t, ctx, cond_dropped);
    FieldOutput out;
    const int d = cfg_.frame_dim();
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<float> v(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] = static_cast<float>(c.velocity(static_cast<Eigen::Index>(i), j));
      for (float& z : v) {
        if (!std::isfinite(z)) throw NumericalError("ReferenceNet: non-finite velocity");
      }
      out.velocity.emplace_back(cfg_.frame, std::move(v));
      out.rate.push_back(std::exp(static_cast<double>(c.log_rate[i])));
    }
    return out;
  }

 private:
  Row row(const std::string& name) const { return tensor(name).row(0); }

  static Mat silu(const Mat& x) {
    return x.unaryExpr([](Scalar z) { return z / (Scalar(1) + std::exp(-z)); });
  }

  static Mat silu_grad(const Mat& x) {
    return x.unaryExpr([](Scalar z) {
      const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-z));
      return s * (Scalar(1) + z * (Scalar(1) - s));
    });
  }

  static Mat softmax_rows(Mat s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const Scalar mx = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - mx).exp();
      s.row(i) /= s.row(i).sum();
    }
    return s;
  }

  NetConfig cfg_;
  std::vector<TensorEntry> manifest_;
  std::map<std::string, std::size_t> index_;
  ParamVector<Scalar> params_;
};

}  // namespace varflow

#endif  // VARFLOW_REFERENCE_NET_HPP_
