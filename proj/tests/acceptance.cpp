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

// End-to-end acceptance checks. Prints one PASS/FAIL line per check and
// exits non-zero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "varflow/varflow.hpp"

namespace vf = varflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Scalar-frame target whose length follows the toy length law.
vf::FrameSeq scalar_target(std::size_t n, vf::Rng& rng) {
  vf::FrameSeq seq(vf::kScalarShape);
  std::uniform_real_distribution<float> value(-1.0f, 1.0f);
  for (std::size_t i = 0; i < n; ++i) seq.push_back(vf::FrameTensor(vf::kScalarShape, std::vector<float>{value(rng)}));
  return seq;
}

std::size_t toy_length(vf::Rng& rng) {
  static const std::vector<std::size_t> lengths{15, 20, 25, 30};
  return lengths[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
}

// Log-normal rates redrawn on every call.
struct RandomRateModel {
  mutable vf::Rng rng;
  double scale = 1.0;

  vf::FieldOutput eval(const vf::FrameSeq& x, std::span<const double>, const vf::ContextSpec&, bool) const {
    std::lognormal_distribution<double> rate(0.0, 1.0);
    vf::FieldOutput out;
    for (const auto& f : x) {
      out.velocity.emplace_back(f.shape(), 0.0f);
      out.rate.push_back(scale * rate(rng));
    }
    return out;
  }
};

Outcome oracle_reconstruction() {
  const auto t0 = std::chrono::steady_clock::now();
  vf::Rng pick = vf::substream(2, vf::Stream::kData);
  const auto& catalog = vf::mixture_catalog();
  double worst = 0.0;
  std::size_t length_misses = 0, runs = 0;
  for (double h : {0.5, 0.1, 0.02}) {
    for (std::uint64_t r = 0; r < 1000; ++r) {
      const vf::FrameSeq& target = catalog[std::uniform_int_distribution<std::size_t>(0, catalog.size() - 1)(pick)];
      auto oracle = vf::ConditionalOracle::for_generation(target, 1, r);
      vf::SamplerConfig cfg;
      cfg.h = h;
      cfg.frame = vf::kScalarShape;
      cfg.seed = r;
      const auto res = vf::generate(oracle, cfg);
      ++runs;
      if (res.video.size() != target.size()) {
        ++length_misses;
        continue;
      }
      for (std::size_t i = 0; i < target.size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(res.video[i][0] - target[i][0])));
      }
    }
  }
  return {worst <= 1e-5 && length_misses == 0,
          fmt("%zu runs, max abs error %.2e, length mismatches %zu, %.1f s", runs, worst, length_misses,
              seconds_since(t0))};
}

Outcome visibility_law() {
  const std::size_t draws = 100000, frames = 10;
  std::string detail;
  bool pass = true;
  for (const auto& [name, s] : {std::pair{"linear", vf::Scheduler::linear()}, std::pair{"power2", vf::Scheduler::power(2.0)}}) {
    vf::Rng rng = vf::substream(3, vf::Stream::kTimes);
    constexpr int kBins = 10;
    std::vector<double> dev(kBins, 0.0), var(kBins, 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
      const double t_g = vf::uniform01(rng);
      const auto tt = vf::training_times_from(vf::sample_offsets(s, frames, 1, rng), t_g);
      const auto mask = tt.visible_mask();
      const double kap = s.kappa(t_g);
      const int b = std::min(kBins - 1, static_cast<int>(t_g * kBins));
      for (std::size_t i = 1; i < frames; ++i) {
        dev[static_cast<std::size_t>(b)] += (mask[i] ? 1.0 : 0.0) - kap;
        var[static_cast<std::size_t>(b)] += kap * (1.0 - kap);
      }
    }
    double worst = std::abs(std::accumulate(dev.begin(), dev.end(), 0.0)) /
                   std::sqrt(std::accumulate(var.begin(), var.end(), 0.0));
    const double overall = worst;
    for (int b = 0; b < kBins; ++b) {
      worst = std::max(worst, std::abs(dev[static_cast<std::size_t>(b)]) / std::sqrt(var[static_cast<std::size_t>(b)]));
    }
    pass = pass && worst < 3.0;
    detail += fmt("%s |z| overall %.2f, worst bin %.2f; ", name, overall, worst);
  }
  detail += fmt("%zu draws each", draws);
  return {pass, detail};
}

Outcome hazard_identity() {
  const double delta = 1e-6;
  double worst = 0.0;
  for (const auto& s : {vf::Scheduler::linear(), vf::Scheduler::power(2.0), vf::Scheduler::power(3.0)}) {
    for (int k = 0; k <= 9; ++k) {
      const double t = 0.1 * k;
      const double fd = (s.kappa(t + delta) - s.kappa(t)) / ((1.0 - s.kappa(t)) * delta);
      const double exact = vf::hazard(s, t);
      // Power schedules have zero hazard at the origin; there the error is absolute.
      worst = std::max(worst, exact > 0.0 ? std::abs(fd - exact) / exact : std::abs(fd));
    }
  }
  return {worst < 1e-4, fmt("linear, power2, power3 on t = 0..0.9: worst relative error %.2e", worst)};
}

// f(a) - f(b) for the per-slot Poisson NLL, free of cancellation.
double nll_gap(double a, double b, int k) { return (a - b) - (k > 0 ? k * std::log1p((a - b) / b) : 0.0); }

double nll_argmin(int k, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  while (b - a > 1e-14 * std::max(1.0, a)) {
    if (nll_gap(c, d, k) < 0.0) b = d;
    else a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

Outcome poisson_optimum() {
  vf::Rng rng = vf::substream(5, vf::Stream::kData);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = std::uniform_int_distribution<int>(0, 30)(rng);
    const double arg = nll_argmin(k, 0.0, 64.0);
    worst = std::max(worst, std::abs(arg - k));
    if (k > 0) {
      // The library loss agrees that the minimizer beats its neighbours.
      const double at = vf::insertion_loss(std::vector<double>{arg}, std::vector<int>{k});
      for (double off : {-1e-3, 1e-3}) {
        if (vf::insertion_loss(std::vector<double>{arg + off}, std::vector<int>{k}) <= at) worst = INFINITY;
      }
    }
  }

  // Minibatch fit of one log-rate to noisy counts; steps are preconditioned
  // by the rate and decay as 1 / t.
  std::vector<int> counts(10000);
  std::binomial_distribution<int> draw(20, 0.3);
  for (int& c : counts) c = draw(rng);
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
  double ell = 0.0;
  std::size_t updates = 0;
  const std::size_t batch = 50;
  for (int epoch = 0; epoch < 30; ++epoch) {
    std::shuffle(counts.begin(), counts.end(), rng);
    for (std::size_t start = 0; start < counts.size(); start += batch) {
      std::span<const int> k(counts.data() + start, batch);
      std::vector<double> ell_v(batch, ell), g;
      vf::insertion_loss_log(ell_v, k, &g);
      const double grad = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(batch);
      ++updates;
      ell = std::log(std::exp(ell) - grad / static_cast<double>(updates));
    }
  }
  const double fit_err = std::abs(std::exp(ell) - mean);
  return {worst <= 1e-8 && fit_err <= 1e-3,
          fmt("argmin error %.2e over 200 slots; stochastic fit %.5f vs mean count %.5f", worst, std::exp(ell), mean)};
}

Outcome gradient_check() {
  vf::NetConfig cfg;
  vf::ReferenceNet<double> net(cfg, 6);
  vf::Rng rng = vf::substream(6, vf::Stream::kInit);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (double& p : net.params()) p += jitter(rng);

  vf::Rng data_rng = vf::substream(6, vf::Stream::kData);
  const auto videos = vf::gen_toy(4, data_rng);
  std::vector<vf::TrainingSnapshot> snaps;
  for (const auto& v : videos) {
    snaps.push_back(vf::make_snapshot(v.frames, vf::Scheduler::linear(), vf::GlobalTimeDist::uniform(),
                                      vf::SnapshotOptions{1, 0.5, 0.2}, data_rng));
  }
  const vf::LossOptions opt;
  auto loss = [&](vf::ParamVector<double>* g) {
    double total = 0.0;
    vf::ParamVector<double> part;
    if (g) g->assign(net.param_count(), 0.0);
    for (const auto& s : snaps) {
      // Single-snapshot unnormalized form is the per-snapshot objective.
      total += vf::loss_and_grad(net, std::span<const vf::TrainingSnapshot>(&s, 1), opt, g ? &part : nullptr, false).total;
      if (g) {
        for (std::size_t i = 0; i < part.size(); ++i) (*g)[i] += part[i];
      }
    }
    return total;
  };
  vf::ParamVector<double> grad;
  loss(&grad);
  const double eps = 1e-5;
  std::uniform_int_distribution<std::size_t> pick(0, net.param_count() - 1);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t i = pick(rng);
    const double saved = net.params()[i];
    net.params()[i] = saved + eps;
    const double up = loss(nullptr);
    net.params()[i] = saved - eps;
    const double down = loss(nullptr);
    net.params()[i] = saved;
    const double fd = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    ++checked;
  }
  return {worst < 1e-4 && checked >= 10, fmt("%d parameters, worst relative error %.2e", checked, worst)};
}

Outcome attention_flops() {
  double worst_analytic = 0.0;
  for (double n : {1.0, 10.0, 25.0, 100.0}) {
    for (double alpha : {1.0, 2.0, 3.5}) {
      const auto r = vf::analytic_costs(n, 4, 50, 50, alpha);
      worst_analytic = std::max(worst_analytic, std::abs(r.interleaved_analytic / r.full_seq - alpha / 3.0));
    }
  }
  const double h = 0.01, alpha = 2.0;
  vf::Rng rng = vf::substream(7, vf::Stream::kData);
  double ratio = 0.0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    const vf::FrameSeq target = scalar_target(toy_length(rng), rng);
    auto oracle = vf::ConditionalOracle::for_generation(target, 1, static_cast<std::uint64_t>(r));
    vf::SamplerConfig cfg;
    cfg.h = h;
    cfg.frame = vf::kScalarShape;
    cfg.seed = static_cast<std::uint64_t>(r);
    const auto res = vf::generate(oracle, cfg);
    const auto report = vf::analytic_costs(static_cast<double>(target.size()), 1.0, 1.0 / h, 1.0 / h, alpha);
    ratio += vf::empirical_cost(res.trace, 1.0) / report.full_seq;
  }
  ratio /= runs;
  const double rel = std::abs(ratio / (alpha / 3.0) - 1.0);
  return {worst_analytic <= 1e-12 && rel <= 0.10,
          fmt("analytic deviation %.1e; empirical ratio %.4f vs %.4f (%.1f%%) over %d runs at h = %.2f",
              worst_analytic, ratio, alpha / 3.0, 100.0 * rel, runs, h)};
}

Outcome step_bound() {
  vf::Rng rng = vf::substream(8, vf::Stream::kData);
  const std::vector<double> steps{1.0, 0.5, 0.3, 0.2, 0.1, 0.07, 0.05, 0.02, 0.01};
  std::size_t violations = 0, truncated = 0;
  double worst_fill = 0.0;
  const int runs = 10000;
  for (int r = 0; r < runs; ++r) {
    vf::SamplerConfig cfg;
    cfg.h = steps[std::uniform_int_distribution<std::size_t>(0, steps.size() - 1)(rng)];
    cfg.frame = vf::kScalarShape;
    cfg.seed = static_cast<std::uint64_t>(r);
    cfg.thinning = vf::uniform01(rng) < 0.5 ? vf::Thinning::kBernoulli : vf::Thinning::kPoisson;
    cfg.exact_integral = vf::uniform01(rng) < 0.5;
    cfg.n_start = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    vf::SampleResult res;
    switch (r % 3) {
      case 0: {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(cfg.n_start, 40)(rng);
        auto oracle = vf::ConditionalOracle::for_generation(scalar_target(n, rng), cfg.n_start, static_cast<std::uint64_t>(r));
        res = vf::generate(oracle, cfg);
        break;
      }
      case 1: {
        RandomRateModel model{vf::substream(static_cast<std::uint64_t>(r), vf::Stream::kOracle), 0.5 + 4.0 * vf::uniform01(rng)};
        res = vf::generate(model, cfg);
        break;
      }
      default: {
        std::vector<double> pmf(31, 0.0);
        for (std::size_t l : {15u, 20u, 25u, 30u}) pmf[l] = 1.0;
        vf::LengthPosteriorOracle model(pmf, vf::Scheduler::linear(), cfg.n_start);
        res = vf::generate(model, cfg);
      }
    }
    const double fill = static_cast<double>(res.trace.step_count()) / static_cast<double>(cfg.step_bound());
    worst_fill = std::max(worst_fill, fill);
    if (res.trace.step_count() > cfg.step_bound()) ++violations;
    if (res.trace.truncated) ++truncated;
  }
  return {violations == 0,
          fmt("%d runs, %zu over the bound, largest steps/bound %.3f (%zu hit max_len)", runs, violations, worst_fill,
              truncated)};
}

Outcome thinning_convergence() {
  const std::vector<double> steps{0.2, 0.05, 0.0125};
  const int runs = 2000;
  std::vector<double> tvs;
  for (double h : steps) {
    vf::LengthHistogram bern, pois;
    vf::Rng rng = vf::substream(9, vf::Stream::kData);
    for (int r = 0; r < runs; ++r) {
      const vf::FrameSeq target = scalar_target(toy_length(rng), rng);
      for (auto mode : {vf::Thinning::kBernoulli, vf::Thinning::kPoisson}) {
        auto oracle = vf::ConditionalOracle::for_generation(target, 1, static_cast<std::uint64_t>(r));
        vf::SamplerConfig cfg;
        cfg.h = h;
        cfg.frame = vf::kScalarShape;
        cfg.seed = static_cast<std::uint64_t>(r);
        cfg.thinning = mode;
        const auto res = vf::generate(oracle, cfg);
        (mode == vf::Thinning::kBernoulli ? bern : pois).add(res.video.size());
      }
    }
    tvs.push_back(bern.tv(pois));
  }
  const bool pass = tvs[0] > tvs[1] && tvs[1] > tvs[2];
  return {pass, fmt("length TV at h = 0.2, 0.05, 0.0125: %.4f, %.4f, %.4f (%d runs each)", tvs[0], tvs[1], tvs[2], runs)};
}

struct TrainedModel {
  vf::ReferenceNet<float> net;
  std::vector<vf::FrameSeq> data;
  double train_seconds = 0.0;
};

vf::TrainConfig acceptance_train_config() {
  vf::TrainConfig cfg;
  cfg.steps = 45000;
  cfg.lr = 1e-3;
  cfg.lr_schedule = vf::LrSchedule::kCosine;
  cfg.loss.w_ins = 2.0;
  cfg.loss.elbo_weighted = true;
  cfg.seed = 1;
  cfg.log_every = 500;
  cfg.net.max_len = 31;
  return cfg;
}

vf::SamplerConfig model_sampler_config(std::uint64_t seed) {
  vf::SamplerConfig cfg;
  cfg.h = 0.005;
  cfg.coupling = vf::SlotCoupling::kSystematic;
  cfg.seed = seed;
  return cfg;
}

TrainedModel train_toy_model(const std::filesystem::path& workdir, std::size_t steps_override) {
  vf::Rng rng = vf::substream(1, vf::Stream::kData);
  TrainedModel out{vf::ReferenceNet<float>(vf::NetConfig{}, 0), vf::toy_frames(vf::gen_toy(10000, rng)), 0.0};
  vf::TrainConfig cfg = acceptance_train_config();
  if (steps_override > 0) cfg.steps = steps_override;
  vf::write_dataset((workdir / "toy.fcds").string(), out.data);
  const auto t0 = std::chrono::steady_clock::now();
  vf::Trainer trainer(cfg, out.data);
  std::ofstream log(workdir / "loss.log");
  trainer.run([&](std::uint64_t step, const vf::BatchLoss& l) {
    log << step << ' ' << l.insertion_nll << ' ' << l.velocity_mse << '\n';
  });
  out.train_seconds = seconds_since(t0);
  vf::save_checkpoint((workdir / "toy.ckpt").string(), trainer.net(), trainer.step(), &trainer.adam());
  out.net = trainer.net();
  return out;
}

Outcome length_distribution(const TrainedModel& model, const std::filesystem::path& workdir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<vf::FrameSeq> generated;
  for (std::uint64_t i = 0; i < 500; ++i) {
    vf::SamplerConfig cfg = model_sampler_config(100000 + i);
    generated.push_back(vf::generate(model.net, cfg).video);
  }
  vf::write_dataset((workdir / "generated.fcds").string(), generated);
  const auto report = vf::evaluate_lengths(generated, model.data, 1);
  const double total = model.train_seconds + seconds_since(t0);
  return {report.near_mode_mass >= 0.9 && report.length_tv <= 0.15 && total <= 3600.0,
          fmt("near-mode mass %.3f, length TV %.3f, mean length %.2f, %.0f s train + sample", report.near_mode_mass,
              report.length_tv, report.mean_length, total)};
}

Outcome rate_guidance(const TrainedModel& model) {
  vf::Rng rng = vf::substream(10, vf::Stream::kData);
  const auto prompts = vf::gen_toy(200, rng);
  std::size_t wins = 0, losses = 0;
  double mean_plain = 0.0, mean_guided = 0.0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto ctx = vf::image_to_video(prompts[i].frames[0]);
    vf::SamplerConfig cfg = model_sampler_config(200000 + i);
    const std::size_t plain = vf::generate(model.net, cfg, ctx).video.size();
    cfg.w_s = 5.0;
    const std::size_t guided = vf::generate(model.net, cfg, ctx).video.size();
    mean_plain += static_cast<double>(plain);
    mean_guided += static_cast<double>(guided);
    if (guided > plain) ++wins;
    if (guided < plain) ++losses;
  }
  mean_plain /= static_cast<double>(prompts.size());
  mean_guided /= static_cast<double>(prompts.size());
  const double p = vf::sign_test_p(wins, losses);
  return {mean_guided > mean_plain && p < 0.05,
          fmt("mean length %.2f guided vs %.2f plain, %zu longer / %zu shorter, sign test p = %.3g", mean_guided,
              mean_plain, wins, losses, p)};
}

Outcome context_fidelity(const TrainedModel& model) {
  vf::Rng rng = vf::substream(11, vf::Stream::kData);
  const auto clips = vf::gen_toy(500, rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& frames = clips[i].frames;
    const auto ctx = vf::interpolation({frames[0], frames[frames.size() - 1]});
    vf::SamplerConfig cfg = model_sampler_config(300000 + i);
    const auto res = vf::generate(model.net, cfg, ctx);
    bool ok = vf::context_preserved(res.video, res.context) && res.context.frames.size() == 2 &&
              res.context.frames[0].position == 0 && res.context.frames[1].position + 1 == res.video.size() &&
              res.context.frames[0].frame == frames[0] && res.context.frames[1].frame == frames[frames.size() - 1];
    kept += ok ? 1 : 0;
  }
  return {kept == clips.size(), fmt("%zu / %zu runs keep both end frames bit-identical in place", kept, clips.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varflow acceptance checks"};
  std::string workdir = "acceptance_run";
  std::set<std::string> only;
  std::size_t train_steps = 0;
  app.add_option("--workdir", workdir, "directory for datasets, checkpoints and logs");
  app.add_option("--only", only, "run only the named checks");
  app.add_option("--train-steps", train_steps, "override the number of training steps");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(workdir);
  std::FILE* summary = std::fopen((std::filesystem::path(workdir) / "report.txt").string().c_str(), "w");

  int failures = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
    if (!only.empty() && !only.contains(name)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    const std::string line = fmt("[%s] %-22s %s (%.1f s)", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                                 seconds_since(t0));
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (summary) {
      std::fprintf(summary, "%s\n", line.c_str());
      std::fflush(summary);
    }
  };

  report("oracle_reconstruction", oracle_reconstruction);
  report("visibility_law", visibility_law);
  report("hazard_identity", hazard_identity);
  report("poisson_optimum", poisson_optimum);
  report("gradient_check", gradient_check);
  report("attention_flops", attention_flops);
  report("step_bound", step_bound);
  report("thinning_convergence", thinning_convergence);

  const std::set<std::string> model_checks{"length_distribution", "rate_guidance", "context_fidelity"};
  const bool need_model = only.empty() || std::any_of(only.begin(), only.end(), [&](const auto& n) { return model_checks.contains(n); });
  if (need_model) {
    std::optional<TrainedModel> model;
    try {
      model = train_toy_model(workdir, train_steps);
    } catch (const std::exception& e) {
      std::printf("training failed: %s\n", e.what());
    }
    auto with_model = [&](auto fn) {
      return [&, fn]() -> Outcome {
        if (!model) return {false, "no trained model"};
        return fn(*model);
      };
    };
    report("length_distribution", with_model([&](const TrainedModel& m) { return length_distribution(m, workdir); }));
    report("rate_guidance", with_model(rate_guidance));
    report("context_fidelity", with_model(context_fidelity));
  }
  std::printf("%d check(s) failed\n", failures);
  if (summary) std::fclose(summary);
  return failures == 0 ? 0 : 1;
}
