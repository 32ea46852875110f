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

// varflow command-line tool: gen-data, train, sample, eval, flops.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "varflow/varflow.hpp"

namespace vf = varflow;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

vf::RunConfig load_run_config(const std::string& path) {
  return path.empty() ? vf::RunConfig{} : vf::load_config(path);
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string kind = "toy";
  std::size_t count = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int gen_data(const GenDataArgs& a) {
  vf::Rng rng = vf::substream(a.seed, vf::Stream::kData);
  const auto videos = a.kind == "toy" ? vf::toy_frames(vf::gen_toy(a.count, rng)) : vf::gen_mixture(a.count, rng);
  vf::write_dataset(a.out, videos);
  const auto hist = vf::LengthHistogram::of(videos);
  json lengths = json::object();
  for (const auto& [l, c] : hist.counts()) lengths[std::to_string(l)] = c;
  std::cout << json{{"out", a.out}, {"count", videos.size()}, {"lengths", lengths}}.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::string log;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
};

int train(const TrainArgs& a) {
  vf::RunConfig rc = load_run_config(a.config);
  if (a.steps) rc.train.steps = *a.steps;
  if (a.seed) rc.train.seed = *a.seed;
  const auto data = vf::read_dataset(a.data);
  if (data.empty()) throw vf::DataError(vf::DataError::Kind::kShape, a.data + ": no videos");
  rc.train.net.frame = *data.front().shape();
  vf::Trainer trainer(rc.train, data);
  if (!a.resume.empty()) {
    const auto ck = vf::load_checkpoint(a.resume);
    vf::load_into(ck, trainer.net());
    trainer.set_step(ck.step);
    if (ck.adam) trainer.adam() = *ck.adam;
  }
  const std::string log_path = a.log.empty() ? a.out + ".loss.log" : a.log;
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw vf::DataError(vf::DataError::Kind::kIo, "cannot open " + log_path);
  trainer.run([&](std::uint64_t step, const vf::BatchLoss& l) {
    log << step << ' ' << l.insertion_nll << ' ' << l.velocity_mse << '\n';
    log.flush();
  });
  vf::save_checkpoint(a.out, trainer.net(), trainer.step(), &trainer.adam());
  std::cout << json{{"checkpoint", a.out}, {"steps", trainer.step()}, {"loss_log", log_path}}.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ sample

struct SampleArgs {
  std::string config;
  std::string checkpoint;
  std::string oracle;
  std::string reference;
  std::string context = "none";
  std::string context_data;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::optional<double> h;
  std::optional<double> w_s;
  std::optional<double> gamma;
  std::optional<std::string> thinning;
  std::optional<std::string> coupling;
  std::optional<std::size_t> n_start;
  std::string out;
  std::string trace;
};

json trace_json(const vf::SampleResult& r, std::size_t run) {
  json steps = json::array();
  for (const auto& s : r.trace.steps) {
    json ins = json::array();
    for (const auto& e : s.insertions) ins.push_back({e.slot, e.t_g});
    steps.push_back({{"step", s.step}, {"t_g", s.t_g}, {"n_active", s.n_active}, {"n_visible", s.n_visible},
                     {"insertions", ins}});
  }
  return {{"run", run},
          {"length", r.video.size()},
          {"steps", r.trace.step_count()},
          {"truncated", r.trace.truncated},
          {"context_ok", vf::context_preserved(r.video, r.context)},
          {"records", steps}};
}

vf::ContextSpec make_context(const SampleArgs& a, const std::vector<vf::FrameSeq>& pool, std::size_t run) {
  if (a.context == "none") return {};
  if (pool.empty()) throw vf::InvalidArgument("--context needs --context-data");
  const vf::FrameSeq& clip = pool[run % pool.size()];
  if (a.context == "first") return vf::image_to_video(clip[0]);
  return vf::interpolation({clip[0], clip[clip.size() - 1]});
}

int sample(const SampleArgs& a) {
  vf::RunConfig rc = load_run_config(a.config);
  vf::SamplerConfig cfg = rc.sampler;
  if (a.h) cfg.h = *a.h;
  if (a.w_s) cfg.w_s = *a.w_s;
  if (a.gamma) cfg.gamma = *a.gamma;
  if (a.n_start) cfg.n_start = *a.n_start;
  if (a.thinning) cfg.thinning = *a.thinning == "poisson" ? vf::Thinning::kPoisson : vf::Thinning::kBernoulli;
  if (a.coupling) {
    cfg.coupling = *a.coupling == "systematic" ? vf::SlotCoupling::kSystematic : vf::SlotCoupling::kIndependent;
  }
  if (a.count == 0) throw vf::InvalidArgument("--count must be >= 1");

  std::optional<vf::ReferenceNet<float>> net;
  if (!a.checkpoint.empty()) {
    net = vf::net_from_checkpoint(vf::load_checkpoint(a.checkpoint));
    cfg.frame = net->config().frame;
  } else if (a.oracle == "mixture") {
    cfg.frame = vf::kScalarShape;
  }
  std::vector<vf::FrameSeq> pool;
  if (!a.context_data.empty()) pool = vf::read_dataset(a.context_data);

  std::optional<vf::LengthPosteriorOracle> posterior;
  if (a.oracle == "posterior") {
    std::vector<std::size_t> lengths{15, 20, 25, 30};
    if (!a.reference.empty()) {
      lengths.clear();
      for (const auto& v : vf::read_dataset(a.reference)) lengths.push_back(v.size());
    }
    posterior.emplace(vf::LengthPosteriorOracle::from_lengths(lengths, cfg.scheduler, cfg.n_start));
  }

  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw vf::DataError(vf::DataError::Kind::kIo, "cannot open " + a.trace);
  }
  vf::Rng pick = vf::substream(a.seed, vf::Stream::kOracle);
  const auto& catalog = vf::mixture_catalog();
  std::vector<std::size_t> catalog_hits(catalog.size(), 0);
  std::size_t exact = 0, context_ok = 0;
  std::vector<vf::FrameSeq> videos;
  for (std::size_t run = 0; run < a.count; ++run) {
    cfg.seed = a.seed * 1000003ULL + run;
    const vf::ContextSpec ctx = make_context(a, pool, run);
    vf::SampleResult r;
    if (net) {
      r = vf::generate(*net, cfg, ctx);
    } else if (a.oracle == "mixture") {
      const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, catalog.size() - 1)(pick);
      auto oracle = vf::ConditionalOracle::for_generation(catalog[idx], cfg.n_start, cfg.seed);
      r = vf::generate(oracle, cfg, ctx);
      bool same = r.video.size() == catalog[idx].size();
      for (std::size_t i = 0; same && i < r.video.size(); ++i) {
        for (std::size_t e = 0; e < r.video[i].size(); ++e) same = same && std::abs(r.video[i][e] - catalog[idx][i][e]) <= 1e-5f;
      }
      exact += same ? 1 : 0;
      ++catalog_hits[idx];
    } else if (a.oracle == "zero") {
      vf::ZeroRateModel zero;
      r = vf::generate(zero, cfg, ctx);
    } else {
      r = vf::generate(*posterior, cfg, ctx);
    }
    context_ok += vf::context_preserved(r.video, r.context) ? 1 : 0;
    if (trace.is_open()) trace << trace_json(r, run).dump() << '\n';
    videos.push_back(std::move(r.video));
  }
  vf::write_dataset(a.out, videos);

  const auto hist = vf::LengthHistogram::of(videos);
  json summary{{"out", a.out}, {"count", videos.size()}, {"mean_length", hist.mean()}, {"std_length", hist.stddev()},
               {"context_fidelity", context_ok == videos.size()}};
  int status = kOk;
  if (a.oracle == "mixture" && !net) {
    summary["catalog_exact"] = exact;
    summary["catalog_counts"] = catalog_hits;
    if (exact != videos.size()) status = kNumerical;
  }
  std::cout << summary.dump() << '\n';
  return status;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string generated;
  std::string reference;
  std::string trace;
  std::size_t tol = 1;
};

int eval(const EvalArgs& a) {
  const auto gen = vf::read_dataset(a.generated);
  const auto ref = vf::read_dataset(a.reference);
  vf::EvalReport r = vf::evaluate_lengths(gen, ref, a.tol);
  if (!a.trace.empty()) {
    std::ifstream in(a.trace);
    if (!in) throw vf::DataError(vf::DataError::Kind::kIo, "cannot open " + a.trace);
    std::string line;
    std::size_t runs = 0, steps = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw vf::DataError(vf::DataError::Kind::kParse, a.trace + ": " + e.what());
      }
      ++runs;
      steps += j.at("steps").get<std::size_t>();
      r.context_fidelity = r.context_fidelity && j.at("context_ok").get<bool>();
    }
    r.mean_steps = runs ? static_cast<double>(steps) / static_cast<double>(runs) : 0.0;
  }
  json modes = json::object();
  for (const auto& [m, mass] : r.mode_mass) modes[std::to_string(m)] = mass;
  std::cout << json{{"length_tv", r.length_tv},   {"near_mode_mass", r.near_mode_mass},
                    {"mode_mass", modes},         {"mean_length", r.mean_length},
                    {"std_length", r.std_length}, {"context_fidelity", r.context_fidelity},
                    {"mean_steps", r.mean_steps}}
                   .dump(2)
            << '\n';
  return kOk;
}

// ------------------------------------------------------------------- flops

struct FlopsArgs {
  double n = 0, tokens = 0, t_full = 0, t_ar = 0, alpha = 2;
  std::string trace;
};

int flops(const FlopsArgs& a) {
  vf::FlopsReport r = vf::analytic_costs(a.n, a.tokens, a.t_full, a.t_ar, a.alpha);
  std::printf("%-28s %16s %10s\n", "method", "attention cost", "vs full");
  auto row = [&](const char* name, double v) { std::printf("%-28s %16.6g %10.4f\n", name, v, v / r.full_seq); };
  row("full sequence", r.full_seq);
  row("autoregressive, no cache", r.ar_nocache);
  row("  bound (n/3) T_AR (nL)^2", r.ar_nocache_bound);
  row("autoregressive, cached", r.ar_cache);
  row("interleaved (analytic)", r.interleaved_analytic);
  if (!a.trace.empty()) {
    std::ifstream in(a.trace);
    if (!in) throw vf::DataError(vf::DataError::Kind::kIo, "cannot open " + a.trace);
    std::string line;
    double total = 0.0;
    std::size_t runs = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      vf::SampleTrace t;
      for (const auto& s : j.at("records")) {
        vf::StepRecord rec;
        rec.n_active = s.at("n_active").get<std::size_t>();
        t.steps.push_back(rec);
      }
      total += vf::empirical_cost(t, a.tokens);
      ++runs;
    }
    if (runs == 0) throw vf::DataError(vf::DataError::Kind::kParse, a.trace + ": no runs");
    r.interleaved_empirical = total / static_cast<double>(runs);
    row("interleaved (trace mean)", r.interleaved_empirical);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varflow: variable-length video flow toolkit"};
  app.require_subcommand(1);

  GenDataArgs g;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--kind", g.kind)->check(CLI::IsMember({"toy", "mixture"}));
  gen->add_option("--count", g.count);
  gen->add_option("--seed", g.seed);
  gen->add_option("--out", g.out)->required();

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "train the reference network");
  tr->add_option("--config", t.config);
  tr->add_option("--data", t.data)->required();
  tr->add_option("--out", t.out)->required();
  tr->add_option("--resume", t.resume, "continue from a checkpoint");
  tr->add_option("--log", t.log, "loss log path (default <out>.loss.log)");
  tr->add_option("--steps", t.steps);
  tr->add_option("--seed", t.seed);

  SampleArgs s;
  auto* sa = app.add_subcommand("sample", "generate videos");
  sa->set_help_flag("--help", "Print this help message and exit");
  auto* ck = sa->add_option("--checkpoint", s.checkpoint);
  auto* orc = sa->add_option("--oracle", s.oracle)->check(CLI::IsMember({"mixture", "zero", "posterior"}));
  ck->excludes(orc);
  sa->add_option("--reference", s.reference, "length law for the posterior oracle");
  sa->add_option("--config", s.config);
  sa->add_option("--count", s.count);
  sa->add_option("--seed", s.seed);
  sa->add_option("--h", s.h);
  sa->add_option("--w-s", s.w_s);
  sa->add_option("--gamma", s.gamma);
  sa->add_option("--thinning", s.thinning)->check(CLI::IsMember({"bernoulli", "poisson"}));
  sa->add_option("--coupling", s.coupling)->check(CLI::IsMember({"independent", "systematic"}));
  sa->add_option("--n-start", s.n_start);
  sa->add_option("--context", s.context)->check(CLI::IsMember({"none", "first", "interp"}));
  sa->add_option("--context-data", s.context_data, "dataset supplying context frames");
  sa->add_option("--out", s.out)->required();
  sa->add_option("--trace", s.trace, "JSON-lines trace output");

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "compare generated lengths with a reference set");
  ev->add_option("--generated", e.generated)->required();
  ev->add_option("--reference", e.reference)->required();
  ev->add_option("--trace", e.trace);
  ev->add_option("--tol", e.tol, "mode window in frames");

  FlopsArgs f;
  auto* fl = app.add_subcommand("flops", "attention cost table");
  fl->add_option("--n", f.n)->required();
  fl->add_option("--L", f.tokens)->required();
  fl->add_option("--t-full", f.t_full)->required();
  fl->add_option("--t-ar", f.t_ar)->required();
  fl->add_option("--alpha", f.alpha);
  fl->add_option("--trace", f.trace);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return gen_data(g);
    if (*tr) return train(t);
    if (*sa) {
      if (s.checkpoint.empty() && s.oracle.empty()) throw vf::InvalidArgument("sample needs --checkpoint or --oracle");
      return sample(s);
    }
    if (*ev) return eval(e);
    if (*fl) return flops(f);
  } catch (const vf::DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const vf::NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kNumerical;
  } catch (const vf::DivergenceError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kNumerical;
  } catch (const vf::InvalidArgument& err) {
    std::cerr << "invalid argument: " << err.what() << '\n';
    return kUsage;
  } catch (const json::exception& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}
