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

#ifndef VARFLOW_CONFIG_HPP_
#define VARFLOW_CONFIG_HPP_

// key = value configuration with [section] headers or dotted keys. Unknown
// keys and malformed values are reported with their line number.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "varflow/error.hpp"
#include "varflow/sampler.hpp"
#include "varflow/trainer.hpp"

namespace varflow {

struct RunConfig {
  TrainConfig train;
  SamplerConfig sampler;
};

namespace detail {

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline double parse_double(const std::string& v) {
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

inline long long parse_int(const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not an integer");
  return x;
}

inline std::size_t parse_count(const std::string& v) {
  const long long x = parse_int(v);
  if (x < 0) throw std::invalid_argument("must be non-negative");
  return static_cast<std::size_t>(x);
}

inline bool parse_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw std::invalid_argument("expected a boolean");
}

}  // namespace detail

class ConfigParser {
 public:
  ConfigParser() { register_keys(); }

  RunConfig parse(std::istream& in, const std::string& label = "config") {
    RunConfig cfg = defaults_;
    std::string line, section;
    double power_p = cfg.train.scheduler.exponent();
    std::string family = "linear";
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      auto fail = [&](const std::string& msg) {
        throw DataError(DataError::Kind::kParse, label + ":" + std::to_string(lineno) + ": " + msg);
      };
      if (line.front() == '[') {
        if (line.back() != ']') fail("unterminated section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected key = value");
      std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
      if (value.empty()) fail("empty value for " + key);
      try {
        if (key == "schedule.family") {
          family = detail::lower(value);
          if (family != "linear" && family != "power") fail("schedule.family must be linear or power");
        } else if (key == "schedule.power_p") {
          power_p = detail::parse_double(value);
        } else {
          auto it = setters_.find(key);
          if (it == setters_.end()) fail("unknown key " + key);
          it->second(cfg, value);
        }
      } catch (const DataError&) {
        throw;
      } catch (const std::exception& e) {
        fail("bad value for " + key + " (" + value + "): " + e.what());
      }
    }
    try {
      cfg.train.scheduler = family == "power" ? Scheduler::power(power_p) : Scheduler::linear();
      cfg.sampler.scheduler = cfg.train.scheduler;
      cfg.train.loss.scheduler = cfg.train.scheduler;
      cfg.sampler.frame = cfg.train.net.frame;
      cfg.train.validate();
      cfg.sampler.validate();
    } catch (const InvalidArgument& e) {
      throw DataError(DataError::Kind::kParse, label + ": " + e.what());
    }
    return cfg;
  }

  RunConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Kind::kIo, "cannot open config " + path);
    return parse(in, path);
  }

 private:
  using Setter = std::function<void(RunConfig&, const std::string&)>;

  void register_keys() {
    using namespace detail;
    auto& s = setters_;
    s["train.batch_size"] = [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_count(v); };
    s["train.lr"] = [](RunConfig& c, const std::string& v) { c.train.lr = parse_double(v); };
    s["train.optimizer"] = [](RunConfig& c, const std::string& v) {
      const std::string l = lower(v);
      if (l == "adam") c.train.optimizer = OptimizerKind::kAdam;
      else if (l == "sgd") c.train.optimizer = OptimizerKind::kSgd;
      else throw std::invalid_argument("expected adam or sgd");
    };
    s["train.lr_schedule"] = [](RunConfig& c, const std::string& v) {
      const std::string l = lower(v);
      if (l == "constant") c.train.lr_schedule = LrSchedule::kConstant;
      else if (l == "cosine") c.train.lr_schedule = LrSchedule::kCosine;
      else throw std::invalid_argument("expected constant or cosine");
    };
    s["train.steps"] = [](RunConfig& c, const std::string& v) { c.train.steps = parse_count(v); };
    s["train.cond_dropout_prob"] = [](RunConfig& c, const std::string& v) { c.train.cond_dropout_prob = parse_double(v); };
    s["train.context_prob"] = [](RunConfig& c, const std::string& v) { c.train.context_prob = parse_double(v); };
    s["train.n_start"] = [](RunConfig& c, const std::string& v) { c.train.n_start = parse_count(v); };
    s["train.seed"] = [](RunConfig& c, const std::string& v) { c.train.seed = parse_count(v); };
    s["train.grad_clip"] = [](RunConfig& c, const std::string& v) { c.train.grad_clip = parse_double(v); };
    s["train.log_every"] = [](RunConfig& c, const std::string& v) { c.train.log_every = parse_count(v); };
    s["time_dist.kind"] = [](RunConfig& c, const std::string& v) {
      const std::string l = lower(v);
      if (l == "uniform") c.train.time_dist.kind = GlobalTimeDist::Kind::kUniform;
      else if (l == "logit_normal") c.train.time_dist.kind = GlobalTimeDist::Kind::kLogitNormal;
      else if (l == "lognorm") c.train.time_dist.kind = GlobalTimeDist::Kind::kLogNormScaled;
      else throw std::invalid_argument("expected uniform, logit_normal or lognorm");
    };
    s["time_dist.mu"] = [](RunConfig& c, const std::string& v) { c.train.time_dist.mu = parse_double(v); };
    s["time_dist.sigma"] = [](RunConfig& c, const std::string& v) {
      c.train.time_dist.sigma = parse_double(v);
      if (!(c.train.time_dist.sigma > 0.0)) throw std::invalid_argument("must be positive");
    };
    s["loss.w_ins"] = [](RunConfig& c, const std::string& v) { c.train.loss.w_ins = parse_double(v); };
    s["loss.elbo_weighted"] = [](RunConfig& c, const std::string& v) { c.train.loss.elbo_weighted = parse_bool(v); };
    auto model_int = [&](const std::string& key, int NetConfig::*field) {
      s["model." + key] = [field](RunConfig& c, const std::string& v) {
        c.train.net.*field = static_cast<int>(parse_int(v));
      };
    };
    model_int("width", &NetConfig::width);
    model_int("blocks", &NetConfig::blocks);
    model_int("mlp_ratio", &NetConfig::mlp_ratio);
    model_int("time_freqs", &NetConfig::time_freqs);
    model_int("max_len", &NetConfig::max_len);
    model_int("embed_dim", &NetConfig::embed_dim);
    s["sampler.h"] = [](RunConfig& c, const std::string& v) { c.sampler.h = parse_double(v); };
    s["sampler.n_start"] = [](RunConfig& c, const std::string& v) { c.sampler.n_start = parse_count(v); };
    s["sampler.thinning"] = [](RunConfig& c, const std::string& v) {
      const std::string l = lower(v);
      if (l == "bernoulli") c.sampler.thinning = Thinning::kBernoulli;
      else if (l == "poisson") c.sampler.thinning = Thinning::kPoisson;
      else throw std::invalid_argument("expected bernoulli or poisson");
    };
    s["sampler.coupling"] = [](RunConfig& c, const std::string& v) {
      const std::string l = lower(v);
      if (l == "independent") c.sampler.coupling = SlotCoupling::kIndependent;
      else if (l == "systematic") c.sampler.coupling = SlotCoupling::kSystematic;
      else throw std::invalid_argument("expected independent or systematic");
    };
    s["sampler.exact_integral"] = [](RunConfig& c, const std::string& v) { c.sampler.exact_integral = parse_bool(v); };
    s["sampler.w_s"] = [](RunConfig& c, const std::string& v) { c.sampler.w_s = parse_double(v); };
    s["sampler.gamma"] = [](RunConfig& c, const std::string& v) { c.sampler.gamma = parse_double(v); };
    s["sampler.max_len"] = [](RunConfig& c, const std::string& v) { c.sampler.max_len = parse_count(v); };
    s["sampler.max_inserts_per_slot_step"] = [](RunConfig& c, const std::string& v) {
      c.sampler.max_inserts_per_slot_step = static_cast<int>(parse_int(v));
    };
    s["sampler.seed"] = [](RunConfig& c, const std::string& v) { c.sampler.seed = parse_count(v); };
  }

  RunConfig defaults_{};
  std::map<std::string, Setter> setters_;
};

inline RunConfig load_config(const std::string& path) { return ConfigParser().parse_file(path); }

}  // namespace varflow

#endif  // VARFLOW_CONFIG_HPP_
