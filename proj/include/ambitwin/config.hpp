#pragma once

// Run configuration for the command-line tool: one strict JSON document.
// Unknown keys anywhere are rejected so typos cannot silently fall back to
// defaults.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambitwin/datasets.hpp"
#include "ambitwin/errors.hpp"
#include "ambitwin/metrics.hpp"
#include "ambitwin/mlp.hpp"
#include "ambitwin/random.hpp"
#include "ambitwin/straw.hpp"
#include "ambitwin/twin.hpp"

namespace ambitwin::cli {

using nlohmann::json;

enum class ExperimentKind { Straws, Credit, Synthetic };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::Straws:
    return "straws";
  case ExperimentKind::Credit:
    return "credit";
  case ExperimentKind::Synthetic:
    return "synthetic";
  }
  return "?";
}

struct StrawSection {
  straw::ChamberGeometry geometry;
  double angle_max = 45.0;
  std::size_t min_straws = 4;
  std::size_t n_events = 10000;
};

struct SyntheticSection {
  data::SyntheticSpec spec;
  std::size_t n_samples = 100000;
};

enum class CreditFormat { Numeric, Symbolic };
enum class EvalSubset { Test, Train, All };

struct CreditSection {
  CreditFormat format = CreditFormat::Numeric;
  double test_fraction = 0.2;
  EvalSubset evaluate = EvalSubset::Test;
};

struct NetSection {
  std::vector<std::size_t> hidden;
  double init_half_width = 0.5;
};

enum class SamplerKind { Uniform, Balanced };

struct TrainSection {
  TrainPlan plan;
  SamplerKind sampler = SamplerKind::Uniform;
};

struct RunConfig {
  ExperimentKind kind = ExperimentKind::Synthetic;
  std::uint64_t seed = 1;
  StrawSection straws;
  SyntheticSection synthetic;
  CreditSection credit;
  NetSection net_a;
  NetSection net_b;
  TrainSection train;
  std::optional<TargetCodec> codec_override;
  UncertaintyMode mode = UncertaintyMode::AbsError;
  metrics::HistogramRange histogram;
  metrics::FlagThresholds flags;

  std::size_t input_width() const {
    switch (kind) {
    case ExperimentKind::Straws:
      return straws.geometry.total_straws();
    case ExperimentKind::Credit:
      return data::kCreditAttributes;
    case ExperimentKind::Synthetic:
      return 1;
    }
    return 0;
  }

  TargetCodec codec() const {
    if (codec_override) {
      return *codec_override;
    }
    return kind == ExperimentKind::Straws ? straw::angle_codec(straws.angle_max) : TargetCodec{0.0, 1.0};
  }

  // Per-purpose seeds derived from the single global seed.
  std::uint64_t gen_seed() const { return derive_seed(seed, 100); }
  std::uint64_t net_a_seed() const { return derive_seed(seed, 201); }
  std::uint64_t net_b_seed() const { return derive_seed(seed, 202); }
  std::uint64_t train_seed() const { return derive_seed(seed, 300); }
  std::uint64_t split_seed() const { return derive_seed(seed, 400); }

  NetConfig arch(const NetSection &net, std::uint64_t net_seed) const {
    NetConfig c;
    c.layer_sizes.push_back(input_width());
    c.layer_sizes.insert(c.layer_sizes.end(), net.hidden.begin(), net.hidden.end());
    c.layer_sizes.push_back(1);
    c.init_half_width = net.init_half_width;
    c.seed = net_seed;
    return c;
  }
  NetConfig arch_a() const { return arch(net_a, net_a_seed()); }
  NetConfig arch_b() const { return arch(net_b, net_b_seed()); }

  TrainPlan plan() const {
    TrainPlan p = train.plan;
    p.seed = train_seed();
    return p;
  }
};

namespace detail {

inline void check_keys(const json &obj, const std::string &where, std::initializer_list<const char *> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &item : obj.items()) {
    if (!ok.count(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read(const json &obj, const char *key, const std::string &where, T &out) {
  if (!obj.contains(key)) {
    return;
  }
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

inline void read_u64(const json &obj, const char *key, const std::string &where, std::uint64_t &out) {
  if (!obj.contains(key)) {
    return;
  }
  const auto &v = obj.at(key);
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
  } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(v.get<std::int64_t>());
  } else if (v.is_number_float() && v.get<double>() >= 0.0 && v.get<double>() == std::floor(v.get<double>()) &&
             v.get<double>() < 1.8e19) {
    out = static_cast<std::uint64_t>(v.get<double>());  // allows 2e6-style literals
  } else {
    throw ConfigError("'" + std::string(key) + "' in " + where + " must be a nonnegative integer");
  }
}

inline void read_size(const json &obj, const char *key, const std::string &where, std::size_t &out) {
  std::uint64_t v = out;
  read_u64(obj, key, where, v);
  out = static_cast<std::size_t>(v);
}

inline data::ScalarFn parse_fn(const json &obj, const std::string &where) {
  if (!obj.is_object() || !obj.contains("type") || !obj.at("type").is_string()) {
    throw ConfigError(where + " needs a string 'type'");
  }
  const std::string type = obj.at("type").get<std::string>();
  if (type == "constant") {
    check_keys(obj, where, {"type", "c"});
    data::Constant f;
    read(obj, "c", where, f.c);
    return f;
  }
  if (type == "linear") {
    check_keys(obj, where, {"type", "slope", "intercept"});
    data::Linear f;
    read(obj, "slope", where, f.slope);
    read(obj, "intercept", where, f.intercept);
    return f;
  }
  if (type == "step") {
    check_keys(obj, where, {"type", "threshold", "below", "above"});
    data::Step f;
    read(obj, "threshold", where, f.threshold);
    read(obj, "below", where, f.below);
    read(obj, "above", where, f.above);
    return f;
  }
  throw ConfigError("unknown function type '" + type + "' in " + where);
}

inline json fn_to_json(const data::ScalarFn &fn) {
  if (const auto *c = std::get_if<data::Constant>(&fn)) {
    return {{"type", "constant"}, {"c", c->c}};
  }
  if (const auto *l = std::get_if<data::Linear>(&fn)) {
    return {{"type", "linear"}, {"slope", l->slope}, {"intercept", l->intercept}};
  }
  const auto &s = std::get<data::Step>(fn);
  return {{"type", "step"}, {"threshold", s.threshold}, {"below", s.below}, {"above", s.above}};
}

inline LearningSchedule parse_schedule(const json &obj, const std::string &where, LearningSchedule s) {
  check_keys(obj, where, {"eta0", "eta_min", "decay_tau"});
  read(obj, "eta0", where, s.eta0);
  read(obj, "eta_min", where, s.eta_min);
  read(obj, "decay_tau", where, s.decay_tau);
  return s;
}

inline NetSection parse_net(const json &obj, const std::string &where, NetSection n) {
  check_keys(obj, where, {"hidden", "init_half_width"});
  read(obj, "hidden", where, n.hidden);
  read(obj, "init_half_width", where, n.init_half_width);
  return n;
}

} // namespace detail

/// Defaults for a kind before the document's overrides are applied.
inline RunConfig defaults_for(ExperimentKind kind) {
  RunConfig c;
  c.kind = kind;
  switch (kind) {
  case ExperimentKind::Straws:
    c.net_a.hidden = c.net_b.hidden = {25};
    c.train.plan.phase1_iters = c.train.plan.phase2_iters = 2'000'000;
    c.train.plan.schedule_a = {0.5, 0.05, 2.0e5};
    c.train.plan.schedule_b = {0.1, 0.01, 2.0e5};
    c.histogram = {-45.0, 45.0, 91};
    c.flags = {1.0, 20.0, 20.0, 1.0};
    break;
  case ExperimentKind::Credit:
    c.net_a.hidden = c.net_b.hidden = {14};
    c.train.plan.phase1_iters = c.train.plan.phase2_iters = 500'000;
    c.train.plan.schedule_a = {0.5, 0.01, 1.0e3};
    c.train.plan.schedule_b = {0.1, 0.002, 1.0e3};
    c.train.sampler = SamplerKind::Balanced;
    c.histogram = {-1.0, 1.0, 41};
    c.flags = {0.1, 0.4, 0.5, 0.1};
    break;
  case ExperimentKind::Synthetic:
    c.net_a.hidden = c.net_b.hidden = {10};
    c.synthetic.spec.mean = data::Linear{0.5, 0.25};
    c.synthetic.spec.spread = data::Step{0.5, 0.0, 0.25};
    c.train.plan.phase1_iters = c.train.plan.phase2_iters = 200'000;
    c.train.plan.schedule_a = {0.5, 0.05, 2.0e4};
    c.train.plan.schedule_b = {0.1, 0.01, 2.0e4};
    c.histogram = {-1.0, 1.0, 41};
    c.flags = {0.05, 0.2, 0.3, 0.05};
    break;
  }
  return c;
}

inline RunConfig parse_config(const json &doc) {
  detail::check_keys(doc, "config",
                     {"kind", "seed", "straws", "synthetic", "credit", "net_a", "net_b", "train", "codec", "mode",
                      "report"});
  if (!doc.contains("kind") || !doc.at("kind").is_string()) {
    throw ConfigError("config needs a string 'kind' (straws | credit | synthetic)");
  }
  const std::string kind = doc.at("kind").get<std::string>();
  ExperimentKind k;
  if (kind == "straws") {
    k = ExperimentKind::Straws;
  } else if (kind == "credit") {
    k = ExperimentKind::Credit;
  } else if (kind == "synthetic") {
    k = ExperimentKind::Synthetic;
  } else {
    throw ConfigError("unknown experiment kind '" + kind + "'");
  }
  RunConfig c = defaults_for(k);
  detail::read_u64(doc, "seed", "config", c.seed);

  if (doc.contains("straws")) {
    if (k != ExperimentKind::Straws) {
      throw ConfigError("section 'straws' does not apply to kind " + kind);
    }
    const auto &s = doc.at("straws");
    const std::string w = "straws";
    detail::check_keys(s, w, {"n_layers", "straws_per_layer", "radius", "half_cell_shift", "angle_max", "min_straws",
                              "n_events"});
    detail::read_size(s, "n_layers", w, c.straws.geometry.n_layers);
    detail::read_size(s, "straws_per_layer", w, c.straws.geometry.straws_per_layer);
    detail::read(s, "radius", w, c.straws.geometry.radius);
    detail::read(s, "half_cell_shift", w, c.straws.geometry.half_cell_shift);
    detail::read(s, "angle_max", w, c.straws.angle_max);
    detail::read_size(s, "min_straws", w, c.straws.min_straws);
    detail::read_size(s, "n_events", w, c.straws.n_events);
  }
  if (doc.contains("synthetic")) {
    if (k != ExperimentKind::Synthetic) {
      throw ConfigError("section 'synthetic' does not apply to kind " + kind);
    }
    const auto &s = doc.at("synthetic");
    detail::check_keys(s, "synthetic", {"mean", "spread", "n_samples"});
    if (s.contains("mean")) {
      c.synthetic.spec.mean = detail::parse_fn(s.at("mean"), "synthetic.mean");
    }
    if (s.contains("spread")) {
      c.synthetic.spec.spread = detail::parse_fn(s.at("spread"), "synthetic.spread");
    }
    detail::read_size(s, "n_samples", "synthetic", c.synthetic.n_samples);
  }
  if (doc.contains("credit")) {
    if (k != ExperimentKind::Credit) {
      throw ConfigError("section 'credit' does not apply to kind " + kind);
    }
    const auto &s = doc.at("credit");
    detail::check_keys(s, "credit", {"format", "test_fraction", "evaluate"});
    std::string format = "numeric";
    std::string evaluate = "test";
    detail::read(s, "format", "credit", format);
    detail::read(s, "evaluate", "credit", evaluate);
    detail::read(s, "test_fraction", "credit", c.credit.test_fraction);
    if (format == "numeric") {
      c.credit.format = CreditFormat::Numeric;
    } else if (format == "symbolic") {
      c.credit.format = CreditFormat::Symbolic;
    } else {
      throw ConfigError("credit.format must be 'numeric' or 'symbolic'");
    }
    if (evaluate == "test") {
      c.credit.evaluate = EvalSubset::Test;
    } else if (evaluate == "train") {
      c.credit.evaluate = EvalSubset::Train;
    } else if (evaluate == "all") {
      c.credit.evaluate = EvalSubset::All;
    } else {
      throw ConfigError("credit.evaluate must be 'test', 'train' or 'all'");
    }
  }
  if (doc.contains("net_a")) {
    c.net_a = detail::parse_net(doc.at("net_a"), "net_a", c.net_a);
  }
  if (doc.contains("net_b")) {
    c.net_b = detail::parse_net(doc.at("net_b"), "net_b", c.net_b);
  }
  if (doc.contains("train")) {
    const auto &s = doc.at("train");
    detail::check_keys(s, "train",
                       {"phase1_iters", "phase2_iters", "schedule_a", "schedule_b", "reuse_phase1_order", "sampler"});
    detail::read_u64(s, "phase1_iters", "train", c.train.plan.phase1_iters);
    detail::read_u64(s, "phase2_iters", "train", c.train.plan.phase2_iters);
    if (s.contains("schedule_a")) {
      c.train.plan.schedule_a = detail::parse_schedule(s.at("schedule_a"), "train.schedule_a", c.train.plan.schedule_a);
    }
    if (s.contains("schedule_b")) {
      c.train.plan.schedule_b = detail::parse_schedule(s.at("schedule_b"), "train.schedule_b", c.train.plan.schedule_b);
    }
    detail::read(s, "reuse_phase1_order", "train", c.train.plan.reuse_phase1_order);
    std::string sampler = c.train.sampler == SamplerKind::Balanced ? "balanced" : "uniform";
    detail::read(s, "sampler", "train", sampler);
    if (sampler == "uniform") {
      c.train.sampler = SamplerKind::Uniform;
    } else if (sampler == "balanced") {
      c.train.sampler = SamplerKind::Balanced;
    } else {
      throw ConfigError("train.sampler must be 'uniform' or 'balanced'");
    }
  }
  if (doc.contains("codec")) {
    const auto &s = doc.at("codec");
    detail::check_keys(s, "codec", {"y_min", "y_max"});
    TargetCodec codec = c.codec();
    detail::read(s, "y_min", "codec", codec.y_min);
    detail::read(s, "y_max", "codec", codec.y_max);
    c.codec_override = codec;
  }
  if (doc.contains("mode")) {
    if (!doc.at("mode").is_string()) {
      throw ConfigError("mode must be a string");
    }
    c.mode = parse_mode(doc.at("mode").get<std::string>());
  }
  if (doc.contains("report")) {
    const auto &s = doc.at("report");
    const std::string w = "report";
    detail::check_keys(s, w,
                       {"hist_lo", "hist_hi", "hist_bins", "small_error", "large_delta", "critical_error",
                        "small_delta"});
    detail::read(s, "hist_lo", w, c.histogram.lo);
    detail::read(s, "hist_hi", w, c.histogram.hi);
    detail::read_size(s, "hist_bins", w, c.histogram.n_bins);
    detail::read(s, "small_error", w, c.flags.small_error);
    detail::read(s, "large_delta", w, c.flags.large_delta);
    detail::read(s, "critical_error", w, c.flags.critical_error);
    detail::read(s, "small_delta", w, c.flags.small_delta);
  }
  return c;
}

/// Throws ConfigError on any inconsistent section.
inline void validate(const RunConfig &c) {
  switch (c.kind) {
  case ExperimentKind::Straws:
    c.straws.geometry.validate();
    straw::validate_angle_max(c.straws.angle_max);
    if (c.straws.min_straws > c.straws.geometry.total_straws()) {
      throw ConfigError("straws.min_straws exceeds the number of straws");
    }
    break;
  case ExperimentKind::Synthetic:
    c.synthetic.spec.validate();
    break;
  case ExperimentKind::Credit:
    if (!(c.credit.test_fraction >= 0.0 && c.credit.test_fraction < 1.0)) {
      throw ConfigError("credit.test_fraction must lie in [0, 1)");
    }
    break;
  }
  c.arch_a().validate();
  c.arch_b().validate();
  c.plan().validate();
  c.codec().validate();
  if (!(c.histogram.lo < c.histogram.hi) || c.histogram.n_bins == 0) {
    throw ConfigError("report histogram needs hist_lo < hist_hi and hist_bins >= 1");
  }
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  RunConfig c = parse_config(doc);
  validate(c);
  return c;
}

/// Everything needed to regenerate a dataset.
inline json manifest_for(const RunConfig &c, std::size_t rows) {
  json m;
  m["kind"] = to_string(c.kind);
  m["seed"] = c.seed;
  m["gen_seed"] = c.gen_seed();
  m["rows"] = rows;
  if (c.kind == ExperimentKind::Straws) {
    const auto &g = c.straws.geometry;
    m["straws"] = {{"n_layers", g.n_layers},       {"straws_per_layer", g.straws_per_layer},
                   {"radius", g.radius},           {"half_cell_shift", g.half_cell_shift},
                   {"angle_max", c.straws.angle_max}, {"min_straws", c.straws.min_straws},
                   {"n_events", c.straws.n_events}};
  } else if (c.kind == ExperimentKind::Synthetic) {
    m["synthetic"] = {{"mean", detail::fn_to_json(c.synthetic.spec.mean)},
                      {"spread", detail::fn_to_json(c.synthetic.spec.spread)},
                      {"n_samples", c.synthetic.n_samples}};
  }
  return m;
}

} // namespace ambitwin::cli
