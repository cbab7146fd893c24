#pragma once

// The gen / train / eval / predict / convert-credit stages of the
// command-line tool. Each stage validates its inputs before touching the
// output directory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ambitwin/config.hpp"
#include "ambitwin/datasets.hpp"
#include "ambitwin/errors.hpp"
#include "ambitwin/metrics.hpp"
#include "ambitwin/straw.hpp"
#include "ambitwin/text_io.hpp"
#include "ambitwin/twin.hpp"

namespace ambitwin::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitUsage = 2,
};

struct CommandOptions {
  std::string config_path;
  std::string data_path;
  std::string model_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string input;  ///< predict: one row of comma- or space-separated values
};

namespace detail {

inline void write_text(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) {
    throw FormatError("cannot write " + path.string());
  }
}

inline RunConfig resolve_config(const CommandOptions &opt) {
  if (opt.config_path.empty()) {
    throw ConfigError("--config is required");
  }
  RunConfig c = load_config(opt.config_path);
  if (opt.seed) {
    c.seed = *opt.seed;
  }
  return c;
}

inline void require(const std::string &value, const char *flag) {
  if (value.empty()) {
    throw ConfigError(std::string(flag) + " is required for this command");
  }
}

/// Network-space training pairs plus the same cases in original units.
struct LoadedData {
  std::vector<Sample> train;
  std::vector<metrics::LabeledInput> eval;
  std::vector<int> train_labels;  ///< credit only
  std::vector<metrics::LabeledInput> train_cases;
};

inline std::vector<data::CreditRecord> read_credit(const RunConfig &c, const std::string &path) {
  if (c.credit.format == CreditFormat::Numeric) {
    return data::load_credit(path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open credit file " + path);
  }
  return data::convert_symbolic_credit(in);
}

inline LoadedData load_data(const RunConfig &c, const std::string &path) {
  LoadedData d;
  const TargetCodec codec = c.codec();
  switch (c.kind) {
  case ExperimentKind::Straws: {
    const auto events = straw::read_events_csv(path);
    for (const auto &ev : events) {
      if (ev.inputs.size() != c.input_width()) {
        throw ContractError("dataset has " + std::to_string(ev.inputs.size()) + " straws, config expects " +
                            std::to_string(c.input_width()));
      }
    }
    d.train = straw::to_samples(events, codec);
    for (const auto &ev : events) {
      d.eval.push_back({ev.inputs, ev.target_angle_deg});
    }
    d.train_cases = d.eval;
    break;
  }
  case ExperimentKind::Synthetic: {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw FormatError("cannot open sample file " + path);
    }
    const auto samples = data::read_samples_csv(in);
    for (const auto &s : samples) {
      d.train.push_back({s.input, codec.encode(s.target)});
      d.eval.push_back({s.input, s.target});
    }
    d.train_cases = d.eval;
    break;
  }
  case ExperimentKind::Credit: {
    const auto ds = data::normalize(read_credit(c, path));
    const auto parts = data::split(ds, c.credit.test_fraction, c.split_seed());
    const auto train = data::subset(ds, parts.train);
    d.train_labels = data::labels_of(train);
    for (const auto &r : train.records) {
      std::vector<double> in(r.attributes.begin(), r.attributes.end());
      d.train.push_back({in, codec.encode(r.label)});
      d.train_cases.push_back({in, static_cast<double>(r.label)});
    }
    std::vector<std::size_t> eval_idx;
    switch (c.credit.evaluate) {
    case EvalSubset::Test:
      eval_idx = parts.test;
      break;
    case EvalSubset::Train:
      eval_idx = parts.train;
      break;
    case EvalSubset::All:
      eval_idx.resize(ds.size());
      for (std::size_t i = 0; i < ds.size(); ++i) {
        eval_idx[i] = i;
      }
      break;
    }
    for (std::size_t i : eval_idx) {
      const auto &r = ds.records[i];
      d.eval.push_back({{r.attributes.begin(), r.attributes.end()}, static_cast<double>(r.label)});
    }
    break;
  }
  }
  for (const auto &s : d.train) {
    if (!(s.target >= 0.0 && s.target <= 1.0)) {
      throw ContractError("a target falls outside the codec range");
    }
  }
  return d;
}

inline double median(std::vector<double> v) {
  if (v.empty()) {
    return std::nan("");
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Extra summary lines for 0/1 targets: value >= 0.5 is read as "good".
inline std::string classification_summary(const metrics::EvaluationReport &r, const TwinModel &model,
                                          const std::vector<metrics::LabeledInput> &train_cases) {
  std::vector<double> delta_wrong;
  std::vector<double> delta_right;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const bool right = (r.values[i] >= 0.5) == (r.truths[i] >= 0.5);
    (right ? delta_right : delta_wrong).push_back(r.deltas[i]);
  }
  std::size_t train_right = 0;
  for (const auto &tc : train_cases) {
    train_right += (predict_band(model, tc.input).value >= 0.5) == (tc.truth >= 0.5) ? 1 : 0;
  }
  std::ostringstream s;
  s << "classification_accuracy = "
    << text::format_double(static_cast<double>(delta_right.size()) / static_cast<double>(r.size()), 12) << '\n';
  s << "train_classification_accuracy = "
    << (train_cases.empty()
            ? std::string("undefined")
            : text::format_double(static_cast<double>(train_right) / static_cast<double>(train_cases.size()), 12))
    << '\n';
  s << "misclassified = " << delta_wrong.size() << '\n';
  s << "median_delta_misclassified = " << text::format_double(median(delta_wrong), 12) << '\n';
  s << "median_delta_correct = " << text::format_double(median(delta_right), 12) << '\n';
  return s.str();
}

} // namespace detail

/// Writes dataset.csv and manifest.json into --out.
inline int cmd_gen(const CommandOptions &opt) {
  const RunConfig c = detail::resolve_config(opt);
  detail::require(opt.out_dir, "--out");
  if (c.kind == ExperimentKind::Credit) {
    throw ConfigError("gen supports kinds 'straws' and 'synthetic'; use convert-credit for credit files");
  }
  std::ostringstream csv;
  std::size_t rows = 0;
  if (c.kind == ExperimentKind::Straws) {
    const auto events = straw::generate_dataset(c.straws.geometry, c.straws.n_events, c.gen_seed(),
                                                c.straws.min_straws, c.straws.angle_max);
    straw::write_events_csv(csv, events, c.straws.geometry.total_straws());
    rows = events.size();
  } else {
    const auto samples = data::gen_synthetic(c.synthetic.spec, c.synthetic.n_samples, c.gen_seed());
    data::write_samples_csv(csv, samples);
    rows = samples.size();
  }
  const std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "dataset.csv", csv.str());
  detail::write_text(dir / "manifest.json", manifest_for(c, rows).dump(2) + "\n");
  return kExitOk;
}

/// Writes the twin model (to --model, or <out>/model.twin) and
/// <out>/train_log.csv.
inline int cmd_train(const CommandOptions &opt, std::ostream &diag = std::cerr) {
  const RunConfig c = detail::resolve_config(opt);
  detail::require(opt.data_path, "--data");
  detail::require(opt.out_dir, "--out");
  const auto d = detail::load_data(c, opt.data_path);
  if (d.train.empty()) {
    throw ContractError("training set is empty");
  }
  const TrainPlan plan = c.plan();
  for (const auto &w : plan.warnings()) {
    diag << "warning: " << w << '\n';
  }
  SamplerFactory sampler;
  if (c.train.sampler == SamplerKind::Balanced) {
    if (c.kind != ExperimentKind::Credit) {
      throw ConfigError("the balanced sampler needs labelled credit data");
    }
    sampler = data::balanced_sampler_factory(d.train_labels);
  } else {
    sampler = uniform_sampler(d.train.size());
  }

  std::ostringstream log;
  log << "phase,iteration,eta,mean_error\n";
  TrainObserver observer;
  observer.interval = 1000;
  observer.on_progress = [&log](const TrainProgress &p) {
    log << p.phase << ',' << p.iteration << ',' << text::format_double(p.eta, 12) << ','
        << text::format_double(p.mean_error, 12) << '\n';
  };
  const TwinModel model = train_twin(plan, d.train, sampler, c.arch_a(), c.arch_b(), c.mode, c.codec(), &observer);

  const std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  const std::string model_path = opt.model_path.empty() ? (dir / "model.twin").string() : opt.model_path;
  save_twin(model, model_path);
  detail::write_text(dir / "train_log.csv", log.str());
  return kExitOk;
}

/// Writes the evaluation report files into --out.
inline int cmd_eval(const CommandOptions &opt) {
  const RunConfig c = detail::resolve_config(opt);
  detail::require(opt.model_path, "--model");
  detail::require(opt.data_path, "--data");
  detail::require(opt.out_dir, "--out");
  const TwinModel model = load_twin(opt.model_path);
  if (model.input_size() != c.input_width()) {
    throw ContractError("model expects " + std::to_string(model.input_size()) + " inputs, config describes " +
                        std::to_string(c.input_width()));
  }
  const auto d = detail::load_data(c, opt.data_path);
  if (d.eval.empty()) {
    throw ContractError("no cases to evaluate");
  }
  const auto report = metrics::evaluate_twin(model, d.eval);
  metrics::write_report(opt.out_dir, report, c.histogram, c.flags);
  if (c.kind == ExperimentKind::Credit) {
    std::ofstream out(std::filesystem::path(opt.out_dir) / "summary.txt", std::ios::binary | std::ios::app);
    out << detail::classification_summary(report, model, d.train_cases);
    if (!out) {
      throw FormatError("cannot append to summary.txt");
    }
  }
  return kExitOk;
}

inline std::vector<double> parse_row(const std::string &row) {
  std::string normalized = row;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::vector<double> values;
  for (auto tok : text::split_ws(normalized)) {
    auto v = text::parse_double(tok);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError("input value '" + std::string(tok) + "' is not a number");
    }
    values.push_back(*v);
  }
  return values;
}

/// Prints "value delta" in original units with six decimals. Inputs are in
/// network space: drift values for straws, normalized attributes for credit.
inline int cmd_predict(const CommandOptions &opt, std::istream &in, std::ostream &out) {
  detail::require(opt.model_path, "--model");
  std::string row = opt.input;
  if (row.empty() && !std::getline(in, row)) {
    throw ConfigError("no input row given (use --input or stdin)");
  }
  const auto values = parse_row(row);
  const TwinModel model = load_twin(opt.model_path);
  const PredictionBand band = predict_band(model, values);
  out << text::format_fixed(band.value, 6) << ' ' << text::format_fixed(band.delta, 6) << '\n';
  return kExitOk;
}

/// Converts the symbolic credit file to the 24-integer layout.
inline int cmd_convert_credit(const CommandOptions &opt) {
  detail::require(opt.data_path, "--data");
  detail::require(opt.out_dir, "--out");
  std::ifstream in(opt.data_path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + opt.data_path);
  }
  const auto records = data::convert_symbolic_credit(in);
  std::ostringstream buf;
  data::write_credit(buf, records);
  const std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "german.data-numeric", buf.str());
  return kExitOk;
}

/// Maps exceptions onto the tool's exit codes.
template <class Fn>
int run_guarded(Fn &&fn, std::ostream &diag) {
  try {
    return fn();
  } catch (const ConfigError &e) {
    diag << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractError &e) {
    diag << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    diag << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

} // namespace ambitwin::cli
