#pragma once

// Two coupled networks: a predictor trained on the targets and, after it is
// frozen, an uncertainty network trained on the predictor's residual
// magnitudes. Together they yield a band value +/- delta per input.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ambitwin/errors.hpp"
#include "ambitwin/mlp.hpp"
#include "ambitwin/random.hpp"
#include "ambitwin/text_io.hpp"

namespace ambitwin {

enum class UncertaintyMode {
  AbsError,  ///< uncertainty net learns E|f - y|
  SqError,   ///< uncertainty net learns E(f - y)^2
};

inline std::string_view to_string(UncertaintyMode mode) {
  return mode == UncertaintyMode::AbsError ? "abs_error" : "sq_error";
}

inline UncertaintyMode parse_mode(std::string_view text) {
  if (text == "abs_error" || text == "ABS_ERROR") {
    return UncertaintyMode::AbsError;
  }
  if (text == "sq_error" || text == "SQ_ERROR") {
    return UncertaintyMode::SqError;
  }
  throw ConfigError("unknown uncertainty mode '" + std::string(text) + "'");
}

/// Affine map of [y_min, y_max] onto the sigmoid range [0, 1].
struct TargetCodec {
  double y_min = 0.0;
  double y_max = 1.0;

  void validate() const {
    if (!(y_min < y_max) || !std::isfinite(y_min) || !std::isfinite(y_max)) {
      throw ConfigError("target codec needs finite y_min < y_max");
    }
  }

  double span() const { return y_max - y_min; }
  double encode(double y) const { return (y - y_min) / span(); }
  double decode(double u) const { return y_min + u * span(); }

  friend bool operator==(const TargetCodec &, const TargetCodec &) = default;
};

struct TrainPlan {
  std::uint64_t phase1_iters = 200000;
  std::uint64_t phase2_iters = 200000;
  LearningSchedule schedule_a;
  LearningSchedule schedule_b{0.1, 0.01, 1.0e5};
  std::uint64_t seed = 1;
  /// Phase 2 draws the same index sequence as phase 1 instead of a fresh one.
  bool reuse_phase1_order = false;

  void validate() const {
    if (phase1_iters == 0 || phase2_iters == 0) {
      throw ConfigError("both training phases need a positive iteration count");
    }
    schedule_a.validate();
    schedule_b.validate();
  }

  /// Soft checks; the uncertainty net should learn more slowly than the predictor.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (schedule_b.eta0 > schedule_a.eta_min) {
      out.push_back("uncertainty-net eta0 (" + text::format_double(schedule_b.eta0, 6) +
                    ") exceeds predictor eta_min (" + text::format_double(schedule_a.eta_min, 6) +
                    "); a slower second network is advised");
    }
    return out;
  }
};

struct TwinModel {
  Mlp net_a;  ///< predictor
  Mlp net_b;  ///< uncertainty
  TargetCodec codec;
  UncertaintyMode mode = UncertaintyMode::AbsError;

  std::size_t input_size() const { return net_a.input_size(); }

  friend bool operator==(const TwinModel &, const TwinModel &) = default;
};

/// value +/- delta in original target units.
struct PredictionBand {
  double value = 0.0;
  double delta = 0.0;
};

/// Produces one sample index per call.
using IndexStream = std::function<std::size_t()>;
/// Builds an index stream from a seed.
using SamplerFactory = std::function<IndexStream(std::uint64_t seed)>;

/// i.i.d. uniform indices over [0, n).
inline SamplerFactory uniform_sampler(std::size_t n) {
  if (n == 0) {
    throw SamplerError("cannot sample from an empty source");
  }
  return [n](std::uint64_t seed) -> IndexStream {
    return [n, rng = Rng(seed)]() mutable { return static_cast<std::size_t>(rng.below(n)); };
  };
}

/// Emitted every `TrainObserver::interval` steps of each phase.
struct TrainProgress {
  int phase = 1;             ///< 1 = predictor, 2 = uncertainty
  std::uint64_t iteration = 0;  ///< steps completed in this phase
  double eta = 0.0;
  double mean_error = 0.0;   ///< mean squared error over the last interval
};

struct TrainObserver {
  std::uint64_t interval = 1000;
  std::function<void(const TrainProgress &)> on_progress;
};

namespace detail {

template <class StepFn>
void run_phase(int phase, std::uint64_t iters, const LearningSchedule &schedule, const TrainObserver *observer,
               StepFn &&step) {
  double acc = 0.0;
  std::uint64_t count = 0;
  for (std::uint64_t t = 0; t < iters; ++t) {
    const double eta = lr_at(schedule, t);
    acc += step(eta);
    ++count;
    if (observer && observer->on_progress && observer->interval > 0 &&
        ((t + 1) % observer->interval == 0 || t + 1 == iters)) {
      observer->on_progress({phase, t + 1, eta, acc / static_cast<double>(count)});
      acc = 0.0;
      count = 0;
    }
  }
}

} // namespace detail

/// Phase 1 trains net_a on the (already encoded) targets. Phase 2 keeps net_a
/// frozen and trains net_b on |f_a(x) - y| or (f_a(x) - y)^2, computed on the
/// fly for every drawn sample.
inline TwinModel train_twin(const TrainPlan &plan, std::span<const Sample> samples, const SamplerFactory &sampler,
                            const NetConfig &arch_a, const NetConfig &arch_b, UncertaintyMode mode,
                            const TargetCodec &codec, const TrainObserver *observer = nullptr) {
  plan.validate();
  codec.validate();
  arch_a.validate();
  arch_b.validate();
  if (samples.empty()) {
    throw ContractError("training needs at least one sample");
  }
  if (arch_a.layer_sizes.front() != arch_b.layer_sizes.front()) {
    throw ContractError("predictor and uncertainty networks must share the input width");
  }
  if (arch_a.layer_sizes.back() != 1 || arch_b.layer_sizes.back() != 1) {
    throw ContractError("both networks need a single output");
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].input.size() != arch_a.layer_sizes.front()) {
      throw ContractError("sample " + std::to_string(k) + " has width " + std::to_string(samples[k].input.size()) +
                          ", networks expect " + std::to_string(arch_a.layer_sizes.front()));
    }
  }
  if (!sampler) {
    throw ContractError("no index sampler given");
  }

  TwinModel model{Mlp::init(arch_a), Mlp::init(arch_b), codec, mode};

  const std::uint64_t seed_a = derive_seed(plan.seed, 1);
  const std::uint64_t seed_b = plan.reuse_phase1_order ? seed_a : derive_seed(plan.seed, 2);

  auto next_a = sampler(seed_a);
  detail::run_phase(1, plan.phase1_iters, plan.schedule_a, observer, [&](double eta) {
    return backprop_step(model.net_a, samples[next_a()], eta);
  });

  const Mlp &frozen = model.net_a;
  auto next_b = sampler(seed_b);
  Sample residual;
  detail::run_phase(2, plan.phase2_iters, plan.schedule_b, observer, [&](double eta) {
    const Sample &s = samples[next_b()];
    const double r = predict(frozen, s.input) - s.target;
    residual.input.assign(s.input.begin(), s.input.end());
    residual.target = mode == UncertaintyMode::AbsError ? std::abs(r) : r * r;
    return backprop_step(model.net_b, residual, eta);
  });
  return model;
}

/// Decoded prediction; delta is scaled by the codec span only (residuals are
/// differences, so the offset does not apply).
inline PredictionBand predict_band(const TwinModel &model, std::span<const double> input) {
  const double f = predict(model.net_a, input);
  const double g = predict(model.net_b, input);
  const double spread = model.mode == UncertaintyMode::AbsError ? g : std::sqrt(g);
  return {model.codec.decode(f), spread * model.codec.span()};
}

/// Signed distance from the truth to the nearest band edge; 0 inside the band.
inline double effective_error(const PredictionBand &band, double y_true) {
  const double err = y_true - band.value;
  const double excess = std::abs(err) - band.delta;
  if (!(excess > 0.0)) {
    return 0.0;
  }
  return err > 0.0 ? excess : -excess;
}

inline bool is_covered(const PredictionBand &band, double y_true) {
  return std::abs(y_true - band.value) <= band.delta;
}

// Twin model file:
//
//   ambitwin-twin 1
//   mode <abs_error|sq_error>
//   codec <y_min> <y_max>
//   net_a
//   <mlp payload>
//   net_b
//   <mlp payload>

inline void save_twin(const TwinModel &model, std::ostream &out) {
  out << "ambitwin-twin 1\n";
  out << "mode " << to_string(model.mode) << '\n';
  out << "codec " << text::format_double(model.codec.y_min) << ' ' << text::format_double(model.codec.y_max) << '\n';
  out << "net_a\n";
  save_mlp(model.net_a, out);
  out << "net_b\n";
  save_mlp(model.net_b, out);
}

inline TwinModel load_twin(std::istream &in) {
  auto expect_line = [&in](const char *what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw FormatError(std::string("twin model file truncated before ") + what);
    }
    return line;
  };
  {
    const auto header = text::split_ws(expect_line("header"));
    if (header.size() != 2 || header[0] != "ambitwin-twin") {
      throw FormatError("not a twin model file");
    }
    if (header[1] != "1") {
      throw FormatError("unsupported twin model version " + std::string(header[1]));
    }
  }
  TwinModel model;
  {
    const auto tokens = text::split_ws(expect_line("mode"));
    if (tokens.size() != 2 || tokens[0] != "mode") {
      throw FormatError("expected 'mode <abs_error|sq_error>'");
    }
    try {
      model.mode = parse_mode(tokens[1]);
    } catch (const ConfigError &e) {
      throw FormatError(e.what());
    }
  }
  {
    const auto tokens = text::split_ws(expect_line("codec"));
    if (tokens.size() != 3 || tokens[0] != "codec") {
      throw FormatError("expected 'codec <y_min> <y_max>'");
    }
    auto lo = text::parse_double(tokens[1]);
    auto hi = text::parse_double(tokens[2]);
    if (!lo || !hi || !(*lo < *hi)) {
      throw FormatError("invalid codec range");
    }
    model.codec = {*lo, *hi};
  }
  if (text::split_ws(expect_line("net_a")) != std::vector<std::string_view>{"net_a"}) {
    throw FormatError("expected 'net_a'");
  }
  model.net_a = load_mlp(in);
  if (text::split_ws(expect_line("net_b")) != std::vector<std::string_view>{"net_b"}) {
    throw FormatError("expected 'net_b'");
  }
  model.net_b = load_mlp(in);
  if (model.net_a.input_size() != model.net_b.input_size()) {
    throw FormatError("twin networks disagree on input width");
  }
  if (model.net_a.output_size() != 1 || model.net_b.output_size() != 1) {
    throw FormatError("twin networks must have a single output");
  }
  return model;
}

inline void save_twin(const TwinModel &model, const std::string &path) {
  std::ostringstream buf;
  save_twin(model, buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << buf.str())) {
    throw FormatError("cannot write twin model file " + path);
  }
}

inline TwinModel load_twin(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open twin model file " + path);
  }
  return load_twin(in);
}

} // namespace ambitwin
