#pragma once

// Feedforward network with logistic-sigmoid units on every layer, trained by
// plain single-sample gradient descent on the squared error (f - y)^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ambitwin/errors.hpp"
#include "ambitwin/random.hpp"
#include "ambitwin/text_io.hpp"

namespace ambitwin {

struct NetConfig {
  std::vector<std::size_t> layer_sizes;  ///< input, hidden..., output
  double init_half_width = 0.5;          ///< weights start uniform in [-w, +w]
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_sizes.size() < 2) {
      throw ConfigError("network needs at least an input and an output layer");
    }
    for (std::size_t n : layer_sizes) {
      if (n == 0) {
        throw ConfigError("layer sizes must be positive");
      }
    }
    if (!(init_half_width >= 0.0) || !std::isfinite(init_half_width)) {
      throw ConfigError("init_half_width must be a finite nonnegative number");
    }
  }
};

/// One fully connected layer. `weights` is row-major with fan_in rows and
/// fan_out columns, so unit j of the layer sees sum_i weights[i][j] * a[i].
struct DenseLayer {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : fan_in(in), fan_out(out), weights(in * out, 0.0), bias(out, 0.0) {}

  double &w(std::size_t i, std::size_t j) { return weights[i * fan_out + j]; }
  double w(std::size_t i, std::size_t j) const { return weights[i * fan_out + j]; }

  friend bool operator==(const DenseLayer &, const DenseLayer &) = default;
};

/// Sigmoid with the pre-activation clamped to [-500, 500].
inline double sigmoid(double z) noexcept {
  z = std::clamp(z, -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(-z));
}

class Mlp {
public:
  Mlp() = default;

  /// Builds a network from explicit layers; adjacent layers must chain.
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
      throw ConfigError("network needs at least one layer");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto &layer = layers_[l];
      if (layer.fan_in == 0 || layer.fan_out == 0 ||
          layer.weights.size() != layer.fan_in * layer.fan_out ||
          layer.bias.size() != layer.fan_out) {
        throw ConfigError("layer " + std::to_string(l) + " has inconsistent dimensions");
      }
      if (l > 0 && layers_[l - 1].fan_out != layer.fan_in) {
        throw ConfigError("layer " + std::to_string(l) + " does not chain with its predecessor");
      }
    }
  }

  /// Weights and biases i.i.d. uniform in [-init_half_width, +init_half_width].
  static Mlp init(const NetConfig &config) {
    config.validate();
    Rng rng(config.seed);
    const double hw = config.init_half_width;
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
      DenseLayer layer(config.layer_sizes[l], config.layer_sizes[l + 1]);
      for (double &w : layer.weights) {
        w = hw == 0.0 ? 0.0 : rng.uniform(-hw, hw);
      }
      for (double &b : layer.bias) {
        b = hw == 0.0 ? 0.0 : rng.uniform(-hw, hw);
      }
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  std::span<const DenseLayer> layers() const { return layers_; }
  std::span<DenseLayer> layers() { return layers_; }

  std::size_t input_size() const { return layers_.front().fan_in; }
  std::size_t output_size() const { return layers_.back().fan_out; }

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes{input_size()};
    for (const auto &layer : layers_) {
      sizes.push_back(layer.fan_out);
    }
    return sizes;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto &layer : layers_) {
      n += layer.weights.size() + layer.bias.size();
    }
    return n;
  }

  friend bool operator==(const Mlp &, const Mlp &) = default;

private:
  std::vector<DenseLayer> layers_;
};

inline Mlp init_mlp(const NetConfig &config) { return Mlp::init(config); }

/// A training pair; `target` lives in the sigmoid range [0, 1].
struct Sample {
  std::vector<double> input;
  double target = 0.0;
};

namespace detail {

inline void require_width(const Mlp &mlp, std::size_t width) {
  if (width != mlp.input_size()) {
    throw ContractError("input has " + std::to_string(width) + " values, network expects " +
                        std::to_string(mlp.input_size()));
  }
}

inline void propagate(const DenseLayer &layer, std::span<const double> in, std::vector<double> &out) {
  out.assign(layer.bias.begin(), layer.bias.end());
  for (std::size_t i = 0; i < layer.fan_in; ++i) {
    const double a = in[i];
    const double *row = layer.weights.data() + i * layer.fan_out;
    for (std::size_t j = 0; j < layer.fan_out; ++j) {
      out[j] += row[j] * a;
    }
  }
  for (double &z : out) {
    z = sigmoid(z);
  }
}

} // namespace detail

/// Activations of every layer; entry 0 is the input, the last entry the output.
inline std::vector<std::vector<double>> forward(const Mlp &mlp, std::span<const double> input) {
  detail::require_width(mlp, input.size());
  std::vector<std::vector<double>> acts;
  acts.reserve(mlp.layers().size() + 1);
  acts.emplace_back(input.begin(), input.end());
  for (const auto &layer : mlp.layers()) {
    std::vector<double> next;
    detail::propagate(layer, acts.back(), next);
    acts.push_back(std::move(next));
  }
  return acts;
}

/// Output of a single-output network.
inline double predict(const Mlp &mlp, std::span<const double> input) {
  detail::require_width(mlp, input.size());
  if (mlp.output_size() != 1) {
    throw ContractError("predict() needs a single-output network");
  }
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  for (const auto &layer : mlp.layers()) {
    detail::propagate(layer, cur, next);
    std::swap(cur, next);
  }
  return cur.front();
}

/// de/dW and de/db for e = (f - y)^2, same layout as the network's layers.
struct Gradient {
  std::vector<DenseLayer> layers;
  double error = 0.0;
};

namespace detail {

inline void check_sample(const Mlp &mlp, const Sample &sample) {
  require_width(mlp, sample.input.size());
  if (mlp.output_size() != 1) {
    throw ContractError("training needs a single-output network");
  }
  if (!(sample.target >= 0.0 && sample.target <= 1.0)) {
    throw ContractError("sample target must lie in [0, 1]");
  }
}

inline void check_finite(std::span<const double> values, const char *what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite ") + what + " during backpropagation");
    }
  }
}

} // namespace detail

inline Gradient gradient(const Mlp &mlp, const Sample &sample) {
  detail::check_sample(mlp, sample);
  const auto acts = forward(mlp, sample.input);
  const double f = acts.back().front();
  const auto layers = mlp.layers();

  Gradient grad;
  grad.error = (f - sample.target) * (f - sample.target);
  grad.layers.reserve(layers.size());
  for (const auto &layer : layers) {
    grad.layers.emplace_back(layer.fan_in, layer.fan_out);
  }

  std::vector<double> delta{2.0 * (f - sample.target) * f * (1.0 - f)};
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto &layer = layers[l];
    const auto &a = acts[l];
    detail::check_finite(delta, "gradient");
    auto &g = grad.layers[l];
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      for (std::size_t j = 0; j < layer.fan_out; ++j) {
        g.w(i, j) = a[i] * delta[j];
      }
    }
    g.bias = delta;
    if (l > 0) {
      std::vector<double> prev(layer.fan_in, 0.0);
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < layer.fan_out; ++j) {
          s += layer.w(i, j) * delta[j];
        }
        prev[i] = s * a[i] * (1.0 - a[i]);
      }
      delta = std::move(prev);
    }
  }
  return grad;
}

/// One gradient step W <- W - eta * de/dW. Returns the error measured before
/// the update.
inline double backprop_step(Mlp &mlp, const Sample &sample, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ContractError("learning rate must be positive and finite");
  }
  detail::check_sample(mlp, sample);
  const auto layers = mlp.layers();

  // Forward pass, keeping activations.
  std::vector<std::vector<double>> acts(layers.size() + 1);
  acts[0] = sample.input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    detail::propagate(layers[l], acts[l], acts[l + 1]);
  }
  const double f = acts.back().front();
  const double error = (f - sample.target) * (f - sample.target);
  if (!std::isfinite(f)) {
    throw NumericalError("non-finite network output");
  }

  // Backward pass; delta for layer l-1 uses the weights before they move.
  std::vector<double> delta{2.0 * (f - sample.target) * f * (1.0 - f)};
  std::vector<double> prev;
  for (std::size_t l = layers.size(); l-- > 0;) {
    auto &layer = layers[l];
    const auto &a = acts[l];
    detail::check_finite(delta, "gradient");
    if (l > 0) {
      prev.assign(layer.fan_in, 0.0);
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        const double *row = layer.weights.data() + i * layer.fan_out;
        double s = 0.0;
        for (std::size_t j = 0; j < layer.fan_out; ++j) {
          s += row[j] * delta[j];
        }
        prev[i] = s * a[i] * (1.0 - a[i]);
      }
    }
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      double *row = layer.weights.data() + i * layer.fan_out;
      const double step = eta * a[i];
      for (std::size_t j = 0; j < layer.fan_out; ++j) {
        row[j] -= step * delta[j];
      }
    }
    for (std::size_t j = 0; j < layer.fan_out; ++j) {
      layer.bias[j] -= eta * delta[j];
    }
    if (l > 0) {
      std::swap(delta, prev);
    }
  }
  return error;
}

/// Hyperbolic decay towards a positive floor:
///   eta(t) = max(eta_min, eta0 / (1 + t / decay_tau)).
struct LearningSchedule {
  double eta0 = 0.5;
  double eta_min = 0.05;
  double decay_tau = 1.0e5;

  void validate() const {
    if (!(eta_min > 0.0) || !(eta0 >= eta_min) || !std::isfinite(eta0)) {
      throw ConfigError("learning schedule needs 0 < eta_min <= eta0");
    }
    if (!(decay_tau > 0.0) || !std::isfinite(decay_tau)) {
      throw ConfigError("learning schedule needs decay_tau > 0");
    }
  }
};

inline double lr_at(const LearningSchedule &s, std::uint64_t t) {
  return std::max(s.eta_min, s.eta0 / (1.0 + static_cast<double>(t) / s.decay_tau));
}

// Model file grammar (one token group per line, single spaces):
//
//   mlp <n0> <n1> ... <nL>
//   for each layer l = 0 .. L-1:
//     n_l lines of n_{l+1} weights      (row i holds weights from input unit i)
//     1 line of n_{l+1} biases
//
// Numbers are written with 17 significant digits, so loading restores every
// weight bit-exactly.

inline void save_mlp(const Mlp &mlp, std::ostream &out) {
  out << "mlp";
  for (std::size_t n : mlp.layer_sizes()) {
    out << ' ' << n;
  }
  out << '\n';
  auto write_row = [&out](std::span<const double> row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) {
        out << ' ';
      }
      out << text::format_double(row[j]);
    }
    out << '\n';
  };
  for (const auto &layer : mlp.layers()) {
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      write_row(std::span<const double>(layer.weights).subspan(i * layer.fan_out, layer.fan_out));
    }
    write_row(layer.bias);
  }
}

namespace detail {

/// Reads one line of exactly `width` finite numbers.
inline std::vector<double> read_row(std::istream &in, std::size_t width, const std::string &what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("model file truncated while reading " + what);
  }
  const auto tokens = text::split_ws(line);
  if (tokens.size() != width) {
    throw FormatError("dimension mismatch in " + what + ": expected " + std::to_string(width) +
                      " values, found " + std::to_string(tokens.size()));
  }
  std::vector<double> row;
  row.reserve(width);
  for (auto tok : tokens) {
    auto v = text::parse_double(tok);
    if (!v || !std::isfinite(*v)) {
      throw FormatError("bad number '" + std::string(tok) + "' in " + what);
    }
    row.push_back(*v);
  }
  return row;
}

} // namespace detail

inline Mlp load_mlp(std::istream &in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw FormatError("model file is empty");
  }
  const auto tokens = text::split_ws(header);
  if (tokens.size() < 3 || tokens[0] != "mlp") {
    throw FormatError("model header must read 'mlp <n0> <n1> ...'");
  }
  std::vector<std::size_t> sizes;
  for (std::size_t k = 1; k < tokens.size(); ++k) {
    auto v = text::parse_int(tokens[k]);
    if (!v || *v <= 0) {
      throw FormatError("bad layer size '" + std::string(tokens[k]) + "'");
    }
    sizes.push_back(static_cast<std::size_t>(*v));
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer(sizes[l], sizes[l + 1]);
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      auto row = detail::read_row(in, layer.fan_out,
                                  "layer " + std::to_string(l) + " weight row " + std::to_string(i));
      std::copy(row.begin(), row.end(), layer.weights.begin() + static_cast<std::ptrdiff_t>(i * layer.fan_out));
    }
    layer.bias = detail::read_row(in, layer.fan_out, "layer " + std::to_string(l) + " bias");
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

inline void save_mlp(const Mlp &mlp, const std::string &path) {
  std::ostringstream buf;
  save_mlp(mlp, buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << buf.str())) {
    throw FormatError("cannot write model file " + path);
  }
}

inline Mlp load_mlp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open model file " + path);
  }
  return load_mlp(in);
}

} // namespace ambitwin
