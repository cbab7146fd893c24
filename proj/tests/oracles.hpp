#pragma once

// Test-only reference computations. These deliberately avoid the library's
// code paths: plain scalar loops, long double where cancellation matters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ambitwin/mlp.hpp"

namespace oracle {

/// Forward pass of a copy of the network in long double, with one parameter
/// perturbed by `bump`. `param` indexes weights then bias, layer by layer.
inline long double output_with_bump(const ambitwin::Mlp &mlp, std::span<const double> input, std::size_t param,
                                    long double bump) {
  std::vector<long double> act(input.begin(), input.end());
  std::size_t offset = 0;
  for (const auto &layer : mlp.layers()) {
    std::vector<long double> next(layer.fan_out);
    for (std::size_t j = 0; j < layer.fan_out; ++j) {
      long double z = layer.bias[j];
      if (param == offset + layer.weights.size() + j) {
        z += bump;
      }
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        long double w = layer.weights[i * layer.fan_out + j];
        if (param == offset + i * layer.fan_out + j) {
          w += bump;
        }
        z += w * act[i];
      }
      next[j] = 1.0L / (1.0L + std::exp(-z));
    }
    offset += layer.weights.size() + layer.bias.size();
    act = std::move(next);
  }
  return act.front();
}

/// Central difference of e = (f - y)^2 with step h, per parameter.
inline std::vector<double> finite_difference_gradient(const ambitwin::Mlp &mlp, const ambitwin::Sample &s,
                                                      double h = 1e-5) {
  std::vector<double> grad(mlp.parameter_count());
  const long double y = s.target;
  for (std::size_t p = 0; p < grad.size(); ++p) {
    const long double fp = output_with_bump(mlp, s.input, p, h);
    const long double fm = output_with_bump(mlp, s.input, p, -static_cast<long double>(h));
    const long double ep = (fp - y) * (fp - y);
    const long double em = (fm - y) * (fm - y);
    grad[p] = static_cast<double>((ep - em) / (2.0L * h));
  }
  return grad;
}

/// Flattens a gradient in the same parameter order.
inline std::vector<double> flatten(std::span<const ambitwin::DenseLayer> layers) {
  std::vector<double> out;
  for (const auto &l : layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

/// Minimum distance from `wire` to points sampled along the track line.
inline double sampled_line_distance(double angle_deg, double x0, double wx, double wz, std::size_t n_points,
                                    double z_lo, double z_hi) {
  const double slope = std::tan(angle_deg * 3.14159265358979323846 / 180.0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_points; ++k) {
    const double z = z_lo + (z_hi - z_lo) * static_cast<double>(k) / static_cast<double>(n_points - 1);
    const double x = x0 + z * slope;
    best = std::min(best, std::hypot(x - wx, z - wz));
  }
  return best;
}

} // namespace oracle
