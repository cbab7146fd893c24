#pragma once

// Monte Carlo straw-tube chamber: straight tracks through layers of straws,
// each straw reporting how close the track came to its wire.
//
// Coordinates: x runs across the chamber, z along the beam. Layer k sits at
// z = r (2k + 1); straw j of layer k has its wire at x = r (2j + 1), plus r
// for odd layers when the half-cell shift is enabled. A track is the line
// x = x0 + z tan(angle).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ambitwin/errors.hpp"
#include "ambitwin/mlp.hpp"
#include "ambitwin/random.hpp"
#include "ambitwin/text_io.hpp"
#include "ambitwin/twin.hpp"

namespace ambitwin::straw {

struct Point {
  double x = 0.0;
  double z = 0.0;
};

struct ChamberGeometry {
  std::size_t n_layers = 2;
  std::size_t straws_per_layer = 7;
  double radius = 0.5;
  bool half_cell_shift = true;  ///< offset odd layers by one radius

  void validate() const {
    if (n_layers == 0 || straws_per_layer == 0) {
      throw ConfigError("chamber needs at least one layer and one straw per layer");
    }
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw ConfigError("straw radius must be positive");
    }
  }

  std::size_t total_straws() const { return n_layers * straws_per_layer; }

  /// Straws are numbered layer-major: index = layer * straws_per_layer + j.
  Point wire(std::size_t layer, std::size_t j) const {
    const double shift = (half_cell_shift && layer % 2 == 1) ? radius : 0.0;
    return {radius * static_cast<double>(2 * j + 1) + shift, radius * static_cast<double>(2 * layer + 1)};
  }

  Point wire(std::size_t index) const { return wire(index / straws_per_layer, index % straws_per_layer); }

  double width() const {
    const bool shifted = half_cell_shift && n_layers > 1;
    return 2.0 * radius * static_cast<double>(straws_per_layer) + (shifted ? radius : 0.0);
  }

  double height() const { return 2.0 * radius * static_cast<double>(n_layers); }
};

struct Track {
  double angle_deg = 0.0;
  double x0 = 0.0;  ///< x at z = 0
};

struct Event {
  std::vector<double> inputs;  ///< per straw: 0 if missed, else (r - d) / r
  double target_angle_deg = 0.0;
  std::size_t n_hits = 0;
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Perpendicular distance from the track line to a wire.
inline double distance_to_wire(const Track &track, const Point &wire) {
  const double a = deg_to_rad(track.angle_deg);
  return std::abs(wire.x - track.x0 - wire.z * std::tan(a)) * std::cos(a);
}

/// A straw is hit when d < r strictly; tangent tracks count as misses.
inline Event encode_event(const ChamberGeometry &geometry, const Track &track) {
  Event ev;
  ev.inputs.assign(geometry.total_straws(), 0.0);
  ev.target_angle_deg = track.angle_deg;
  const double a = deg_to_rad(track.angle_deg);
  const double slope = std::tan(a);
  const double c = std::cos(a);
  for (std::size_t i = 0; i < ev.inputs.size(); ++i) {
    const Point w = geometry.wire(i);
    const double d = std::abs(w.x - track.x0 - w.z * slope) * c;
    if (d < geometry.radius) {
      ev.inputs[i] = (geometry.radius - d) / geometry.radius;
      ++ev.n_hits;
    }
  }
  return ev;
}

/// Track parameters for candidate `index` of a generation run; each candidate
/// has its own derived seed so any subset can be regenerated independently.
inline Track candidate_track(const ChamberGeometry &geometry, std::uint64_t seed, std::uint64_t index,
                             double angle_max) {
  SplitMix64 rng(derive_seed(seed, index));
  const double cell = 2.0 * geometry.radius;
  Track t;
  t.angle_deg = rng.uniform(-angle_max, angle_max);
  t.x0 = rng.uniform(-cell, geometry.width() + cell);
  return t;
}

inline void validate_angle_max(double angle_max) {
  if (!(angle_max > 0.0 && angle_max < 90.0)) {
    throw ConfigError("angle_max must lie in (0, 90) degrees");
  }
}

/// Maximum run of consecutive rejected candidates before giving up.
inline constexpr std::uint64_t kMaxConsecutiveRejections = 1'000'000;

/// Rejection-samples tracks until `n` of them hit at least `min_straws` straws.
inline std::vector<Event> generate_dataset(const ChamberGeometry &geometry, std::size_t n, std::uint64_t seed,
                                           std::size_t min_straws, double angle_max = 45.0) {
  geometry.validate();
  validate_angle_max(angle_max);
  if (min_straws > geometry.total_straws()) {
    throw GenerationError("min_straws " + std::to_string(min_straws) + " exceeds the " +
                          std::to_string(geometry.total_straws()) + " straws in the chamber");
  }
  std::vector<Event> events;
  events.reserve(n);
  std::uint64_t candidate = 0;
  std::uint64_t rejected_in_a_row = 0;
  while (events.size() < n) {
    Event ev = encode_event(geometry, candidate_track(geometry, seed, candidate++, angle_max));
    if (ev.n_hits >= min_straws) {
      events.push_back(std::move(ev));
      rejected_in_a_row = 0;
    } else if (++rejected_in_a_row >= kMaxConsecutiveRejections) {
      throw GenerationError("no track passed the min_straws=" + std::to_string(min_straws) + " cut in " +
                            std::to_string(kMaxConsecutiveRejections) + " consecutive attempts");
    }
  }
  return events;
}

/// Fraction of `trials` candidate tracks passing the cut.
inline double acceptance_rate(const ChamberGeometry &geometry, std::size_t min_straws, double angle_max,
                              std::uint64_t trials, std::uint64_t seed) {
  geometry.validate();
  validate_angle_max(angle_max);
  std::uint64_t pass = 0;
  for (std::uint64_t k = 0; k < trials; ++k) {
    if (encode_event(geometry, candidate_track(geometry, seed, k, angle_max)).n_hits >= min_straws) {
      ++pass;
    }
  }
  return trials == 0 ? 0.0 : static_cast<double>(pass) / static_cast<double>(trials);
}

/// Degrees in [-angle_max, +angle_max] onto [0, 1].
inline TargetCodec angle_codec(double angle_max) {
  validate_angle_max(angle_max);
  return {-angle_max, angle_max};
}

inline std::vector<Sample> to_samples(std::span<const Event> events, const TargetCodec &codec) {
  std::vector<Sample> out;
  out.reserve(events.size());
  for (const auto &ev : events) {
    out.push_back({ev.inputs, codec.encode(ev.target_angle_deg)});
  }
  return out;
}

// Event CSV: header "s0,...,s{N-1},angle_deg,n_hits", one event per row,
// reals with 17 significant digits.

inline void write_events_csv(std::ostream &out, std::span<const Event> events, std::size_t n_straws) {
  for (std::size_t i = 0; i < n_straws; ++i) {
    out << 's' << i << ',';
  }
  out << "angle_deg,n_hits\n";
  for (const auto &ev : events) {
    if (ev.inputs.size() != n_straws) {
      throw ContractError("event width does not match the chamber");
    }
    for (double v : ev.inputs) {
      out << text::format_double(v) << ',';
    }
    out << text::format_double(ev.target_angle_deg) << ',' << ev.n_hits << '\n';
  }
}

inline std::vector<Event> read_events_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("event file is empty");
  }
  const auto header = text::split_char(line, ',');
  if (header.size() < 3 || header[header.size() - 2] != "angle_deg" || header.back() != "n_hits") {
    throw FormatError("event file header must end with angle_deg,n_hits");
  }
  const std::size_t n_straws = header.size() - 2;
  for (std::size_t i = 0; i < n_straws; ++i) {
    if (header[i] != "s" + std::to_string(i)) {
      throw FormatError("event file header column " + std::to_string(i) + " should be s" + std::to_string(i));
    }
  }
  std::vector<Event> events;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto cells = text::split_char(line, ',');
    if (cells.size() != header.size()) {
      throw FormatError("event row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " columns, expected " + std::to_string(header.size()));
    }
    Event ev;
    ev.inputs.reserve(n_straws);
    for (std::size_t i = 0; i < n_straws; ++i) {
      auto v = text::parse_double(cells[i]);
      if (!v || !(*v >= 0.0 && *v <= 1.0)) {
        throw FormatError("event row " + std::to_string(row) + ": bad straw value '" + std::string(cells[i]) + "'");
      }
      ev.inputs.push_back(*v);
    }
    auto angle = text::parse_double(cells[n_straws]);
    auto hits = text::parse_int(cells[n_straws + 1]);
    if (!angle || !std::isfinite(*angle) || !hits || *hits < 0) {
      throw FormatError("event row " + std::to_string(row) + ": bad angle or hit count");
    }
    ev.target_angle_deg = *angle;
    ev.n_hits = static_cast<std::size_t>(*hits);
    events.push_back(std::move(ev));
  }
  return events;
}

inline void write_events_csv(const std::string &path, std::span<const Event> events, std::size_t n_straws) {
  std::ostringstream buf;
  write_events_csv(buf, events, n_straws);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << buf.str())) {
    throw FormatError("cannot write event file " + path);
  }
}

inline std::vector<Event> read_events_csv(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open event file " + path);
  }
  return read_events_csv(in);
}

} // namespace ambitwin::straw
