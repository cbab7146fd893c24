#pragma once

// Error distributions, tail diagnostics and the per-case report behind the
// prediction-band evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ambitwin/errors.hpp"
#include "ambitwin/text_io.hpp"
#include "ambitwin/twin.hpp"

namespace ambitwin::metrics {

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;

  std::size_t n_bins() const { return counts.size(); }
  double width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double bin_lo(std::size_t i) const { return lo + width() * static_cast<double>(i); }
  double bin_hi(std::size_t i) const { return i + 1 == counts.size() ? hi : lo + width() * static_cast<double>(i + 1); }

  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), underflow + overflow); }
};

/// Bins are [edge_i, edge_{i+1}); the last bin also takes hi itself.
inline Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t n_bins) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi) || n_bins == 0) {
    throw ContractError("histogram needs finite lo < hi and at least one bin");
  }
  Histogram h{lo, hi, std::vector<std::uint64_t>(n_bins, 0), 0, 0};
  const double width = h.width();
  for (double v : values) {
    if (std::isnan(v)) {
      throw ContractError("cannot histogram NaN");
    }
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto bin = static_cast<std::size_t>(std::floor((v - lo) / width));
      ++h.counts[std::min(bin, n_bins - 1)];
    }
  }
  return h;
}

inline double mean(std::span<const double> values) {
  if (values.empty()) {
    throw StatisticError("mean of an empty sample");
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// m4 / m2^2 - 3 with population moments.
inline double excess_kurtosis(std::span<const double> values) {
  if (values.size() < 4) {
    throw StatisticError("kurtosis needs at least four values");
  }
  const double mu = mean(values);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d2 = (v - mu) * (v - mu);
    m2 += d2;
    m4 += d2 * d2;
  }
  const auto n = static_cast<double>(values.size());
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) {
    throw StatisticError("kurtosis undefined for zero variance");
  }
  return m4 / (m2 * m2) - 3.0;
}

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  ///< population
  std::optional<double> excess_kurtosis;
};

inline SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.n = values.size();
  if (values.empty()) {
    return s;
  }
  s.mean = mean(values);
  double m2 = 0.0;
  for (double v : values) {
    m2 += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(m2 / static_cast<double>(values.size()));
  if (values.size() >= 4 && m2 > 0.0) {
    s.excess_kurtosis = excess_kurtosis(values);
  }
  return s;
}

/// 1-based ranks, ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[order[k]] = r;
    }
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of the average ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ContractError("spearman needs equal-length series");
  }
  if (xs.size() < 2) {
    throw StatisticError("spearman needs at least two pairs");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw StatisticError("spearman undefined when all ranks of a series are equal");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Input with its true target in original units.
struct LabeledInput {
  std::vector<double> input;
  double truth = 0.0;
};

struct EvaluationReport {
  std::vector<double> truths;
  std::vector<double> values;     ///< band centre
  std::vector<double> errors;     ///< truth - value
  std::vector<double> deltas;     ///< band half-width
  std::vector<double> effective;  ///< effective_error
  double coverage = 0.0;
  SummaryStats raw_stats;
  SummaryStats effective_stats;
  std::optional<double> spearman_abs_error_delta;

  std::size_t size() const { return errors.size(); }
};

inline EvaluationReport evaluate_twin(const TwinModel &model, std::span<const LabeledInput> cases) {
  if (cases.empty()) {
    throw ContractError("evaluation needs at least one case");
  }
  EvaluationReport r;
  r.truths.reserve(cases.size());
  r.values.reserve(cases.size());
  r.errors.reserve(cases.size());
  r.deltas.reserve(cases.size());
  r.effective.reserve(cases.size());
  std::size_t covered = 0;
  for (const auto &c : cases) {
    const PredictionBand band = predict_band(model, c.input);
    r.truths.push_back(c.truth);
    r.values.push_back(band.value);
    r.errors.push_back(c.truth - band.value);
    r.deltas.push_back(band.delta);
    r.effective.push_back(effective_error(band, c.truth));
    if (is_covered(band, c.truth)) {
      ++covered;
    }
  }
  r.coverage = static_cast<double>(covered) / static_cast<double>(cases.size());
  r.raw_stats = summarize(r.errors);
  r.effective_stats = summarize(r.effective);
  std::vector<double> abs_err(r.errors.size());
  std::transform(r.errors.begin(), r.errors.end(), abs_err.begin(), [](double e) { return std::abs(e); });
  try {
    r.spearman_abs_error_delta = spearman(abs_err, r.deltas);
  } catch (const StatisticError &) {
    r.spearman_abs_error_delta.reset();
  }
  return r;
}

/// Fraction of entries with |v| > threshold.
inline double tail_fraction(std::span<const double> values, double threshold) {
  if (values.empty()) {
    return 0.0;
  }
  const auto n = std::count_if(values.begin(), values.end(), [&](double v) { return std::abs(v) > threshold; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

/// Thresholds for the two failure modes worth counting: a confident
/// prediction that is badly wrong, and a correct one flagged as unreliable.
struct FlagThresholds {
  double small_error = 0.1;
  double large_delta = 0.4;
  double critical_error = 0.5;
  double small_delta = 0.1;
};

struct FlagCounts {
  std::size_t accurate_but_flagged = 0;  ///< |error| <= small_error, delta >= large_delta
  std::size_t critical_unflagged = 0;    ///< |error| >= critical_error, delta <= small_delta
};

inline FlagCounts count_flags(const EvaluationReport &r, const FlagThresholds &t) {
  FlagCounts c;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double e = std::abs(r.errors[i]);
    if (e <= t.small_error && r.deltas[i] >= t.large_delta) {
      ++c.accurate_but_flagged;
    }
    if (e >= t.critical_error && r.deltas[i] <= t.small_delta) {
      ++c.critical_unflagged;
    }
  }
  return c;
}

struct HistogramRange {
  double lo = -45.0;
  double hi = 45.0;
  std::size_t n_bins = 91;
};

inline void write_histogram_csv(std::ostream &out, const Histogram &h) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    out << text::format_double(h.bin_lo(i), 12) << ',' << text::format_double(h.bin_hi(i), 12) << ','
        << h.counts[i] << '\n';
  }
}

namespace detail {

inline std::string optional_number(const std::optional<double> &v) {
  return v ? text::format_double(*v, 12) : std::string("undefined");
}

inline void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) {
    throw FormatError("cannot write " + path.string());
  }
}

} // namespace detail

/// Scalar summary, one "key = value" per line.
inline std::string summary_text(const EvaluationReport &r, const HistogramRange &range, const FlagThresholds &t) {
  const Histogram raw = histogram(r.errors, range.lo, range.hi, range.n_bins);
  const Histogram eff = histogram(r.effective, range.lo, range.hi, range.n_bins);
  const FlagCounts flags = count_flags(r, t);
  std::ostringstream s;
  s << "cases = " << r.size() << '\n';
  s << "coverage = " << text::format_double(r.coverage, 12) << '\n';
  s << "raw_error_mean = " << text::format_double(r.raw_stats.mean, 12) << '\n';
  s << "raw_error_std = " << text::format_double(r.raw_stats.std, 12) << '\n';
  s << "raw_error_excess_kurtosis = " << detail::optional_number(r.raw_stats.excess_kurtosis) << '\n';
  s << "effective_error_mean = " << text::format_double(r.effective_stats.mean, 12) << '\n';
  s << "effective_error_std = " << text::format_double(r.effective_stats.std, 12) << '\n';
  s << "effective_error_excess_kurtosis = " << detail::optional_number(r.effective_stats.excess_kurtosis) << '\n';
  s << "spearman_abs_error_delta = " << detail::optional_number(r.spearman_abs_error_delta) << '\n';
  s << "mean_delta = " << text::format_double(mean(r.deltas), 12) << '\n';
  s << "histogram_range = " << text::format_double(range.lo, 12) << ' ' << text::format_double(range.hi, 12) << ' '
    << range.n_bins << '\n';
  s << "raw_underflow = " << raw.underflow << '\n';
  s << "raw_overflow = " << raw.overflow << '\n';
  s << "effective_underflow = " << eff.underflow << '\n';
  s << "effective_overflow = " << eff.overflow << '\n';
  s << "accurate_but_flagged = " << flags.accurate_but_flagged << " (|error| <= "
    << text::format_double(t.small_error, 6) << ", delta >= " << text::format_double(t.large_delta, 6) << ")\n";
  s << "critical_unflagged = " << flags.critical_unflagged << " (|error| >= "
    << text::format_double(t.critical_error, 6) << ", delta <= " << text::format_double(t.small_delta, 6) << ")\n";
  return s.str();
}

/// Writes errors.csv, deltas.csv, effective.csv, hist_errors.csv,
/// hist_effective.csv and summary.txt into `dir`.
inline void write_report(const std::filesystem::path &dir, const EvaluationReport &r, const HistogramRange &range,
                         const FlagThresholds &t) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream s;
    s << "index,truth,value,error\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
      s << i << ',' << text::format_double(r.truths[i]) << ',' << text::format_double(r.values[i]) << ','
        << text::format_double(r.errors[i]) << '\n';
    }
    detail::write_file(dir / "errors.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "index,abs_error,delta\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
      s << i << ',' << text::format_double(std::abs(r.errors[i])) << ',' << text::format_double(r.deltas[i]) << '\n';
    }
    detail::write_file(dir / "deltas.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "index,error,effective\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
      s << i << ',' << text::format_double(r.errors[i]) << ',' << text::format_double(r.effective[i]) << '\n';
    }
    detail::write_file(dir / "effective.csv", s.str());
  }
  {
    std::ostringstream s;
    write_histogram_csv(s, histogram(r.errors, range.lo, range.hi, range.n_bins));
    detail::write_file(dir / "hist_errors.csv", s.str());
  }
  {
    std::ostringstream s;
    write_histogram_csv(s, histogram(r.effective, range.lo, range.hi, range.n_bins));
    detail::write_file(dir / "hist_effective.csv", s.str());
  }
  detail::write_file(dir / "summary.txt", summary_text(r, range, t));
}

} // namespace ambitwin::metrics
