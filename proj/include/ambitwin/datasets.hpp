#pragma once

// Non-physics data sources: an analytic two-point random function for
// checking what the networks converge to, and the German credit table.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ambitwin/errors.hpp"
#include "ambitwin/mlp.hpp"
#include "ambitwin/random.hpp"
#include "ambitwin/text_io.hpp"
#include "ambitwin/twin.hpp"

namespace ambitwin::data {

// ---------------------------------------------------------------------------
// Synthetic ambiguous functions
// ---------------------------------------------------------------------------

struct Constant {
  double c = 0.0;
  double operator()(double) const { return c; }
};

struct Linear {
  double slope = 0.0;
  double intercept = 0.0;
  double operator()(double x) const { return slope * x + intercept; }
};

/// `below` for x < threshold, `above` for x >= threshold.
struct Step {
  double threshold = 0.5;
  double below = 0.0;
  double above = 0.0;
  double operator()(double x) const { return x < threshold ? below : above; }
};

using ScalarFn = std::variant<Constant, Linear, Step>;

inline double eval(const ScalarFn &fn, double x) {
  return std::visit([x](const auto &f) { return f(x); }, fn);
}

/// y = m(x) + s a(x) with s = +/-1 equiprobable and x uniform on [0, 1].
struct SyntheticSpec {
  ScalarFn mean = Constant{0.5};
  ScalarFn spread = Constant{0.0};

  double conditional_mean(double x) const { return eval(mean, x); }
  double mean_abs_deviation(double x) const { return std::abs(eval(spread, x)); }
  double variance(double x) const {
    const double a = eval(spread, x);
    return a * a;
  }

  /// Checks m(x) +/- a(x) stays in [0, 1] on the whole domain. Both functions
  /// are piecewise linear, so the piece endpoints suffice.
  void validate() const {
    std::vector<double> cuts{0.0, 1.0};
    for (const ScalarFn *fn : {&mean, &spread}) {
      if (const auto *s = std::get_if<Step>(fn); s && s->threshold > 0.0 && s->threshold < 1.0) {
        cuts.push_back(s->threshold);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    auto check = [this](double x, double a) {
      const double m = conditional_mean(x);
      const double lo = m - std::abs(a);
      const double hi = m + std::abs(a);
      if (!(lo >= 0.0 && hi <= 1.0)) {
        throw ConfigError("synthetic targets leave [0, 1] near x = " + text::format_double(x, 6));
      }
    };
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double l = cuts[k];
      const double r = cuts[k + 1];
      // Evaluate the piece [l, r) with the spread value that holds inside it.
      const double a_inside = eval(spread, l);
      check(l, a_inside);
      check(r, a_inside);
    }
    check(1.0, eval(spread, 1.0));
  }
};

inline std::vector<Sample> gen_synthetic(const SyntheticSpec &spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform01();
    const double a = eval(spec.spread, x);
    const double y = spec.conditional_mean(x) + (rng.coin() ? a : -a);
    if (!(y >= 0.0 && y <= 1.0)) {
      throw ConfigError("synthetic target " + text::format_double(y, 6) + " outside [0, 1]");
    }
    out.push_back({{x}, y});
  }
  return out;
}

// ---------------------------------------------------------------------------
// German credit
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCreditAttributes = 24;

struct CreditRecord {
  std::array<double, kCreditAttributes> attributes{};
  int label = 1;  ///< 1 good, 0 bad

  friend bool operator==(const CreditRecord &, const CreditRecord &) = default;
};

/// Parses the 24-numeric-attribute rendition: 25 whitespace-separated
/// integers per row, last column 1 (good) or 2 (bad).
inline std::vector<CreditRecord> load_credit(std::istream &in) {
  std::vector<CreditRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto tokens = text::split_ws(line);
    if (tokens.empty()) {
      continue;
    }
    if (tokens.size() != kCreditAttributes + 1) {
      throw FormatError("credit row " + std::to_string(row) + " has " + std::to_string(tokens.size()) +
                        " columns, expected 25");
    }
    CreditRecord rec;
    for (std::size_t k = 0; k < kCreditAttributes; ++k) {
      auto v = text::parse_int(tokens[k]);
      if (!v) {
        throw FormatError("credit row " + std::to_string(row) + ": non-numeric token '" + std::string(tokens[k]) +
                          "'");
      }
      rec.attributes[k] = static_cast<double>(*v);
    }
    auto cls = text::parse_int(tokens.back());
    if (!cls || (*cls != 1 && *cls != 2)) {
      throw FormatError("credit row " + std::to_string(row) + ": class must be 1 or 2, found '" +
                        std::string(tokens.back()) + "'");
    }
    rec.label = *cls == 1 ? 1 : 0;
    records.push_back(rec);
  }
  if (records.empty()) {
    throw FormatError("credit file has no records");
  }
  return records;
}

inline std::vector<CreditRecord> load_credit(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open credit file " + path);
  }
  return load_credit(in);
}

/// Writes records in the layout load_credit reads (right-aligned, width 4).
inline void write_credit(std::ostream &out, std::span<const CreditRecord> records) {
  auto cell = [&out](long long v) {
    std::string s = std::to_string(v);
    if (s.size() < 4) {
      s.insert(0, 4 - s.size(), ' ');
    } else {
      s.insert(0, 1, ' ');
    }
    out << s;
  };
  for (const auto &r : records) {
    for (double a : r.attributes) {
      cell(std::llround(a));
    }
    cell(r.label == 1 ? 1 : 2);
    out << '\n';
  }
}

/// Converts the original 20-attribute symbolic credit file ("A11 6 A34 ...")
/// to the 24 integer columns read by load_credit:
///
///   0 checking status       1 duration (months)   2 credit history
///   3 amount / 100 (rounded) 4 savings            5 employment since
///   6 installment rate      7 personal status/sex 8 other debtors
///   9 residence since      10 property           11 age
///  12 other instalment plans 13 housing          14 existing credits
///  15 job                  16 people liable      17 telephone
///  18 foreign worker       19..23 purpose is new car / used car /
///                                 furniture / radio-TV / business
///
/// Symbolic levels "A<attr><level>" become <level>.
inline std::vector<CreditRecord> convert_symbolic_credit(std::istream &in) {
  constexpr std::size_t kColumns = 21;
  auto level = [](std::string_view tok, std::size_t attr, std::size_t row) -> long long {
    const std::string prefix = "A" + std::to_string(attr);
    if (tok.substr(0, prefix.size()) != prefix || tok.size() == prefix.size()) {
      throw FormatError("symbolic credit row " + std::to_string(row) + ": expected a level of " + prefix +
                        ", found '" + std::string(tok) + "'");
    }
    auto v = text::parse_int(tok.substr(prefix.size()));
    if (!v) {
      throw FormatError("symbolic credit row " + std::to_string(row) + ": bad level '" + std::string(tok) + "'");
    }
    return *v;
  };
  auto number = [](std::string_view tok, std::size_t row) -> long long {
    auto v = text::parse_int(tok);
    if (!v) {
      throw FormatError("symbolic credit row " + std::to_string(row) + ": non-numeric '" + std::string(tok) + "'");
    }
    return *v;
  };

  std::vector<CreditRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = text::split_ws(line);
    if (t.empty()) {
      continue;
    }
    if (t.size() != kColumns) {
      throw FormatError("symbolic credit row " + std::to_string(row) + " has " + std::to_string(t.size()) +
                        " columns, expected 21");
    }
    const long long amount = number(t[4], row);
    const long long purpose = level(t[3], 4, row);
    const std::array<long long, 19> coded{
        level(t[0], 1, row),   number(t[1], row),     level(t[2], 3, row),   (amount + 50) / 100,
        level(t[5], 6, row),   level(t[6], 7, row),   number(t[7], row),     level(t[8], 9, row),
        level(t[9], 10, row),  number(t[10], row),    level(t[11], 12, row), number(t[12], row),
        level(t[13], 14, row), level(t[14], 15, row), number(t[15], row),    level(t[16], 17, row),
        number(t[17], row),    level(t[18], 19, row), level(t[19], 20, row)};
    constexpr std::array<long long, 5> kPurposeIndicators{0, 1, 2, 3, 9};
    CreditRecord rec;
    for (std::size_t k = 0; k < coded.size(); ++k) {
      rec.attributes[k] = static_cast<double>(coded[k]);
    }
    for (std::size_t k = 0; k < kPurposeIndicators.size(); ++k) {
      rec.attributes[coded.size() + k] = purpose == kPurposeIndicators[k] ? 1.0 : 0.0;
    }
    const long long cls = number(t[20], row);
    if (cls != 1 && cls != 2) {
      throw FormatError("symbolic credit row " + std::to_string(row) + ": class must be 1 or 2");
    }
    rec.label = cls == 1 ? 1 : 0;
    records.push_back(rec);
  }
  if (records.empty()) {
    throw FormatError("symbolic credit file has no records");
  }
  return records;
}

/// Per-attribute range seen at fit time.
struct NormStats {
  std::array<double, kCreditAttributes> min{};
  std::array<double, kCreditAttributes> max{};

  /// Affine map onto [0, 1]; constant attributes map to 0.
  CreditRecord apply(const CreditRecord &rec) const {
    CreditRecord out = rec;
    for (std::size_t k = 0; k < kCreditAttributes; ++k) {
      const double range = max[k] - min[k];
      out.attributes[k] = range > 0.0 ? (rec.attributes[k] - min[k]) / range : 0.0;
    }
    return out;
  }

  /// Inverse of apply for attributes with min < max.
  double invert(std::size_t k, double u) const { return min[k] + u * (max[k] - min[k]); }
};

struct TabularDataset {
  std::vector<CreditRecord> records;
  NormStats stats;

  std::size_t size() const { return records.size(); }
};

inline NormStats fit_stats(std::span<const CreditRecord> records) {
  if (records.empty()) {
    throw ContractError("cannot normalize an empty record set");
  }
  NormStats s;
  s.min = records.front().attributes;
  s.max = records.front().attributes;
  for (const auto &r : records) {
    for (std::size_t k = 0; k < kCreditAttributes; ++k) {
      s.min[k] = std::min(s.min[k], r.attributes[k]);
      s.max[k] = std::max(s.max[k], r.attributes[k]);
    }
  }
  return s;
}

inline TabularDataset apply_stats(const NormStats &stats, std::span<const CreditRecord> records) {
  TabularDataset ds;
  ds.stats = stats;
  ds.records.reserve(records.size());
  for (const auto &r : records) {
    ds.records.push_back(stats.apply(r));
  }
  return ds;
}

inline TabularDataset normalize(std::span<const CreditRecord> records) {
  return apply_stats(fit_stats(records), records);
}

/// Inputs are the normalized attributes, targets the 0/1 labels.
inline std::vector<Sample> to_samples(const TabularDataset &ds) {
  std::vector<Sample> out;
  out.reserve(ds.size());
  for (const auto &r : ds.records) {
    out.push_back({{r.attributes.begin(), r.attributes.end()}, static_cast<double>(r.label)});
  }
  return out;
}

/// Alternates good, bad, good, ...; within a class picks uniformly with
/// replacement.
class BalancedSampler {
public:
  BalancedSampler(std::span<const int> labels, std::uint64_t seed) : rng_(seed) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (labels[i] == 1 ? good_ : bad_).push_back(i);
    }
    if (good_.empty() || bad_.empty()) {
      throw SamplerError("balanced sampling needs both classes present");
    }
  }

  std::size_t operator()() {
    const auto &pool = next_good_ ? good_ : bad_;
    next_good_ = !next_good_;
    return pool[static_cast<std::size_t>(rng_.below(pool.size()))];
  }

private:
  std::vector<std::size_t> good_;
  std::vector<std::size_t> bad_;
  Rng rng_;
  bool next_good_ = true;
};

inline std::vector<int> labels_of(const TabularDataset &ds) {
  std::vector<int> labels;
  labels.reserve(ds.size());
  for (const auto &r : ds.records) {
    labels.push_back(r.label);
  }
  return labels;
}

inline IndexStream balanced_sampler(const TabularDataset &ds, std::uint64_t seed) {
  return BalancedSampler(labels_of(ds), seed);
}

/// Factory form for train_twin.
inline SamplerFactory balanced_sampler_factory(std::vector<int> labels) {
  BalancedSampler probe(labels, 0);  // fail early on an empty class
  (void)probe;
  return [labels = std::move(labels)](std::uint64_t seed) -> IndexStream { return BalancedSampler(labels, seed); };
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified by label: round(test_fraction * class size) records of each
/// class go to the test side. Index lists come back sorted.
inline Split split(const TabularDataset &ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in [0, 1)");
  }
  Rng rng(seed);
  Split out;
  for (int label : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.records[i].label == label) {
        idx.push_back(i);
      }
    }
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline TabularDataset subset(const TabularDataset &ds, std::span<const std::size_t> indices) {
  TabularDataset out;
  out.stats = ds.stats;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) {
    out.records.push_back(ds.records.at(i));
  }
  return out;
}

/// Normalized export: header a0..a23,label.
inline void write_dataset_csv(std::ostream &out, const TabularDataset &ds) {
  for (std::size_t k = 0; k < kCreditAttributes; ++k) {
    out << 'a' << k << ',';
  }
  out << "label\n";
  for (const auto &r : ds.records) {
    for (double a : r.attributes) {
      out << text::format_double(a) << ',';
    }
    out << r.label << '\n';
  }
}

// Synthetic sample CSV: header "x,y".

inline void write_samples_csv(std::ostream &out, std::span<const Sample> samples) {
  out << "x,y\n";
  for (const auto &s : samples) {
    out << text::format_double(s.input.at(0)) << ',' << text::format_double(s.target) << '\n';
  }
}

inline std::vector<Sample> read_samples_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || text::split_char(line, ',') != std::vector<std::string_view>{"x", "y"}) {
    throw FormatError("sample file must start with header x,y");
  }
  std::vector<Sample> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto cells = text::split_char(line, ',');
    auto x = cells.size() == 2 ? text::parse_double(cells[0]) : std::nullopt;
    auto y = cells.size() == 2 ? text::parse_double(cells[1]) : std::nullopt;
    if (!x || !y || !std::isfinite(*x) || !(*y >= 0.0 && *y <= 1.0)) {
      throw FormatError("sample row " + std::to_string(row) + " is malformed");
    }
    out.push_back({{*x}, *y});
  }
  return out;
}

} // namespace ambitwin::data
