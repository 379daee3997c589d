// Copyright 2026 The gibench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Discretization and plug-in information estimates over symbol streams.
//
// Everything here works on DiscreteView: one integer symbol per sample plus
// an optional per-sample probability weight. Multi-column variables are
// folded into a single stream by joint_view, which assigns ids in order of
// first occurrence so identical inputs always produce identical views.
// Logarithms are base 2 throughout.

#ifndef GIB_ESTIMATORS_HPP_
#define GIB_ESTIMATORS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gib/common.hpp"

namespace gib {

inline constexpr double kMiClampTolerance = 1e-12;
inline constexpr double kWeightSumTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Sample matrices and binning

struct SampleMatrix {
  Matrix values;
  std::vector<std::string> column_names;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  /// Throws InvalidArgument naming the first offending column.
  void validate() const {
    if (values.rows() < 1) throw InvalidArgument("SampleMatrix: needs at least one sample");
    if (static_cast<Eigen::Index>(column_names.size()) != values.cols())
      throw InvalidArgument("SampleMatrix: column_names length " + std::to_string(column_names.size()) +
                            " does not match " + std::to_string(values.cols()) + " columns");
    std::unordered_set<std::string> seen;
    for (const auto& name : column_names)
      if (!seen.insert(name).second) throw InvalidArgument("SampleMatrix: duplicate column name '" + name + "'");
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      if (!values.col(c).allFinite())
        throw InvalidArgument("SampleMatrix: non-finite value in column " + std::to_string(c));
  }
};

/// Builds a SampleMatrix with names c0, c1, ... when none are given.
inline SampleMatrix make_samples(Matrix values, std::vector<std::string> names = {}) {
  if (names.empty())
    for (Eigen::Index c = 0; c < values.cols(); ++c) names.push_back("c" + std::to_string(c));
  SampleMatrix m{std::move(values), std::move(names)};
  m.validate();
  return m;
}

enum class RangePolicy { kObserved, kFixed };

struct BinningSpec {
  int n_bins = 30;
  RangePolicy range_policy = RangePolicy::kObserved;
  std::vector<std::pair<double, double>> fixed_intervals;

  static BinningSpec observed(int n_bins) { return {n_bins, RangePolicy::kObserved, {}}; }
  static BinningSpec fixed(int n_bins, double lo, double hi, std::size_t n_cols) {
    return {n_bins, RangePolicy::kFixed, std::vector<std::pair<double, double>>(n_cols, {lo, hi})};
  }
};

struct BinnedMatrix {
  IntMatrix bins;
  /// n_bins + 1 edges per column.
  std::vector<std::vector<double>> edges;
};

/// Equal-width histogram binning, column by column. A value v maps to
/// floor(n_bins * (v - lo) / (hi - lo)) clamped to [0, n_bins - 1]; a column
/// with an empty observed range maps entirely to bin 0.
inline BinnedMatrix bin_equal_width(const SampleMatrix& data, const BinningSpec& spec) {
  if (spec.n_bins < 2) throw InvalidArgument("n_bins must be >= 2, got " + std::to_string(spec.n_bins));
  for (Eigen::Index c = 0; c < data.cols(); ++c)
    if (!data.values.col(c).allFinite())
      throw InvalidArgument("bin_equal_width: non-finite value in column " + std::to_string(c));
  const bool fixed = spec.range_policy == RangePolicy::kFixed;
  if (fixed && static_cast<Eigen::Index>(spec.fixed_intervals.size()) != data.cols())
    throw InvalidArgument("bin_equal_width: need one fixed interval per column (" +
                          std::to_string(data.cols()) + "), got " + std::to_string(spec.fixed_intervals.size()));

  BinnedMatrix out;
  out.bins.resize(data.rows(), data.cols());
  out.edges.resize(static_cast<std::size_t>(data.cols()));
  const double nb = spec.n_bins;
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    double lo, hi;
    if (fixed) {
      std::tie(lo, hi) = spec.fixed_intervals[static_cast<std::size_t>(c)];
      if (!(lo < hi))
        throw InvalidArgument("bin_equal_width: fixed interval for column " + std::to_string(c) +
                              " has lo >= hi");
    } else {
      lo = data.values.col(c).minCoeff();
      hi = data.values.col(c).maxCoeff();
    }
    auto& edges = out.edges[static_cast<std::size_t>(c)];
    edges.resize(static_cast<std::size_t>(spec.n_bins) + 1);
    const double width = hi - lo;
    for (int k = 0; k <= spec.n_bins; ++k) edges[static_cast<std::size_t>(k)] = lo + width * (k / nb);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      int b = 0;
      if (width > 0) {
        const double pos = std::floor(nb * (data.values(r, c) - lo) / width);
        b = static_cast<int>(std::clamp(pos, 0.0, nb - 1));
      }
      out.bins(r, c) = b;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete views

using Weights = std::shared_ptr<const std::vector<double>>;

struct DiscreteView {
  std::vector<std::uint32_t> symbols;
  std::uint32_t alphabet_size = 0;
  Weights weights;  // null when samples are equally likely

  std::size_t size() const { return symbols.size(); }
  bool weighted() const { return static_cast<bool>(weights); }

  void validate() const {
    if (alphabet_size == 0 && !symbols.empty()) throw InvalidArgument("DiscreteView: empty alphabet");
    for (auto s : symbols)
      if (s >= alphabet_size) throw InvalidArgument("DiscreteView: symbol id out of alphabet");
    if (weights) {
      if (weights->size() != symbols.size())
        throw InvalidArgument("DiscreteView: weight vector length does not match samples");
      double sum = 0.0;
      for (double w : *weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("DiscreteView: negative or non-finite weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > kWeightSumTolerance)
        throw InvalidArgument("DiscreteView: weights must sum to 1");
    }
  }
};

inline Weights make_weights(std::vector<double> w) {
  return std::make_shared<const std::vector<double>>(std::move(w));
}

inline DiscreteView with_weights(DiscreteView view, Weights w) {
  view.weights = std::move(w);
  view.validate();
  return view;
}

namespace detail {

/// First-occurrence relabeling of an arbitrary integer stream.
template <typename Int>
DiscreteView relabel(std::span<const Int> values) {
  DiscreteView v;
  v.symbols.resize(values.size());
  std::unordered_map<std::int64_t, std::uint32_t> ids;
  ids.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(static_cast<std::int64_t>(values[i]), v.alphabet_size);
    if (inserted) ++v.alphabet_size;
    v.symbols[i] = it->second;
  }
  return v;
}

/// Injective first-occurrence relabeling of the pair stream (a_i, b_i).
inline std::vector<std::uint32_t> combine(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
                                          std::uint32_t& alphabet) {
  std::vector<std::uint32_t> out(a.size());
  std::unordered_map<std::uint64_t, std::uint32_t> ids;
  ids.reserve(a.size());
  alphabet = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::uint64_t key = (static_cast<std::uint64_t>(a[i]) << 32) | b[i];
    auto [it, inserted] = ids.try_emplace(key, alphabet);
    if (inserted) ++alphabet;
    out[i] = it->second;
  }
  return out;
}

inline std::vector<int> column(const IntMatrix& m, Eigen::Index c) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

inline bool same_weights(const Weights& a, const Weights& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

/// True when every weight has the same value, in which case the weighted
/// estimate is computed through the unweighted path so the two agree exactly.
inline bool uniform_weights(const Weights& w) {
  if (!w || w->empty()) return true;
  const double first = w->front();
  return std::all_of(w->begin(), w->end(), [first](double x) { return x == first; });
}

inline std::vector<double> masses(std::span<const std::uint32_t> symbols, std::uint32_t alphabet,
                                  const Weights& w) {
  std::vector<double> m(alphabet, 0.0);
  if (uniform_weights(w)) {
    std::vector<std::uint64_t> counts(alphabet, 0);
    for (auto s : symbols) ++counts[s];
    const double n = static_cast<double>(symbols.size());
    for (std::size_t k = 0; k < alphabet; ++k) m[k] = static_cast<double>(counts[k]) / n;
  } else {
    for (std::size_t i = 0; i < symbols.size(); ++i) m[symbols[i]] += (*w)[i];
  }
  return m;
}

inline double entropy_of_masses(std::span<const double> masses) {
  double h = 0.0;
  for (double p : masses)
    if (p > 0.0) h -= p * std::log2(p);
  return h < 0.0 ? 0.0 : h;
}

}  // namespace detail

/// Relabels one already-discrete column.
inline DiscreteView view_of(std::span<const int> values) { return detail::relabel(values); }

/// Maps each sample's tuple of selected bins to one symbol, ids assigned in
/// order of first occurrence.
inline DiscreteView joint_view(const IntMatrix& binned, std::span<const int> columns) {
  if (columns.empty()) throw InvalidArgument("joint_view: empty column subset");
  for (int c : columns)
    if (c < 0 || c >= binned.cols()) throw InvalidArgument("joint_view: column index " + std::to_string(c) + " out of range");
  const auto first = detail::column(binned, columns[0]);
  DiscreteView acc = detail::relabel(std::span<const int>(first));
  for (std::size_t k = 1; k < columns.size(); ++k) {
    const auto col = detail::column(binned, columns[k]);
    const DiscreteView next = detail::relabel(std::span<const int>(col));
    acc.symbols = detail::combine(acc.symbols, next.symbols, acc.alphabet_size);
  }
  return acc;
}

inline DiscreteView joint_view(const IntMatrix& binned) {
  std::vector<int> all(static_cast<std::size_t>(binned.cols()));
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
  return joint_view(binned, all);
}

/// Joint of two views sharing a sample axis; keeps a's weights.
inline DiscreteView joint_of(const DiscreteView& a, const DiscreteView& b) {
  if (a.size() != b.size()) throw InvalidArgument("joint_of: length mismatch");
  DiscreteView out;
  out.symbols = detail::combine(a.symbols, b.symbols, out.alphabet_size);
  out.weights = a.weights;
  return out;
}

/// All leave-one-out views X^{-i} of the columns of `binned`, built from
/// prefix/suffix joints so the total cost is linear in the column count.
/// Each result is identical to joint_view over the remaining columns.
inline std::vector<DiscreteView> leave_one_out_views(const IntMatrix& binned) {
  const auto n_cols = static_cast<std::size_t>(binned.cols());
  if (n_cols < 2) throw InvalidArgument("leave_one_out_views: needs at least two columns");
  std::vector<DiscreteView> singles(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    const auto col = detail::column(binned, static_cast<Eigen::Index>(c));
    singles[c] = detail::relabel(std::span<const int>(col));
  }
  // prefix[i] covers columns [0, i); suffix[i] covers [i, n_cols).
  std::vector<DiscreteView> prefix(n_cols + 1), suffix(n_cols + 1);
  prefix[1] = singles[0];
  for (std::size_t i = 2; i <= n_cols; ++i) {
    prefix[i].symbols = detail::combine(prefix[i - 1].symbols, singles[i - 1].symbols, prefix[i].alphabet_size);
  }
  suffix[n_cols - 1] = singles[n_cols - 1];
  for (std::size_t i = n_cols - 1; i-- > 0;) {
    suffix[i].symbols = detail::combine(singles[i].symbols, suffix[i + 1].symbols, suffix[i].alphabet_size);
  }
  std::vector<DiscreteView> out(n_cols);
  for (std::size_t i = 0; i < n_cols; ++i) {
    if (i == 0) {
      out[i] = detail::relabel(std::span<const std::uint32_t>(suffix[1].symbols));
    } else if (i == n_cols - 1) {
      out[i] = detail::relabel(std::span<const std::uint32_t>(prefix[n_cols - 1].symbols));
    } else {
      out[i].symbols = detail::combine(prefix[i].symbols, suffix[i + 1].symbols, out[i].alphabet_size);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entropy and mutual information

/// Plug-in entropy in bits.
inline double entropy(const DiscreteView& view) {
  const auto m = detail::masses(view.symbols, view.alphabet_size, view.weights);
  return detail::entropy_of_masses(m);
}

/// Plug-in I(a; b) = H(a) + H(b) - H(a, b) in bits, under the shared weighting.
inline double mutual_information(const DiscreteView& a, const DiscreteView& b) {
  if (a.size() != b.size())
    throw InvalidArgument("mutual_information: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if ((a.weighted() || b.weighted()) && !detail::same_weights(a.weights, b.weights))
    throw InvalidArgument("mutual_information: views carry different weight vectors");
  const DiscreteView ab = joint_of(a, b);
  const double mi = entropy(a) + entropy(b) - entropy(ab);
  if (mi < 0.0 && mi > -kMiClampTolerance) return 0.0;
  return mi;
}

// ---------------------------------------------------------------------------
// Exact distributions

/// An explicit joint pmf: row r of `support` is an outcome tuple.
struct ExactPmf {
  IntMatrix support;
  std::vector<double> probs;

  void validate() const {
    if (static_cast<std::size_t>(support.rows()) != probs.size())
      throw InvalidArgument("ExactPmf: support and probs differ in length");
    double sum = 0.0, comp = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw InvalidArgument("ExactPmf: negative probability");
      const double t = sum + p;  // Neumaier
      comp += std::abs(sum) >= std::abs(p) ? (sum - t) + p : (p - t) + sum;
      sum = t;
    }
    if (std::abs(sum + comp - 1.0) > kWeightSumTolerance) throw InvalidArgument("ExactPmf: probabilities must sum to 1");
    if (support.rows() > 0 && joint_view(support).alphabet_size != static_cast<std::uint32_t>(support.rows()))
      throw InvalidArgument("ExactPmf: support tuples are not unique");
  }
};

/// Exact I(A; B) in bits for coordinate subsets A and B of the pmf.
inline double exact_mi(const ExactPmf& pmf, std::span<const int> a_coords, std::span<const int> b_coords) {
  if (a_coords.empty() || b_coords.empty()) throw InvalidArgument("exact_mi: empty coordinate set");
  for (int a : a_coords)
    for (int b : b_coords)
      if (a == b) throw InvalidArgument("exact_mi: coordinate sets overlap at " + std::to_string(a));
  const DiscreteView a = joint_view(pmf.support, a_coords);
  const DiscreteView b = joint_view(pmf.support, b_coords);
  std::uint32_t ab_alpha = 0;
  const auto ab = detail::combine(a.symbols, b.symbols, ab_alpha);
  auto mass_of = [&](std::span<const std::uint32_t> sym, std::uint32_t alpha) {
    std::vector<double> m(alpha, 0.0);
    for (std::size_t i = 0; i < sym.size(); ++i) m[sym[i]] += pmf.probs[i];
    return detail::entropy_of_masses(m);
  };
  const double mi = mass_of(a.symbols, a.alphabet_size) + mass_of(b.symbols, b.alphabet_size) - mass_of(ab, ab_alpha);
  if (mi < 0.0 && mi > -kMiClampTolerance) return 0.0;
  return mi;
}

/// Draws `m` i.i.d. outcome indices from the pmf by inverse-CDF lookup.
inline std::vector<std::size_t> sample_pmf(const ExactPmf& pmf, std::size_t m, Rng& rng) {
  std::vector<double> cdf(pmf.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += pmf.probs[i]);
  std::vector<std::size_t> out(m);
  for (auto& o : out) {
    const double u = rng.uniform() * acc;
    o = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (o >= cdf.size()) o = cdf.size() - 1;
  }
  return out;
}

}  // namespace gib

#endif  // GIB_ESTIMATORS_HPP_
