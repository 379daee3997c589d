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

// Dataset construction. Every generator is a pure function of its
// parameters and seed.

#ifndef GIB_DATAGEN_HPP_
#define GIB_DATAGEN_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "gib/common.hpp"
#include "gib/csv.hpp"
#include "gib/estimators.hpp"

namespace gib {

struct Provenance {
  std::string generator;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"generator", generator}, {"params", params}, {"seed", seed}, {"version", kVersion}};
  }
};

/// Inputs plus either real-valued targets or integer class labels.
struct LabeledDataset {
  SampleMatrix x;
  std::vector<double> y_real;
  std::vector<int> y_class;
  int n_classes = 0;
  Provenance meta;

  bool classification() const { return n_classes > 0; }
  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }

  void validate() const {
    x.validate();
    const std::size_t n = size();
    if (classification() ? y_class.size() != n : y_real.size() != n)
      throw InvalidArgument("LabeledDataset: target length does not match inputs");
    if (meta.generator.empty()) throw InvalidArgument("LabeledDataset: missing provenance");
  }
};

// ---------------------------------------------------------------------------
// Force-to-1 noise

struct NoiseSpec {
  double p_flip = 1.0 / 3.0;
  int n = 3;

  void validate() const {
    if (!(p_flip >= 0.0 && p_flip <= 1.0)) throw InvalidArgument("NoiseSpec: p_flip must lie in [0, 1]");
    if (n < 1) throw InvalidArgument("NoiseSpec: n must be >= 1");
  }
};

struct ForceToOneSample {
  IntMatrix x_clean;
  IntMatrix x_noisy;
  std::vector<int> eps;  // 0 = untouched, i > 0 = coordinate i forced to 1
};

/// Column layout of enumerate_force_to_one: clean bits, noisy bits, eps.
struct ForceToOneLayout {
  int n;
  std::vector<int> clean() const { return range(0); }
  std::vector<int> noisy() const { return range(n); }
  int eps() const { return 2 * n; }

 private:
  std::vector<int> range(int offset) const {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), offset);
    return v;
  }
};

inline ForceToOneSample gen_force_to_one(const NoiseSpec& noise, std::size_t n_samples, std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  ForceToOneSample s;
  const auto rows = static_cast<Eigen::Index>(n_samples);
  s.x_clean.resize(rows, noise.n);
  s.eps.assign(n_samples, 0);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (int c = 0; c < noise.n; ++c) s.x_clean(r, c) = rng.bernoulli(0.5) ? 1 : 0;
  s.x_noisy = s.x_clean;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (rng.bernoulli(noise.p_flip)) {
      const auto i = static_cast<int>(rng.below(static_cast<std::uint64_t>(noise.n)));
      s.x_noisy(r, i) = 1;
      s.eps[static_cast<std::size_t>(r)] = i + 1;
    }
  }
  return s;
}

inline constexpr int kMaxEnumerationBits = 16;

/// Exact joint pmf over (clean bits, noisy bits, eps); 2^n (n + 1) rows.
inline ExactPmf enumerate_force_to_one(const NoiseSpec& noise) {
  noise.validate();
  if (noise.n > kMaxEnumerationBits)
    throw InvalidArgument("enumerate_force_to_one: n = " + std::to_string(noise.n) + " exceeds " +
                          std::to_string(kMaxEnumerationBits));
  const int n = noise.n;
  const std::size_t inputs = std::size_t{1} << n;
  const auto rows = static_cast<Eigen::Index>(inputs * static_cast<std::size_t>(n + 1));
  ExactPmf pmf;
  pmf.support.resize(rows, 2 * n + 1);
  pmf.probs.resize(static_cast<std::size_t>(rows));
  const double p_input = 1.0 / static_cast<double>(inputs);
  Eigen::Index r = 0;
  for (std::size_t v = 0; v < inputs; ++v) {
    for (int e = 0; e <= n; ++e, ++r) {
      for (int c = 0; c < n; ++c) {
        const int bit = static_cast<int>((v >> (n - 1 - c)) & 1U);
        pmf.support(r, c) = bit;
        pmf.support(r, n + c) = (e == c + 1) ? 1 : bit;
      }
      pmf.support(r, 2 * n) = e;
      pmf.probs[static_cast<std::size_t>(r)] = p_input * (e == 0 ? 1.0 - noise.p_flip : noise.p_flip / n);
    }
  }
  return pmf;
}

enum class SynergyFunction { kF1, kF2, kF3 };

inline SynergyFunction parse_synergy_function(const std::string& s) {
  if (s == "f1") return SynergyFunction::kF1;
  if (s == "f2") return SynergyFunction::kF2;
  if (s == "f3") return SynergyFunction::kF3;
  throw InvalidArgument("unknown synergy function '" + s + "' (expected f1, f2, f3)");
}

/// f1 = first bit, f2 = XOR of the first two, f3 = XOR of all.
inline std::vector<int> apply_synergy_function(const IntMatrix& x, SynergyFunction which) {
  if (which == SynergyFunction::kF2 && x.cols() < 2) throw InvalidArgument("f2 needs at least 2 input bits");
  if (x.cols() < 1) throw InvalidArgument("synergy function needs at least 1 input bit");
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    int v = 0;
    switch (which) {
      case SynergyFunction::kF1: v = x(r, 0); break;
      case SynergyFunction::kF2: v = x(r, 0) ^ x(r, 1); break;
      case SynergyFunction::kF3:
        for (Eigen::Index c = 0; c < x.cols(); ++c) v ^= x(r, c);
        break;
    }
    out[static_cast<std::size_t>(r)] = v & 1;
  }
  return out;
}

/// The pmf with `values` appended as one more outcome coordinate.
inline ExactPmf append_column(const ExactPmf& pmf, std::span<const int> values) {
  if (static_cast<Eigen::Index>(values.size()) != pmf.support.rows())
    throw InvalidArgument("append_column: length mismatch");
  ExactPmf out;
  out.support.resize(pmf.support.rows(), pmf.support.cols() + 1);
  out.support.leftCols(pmf.support.cols()) = pmf.support;
  for (Eigen::Index r = 0; r < pmf.support.rows(); ++r) out.support(r, pmf.support.cols()) = values[static_cast<std::size_t>(r)];
  out.probs = pmf.probs;
  return out;
}

// ---------------------------------------------------------------------------
// Simple functions

enum class SimpleFunction { kAdd, kMul, kSp1, kSp2, kSp3 };

inline std::string to_string(SimpleFunction f) {
  switch (f) {
    case SimpleFunction::kAdd: return "add";
    case SimpleFunction::kMul: return "mul";
    case SimpleFunction::kSp1: return "sp1";
    case SimpleFunction::kSp2: return "sp2";
    case SimpleFunction::kSp3: return "sp3";
  }
  return "?";
}

inline SimpleFunction parse_simple_function(const std::string& s) {
  for (auto f : {SimpleFunction::kAdd, SimpleFunction::kMul, SimpleFunction::kSp1, SimpleFunction::kSp2,
                 SimpleFunction::kSp3})
    if (to_string(f) == s) return f;
  throw InvalidArgument("unknown simple function '" + s + "' (expected add, mul, sp1, sp2, sp3)");
}

inline int arity(SimpleFunction f) {
  switch (f) {
    case SimpleFunction::kAdd:
    case SimpleFunction::kMul: return 2;
    case SimpleFunction::kSp1:
    case SimpleFunction::kSp2: return 3;
    case SimpleFunction::kSp3: return 4;
  }
  return 0;
}

inline double evaluate(SimpleFunction f, std::span<const double> v) {
  switch (f) {
    case SimpleFunction::kAdd: return v[0] + v[1];
    case SimpleFunction::kMul: return v[0] * v[1];
    case SimpleFunction::kSp1: return v[0] * v[1] + v[1] * v[2] + v[2] * v[0];
    case SimpleFunction::kSp2: return v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    case SimpleFunction::kSp3: return v[0] * v[1] + v[1] * v[2] + v[2] * v[3] + v[3] * v[0];
  }
  return 0.0;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

inline Interval default_train_range(SimpleFunction f) {
  return f == SimpleFunction::kAdd ? Interval{0.0, 10.0} : Interval{-10.0, 10.0};
}
inline Interval default_test_range(SimpleFunction) { return {-1000.0, 1000.0}; }
inline constexpr std::size_t kSimpleFunctionSamples = 1500;

/// Inputs uniform on range^arity; targets by the closed form.
inline LabeledDataset gen_simple_function(SimpleFunction f, std::size_t n_samples, Interval range, std::uint64_t seed) {
  if (!(range.lo < range.hi)) throw InvalidArgument("gen_simple_function: range must satisfy lo < hi");
  if (n_samples < 1) throw InvalidArgument("gen_simple_function: need at least one sample");
  Rng rng(seed);
  const int k = arity(f);
  Matrix x(static_cast<Eigen::Index>(n_samples), k);
  LabeledDataset d;
  d.y_real.resize(n_samples);
  std::vector<double> row(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (int c = 0; c < k; ++c) row[static_cast<std::size_t>(c)] = x(static_cast<Eigen::Index>(i), c) = rng.uniform(range.lo, range.hi);
    d.y_real[i] = evaluate(f, row);
  }
  static const std::array<const char*, 4> names{"a", "b", "c", "d"};
  d.x = make_samples(std::move(x), std::vector<std::string>(names.begin(), names.begin() + k));
  d.meta = {"simple_function", {{"function", to_string(f)}, {"n_samples", n_samples}, {"range", {range.lo, range.hi}}}, seed};
  return d;
}

// ---------------------------------------------------------------------------
// 12-bit binary classification

inline constexpr int kBinaryBits = 12;

/// Rotation of a 12-bit pattern by one position; the generator of the
/// cyclic group under which binary-classification labels are invariant.
inline std::uint32_t rotate12(std::uint32_t v) { return ((v << 1) | (v >> (kBinaryBits - 1))) & 0xFFFU; }

namespace detail {

inline std::array<double, 3> cyclic_features(std::uint32_t v) {
  double weight = 0, adjacent = 0, gaps = 0;
  auto bit = [v](int i) { return (v >> (((i % kBinaryBits) + kBinaryBits) % kBinaryBits)) & 1U; };
  for (int i = 0; i < kBinaryBits; ++i) {
    weight += bit(i);
    adjacent += bit(i) & bit(i + 1);
    gaps += bit(i) & (1U - bit(i + 1)) & bit(i + 2);
  }
  return {weight, adjacent, gaps};
}

}  // namespace detail

/// All 4096 patterns of 12 bits with a balanced label that depends only on
/// the rotation orbit of the pattern. Orbits are scored by a seeded linear
/// combination of rotation-invariant statistics (bit count, adjacent pairs,
/// 1-0-1 gaps); the positive class is the highest-scoring set of orbits
/// covering exactly 2048 patterns, found by exact-capacity knapsack.
inline LabeledDataset gen_binary_classification(std::uint64_t seed) {
  constexpr std::uint32_t kPatterns = 1U << kBinaryBits;
  constexpr int kHalf = kPatterns / 2;
  Rng rng(seed);
  std::array<double, 3> coef{};
  for (auto& c : coef) c = rng.uniform(-1.0, 1.0);

  std::vector<std::uint32_t> orbit_of(kPatterns, UINT32_MAX);
  std::vector<std::vector<std::uint32_t>> orbits;
  for (std::uint32_t v = 0; v < kPatterns; ++v) {
    if (orbit_of[v] != UINT32_MAX) continue;
    std::vector<std::uint32_t> members;
    std::uint32_t r = v;
    do {
      orbit_of[r] = static_cast<std::uint32_t>(orbits.size());
      members.push_back(r);
      r = rotate12(r);
    } while (r != v);
    orbits.push_back(std::move(members));
  }
  std::vector<double> score(orbits.size());
  for (std::size_t o = 0; o < orbits.size(); ++o) {
    const auto f = detail::cyclic_features(orbits[o].front());
    score[o] = coef[0] * f[0] + coef[1] * f[1] + coef[2] * f[2] + 1e-6 * rng.uniform();
  }

  // best[c] = max score of an orbit subset covering exactly c patterns.
  const std::size_t n_orb = orbits.size();
  constexpr double kNone = -1e300;
  std::vector<double> best(kHalf + 1, kNone);
  best[0] = 0.0;
  std::vector<std::vector<bool>> take(n_orb, std::vector<bool>(kHalf + 1, false));
  for (std::size_t o = 0; o < n_orb; ++o) {
    const int sz = static_cast<int>(orbits[o].size());
    for (int c = kHalf; c >= sz; --c) {
      if (best[c - sz] == kNone) continue;
      const double cand = best[c - sz] + score[o];
      if (cand > best[c]) {
        best[c] = cand;
        take[o][c] = true;
      }
    }
  }
  if (best[kHalf] == kNone) throw NumericalFailure("gen_binary_classification: no balanced orbit split");
  std::vector<int> orbit_label(n_orb, 0);
  for (int c = kHalf, o = static_cast<int>(n_orb) - 1; o >= 0; --o) {
    if (take[static_cast<std::size_t>(o)][c]) {
      orbit_label[static_cast<std::size_t>(o)] = 1;
      c -= static_cast<int>(orbits[static_cast<std::size_t>(o)].size());
    }
  }

  Matrix x(kPatterns, kBinaryBits);
  LabeledDataset d;
  d.y_class.resize(kPatterns);
  d.n_classes = 2;
  for (std::uint32_t v = 0; v < kPatterns; ++v) {
    for (int b = 0; b < kBinaryBits; ++b) x(v, b) = static_cast<double>((v >> (kBinaryBits - 1 - b)) & 1U);
    d.y_class[v] = orbit_label[orbit_of[v]];
  }
  std::vector<std::string> names;
  for (int b = 0; b < kBinaryBits; ++b) names.push_back("b" + std::to_string(b));
  d.x = make_samples(std::move(x), std::move(names));
  d.meta = {"binary_classification",
            {{"bits", kBinaryBits}, {"group", "cyclic rotation"}, {"coefficients", {coef[0], coef[1], coef[2]}}},
            seed};
  return d;
}

/// The pattern encoded by a dataset row (bit 0 is the most significant).
inline std::uint32_t pattern_of_row(const SampleMatrix& x, Eigen::Index r) {
  std::uint32_t v = 0;
  for (Eigen::Index b = 0; b < x.cols(); ++b) v = (v << 1) | (x.values(r, b) > 0.5 ? 1U : 0U);
  return v;
}

// ---------------------------------------------------------------------------
// IDX files

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset, const std::string& path) {
  if (offset + 4 > b.size())
    throw InvalidArgument("'" + path + "': truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

inline void put_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFFU));
}

}  // namespace detail

/// Loads an IDX image/label pair; pixels scaled to [0, 1].
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  const std::uint32_t im_magic = detail::read_be32(img, 0, images_path);
  if (im_magic != kIdxImagesMagic)
    throw InvalidArgument("'" + images_path + "': bad magic at byte offset 0");
  const std::uint32_t lb_magic = detail::read_be32(lab, 0, labels_path);
  if (lb_magic != kIdxLabelsMagic)
    throw InvalidArgument("'" + labels_path + "': bad magic at byte offset 0");
  const std::uint32_t count = detail::read_be32(img, 4, images_path);
  const std::uint32_t h = detail::read_be32(img, 8, images_path);
  const std::uint32_t w = detail::read_be32(img, 12, images_path);
  const std::uint32_t lcount = detail::read_be32(lab, 4, labels_path);
  if (count != lcount)
    throw InvalidArgument("image count " + std::to_string(count) + " does not match label count " +
                          std::to_string(lcount) + " (byte offset 4)");
  const std::size_t pixels = std::size_t{h} * w;
  const std::size_t need_img = 16 + std::size_t{count} * pixels;
  if (img.size() < need_img)
    throw InvalidArgument("'" + images_path + "': truncated payload at byte offset " + std::to_string(img.size()) +
                          " (expected " + std::to_string(need_img) + " bytes)");
  if (lab.size() < 8 + std::size_t{count})
    throw InvalidArgument("'" + labels_path + "': truncated payload at byte offset " + std::to_string(lab.size()) +
                          " (expected " + std::to_string(8 + std::size_t{count}) + " bytes)");
  Matrix x(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  LabeledDataset d;
  d.y_class.resize(count);
  d.n_classes = 10;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = img[16 + i * pixels + p] / 255.0;
    const int label = lab[8 + i];
    if (label > 9)
      throw InvalidArgument("'" + labels_path + "': label " + std::to_string(label) + " out of range at byte offset " +
                            std::to_string(8 + i));
    d.y_class[i] = label;
  }
  std::vector<std::string> names(pixels);
  for (std::size_t p = 0; p < pixels; ++p) names[p] = "px" + std::to_string(p);
  d.x = SampleMatrix{std::move(x), std::move(names)};
  d.meta = {"idx", {{"images", images_path}, {"labels", labels_path}, {"rows", h}, {"cols", w}}, 0};
  return d;
}

/// Writes an IDX image/label pair from raw bytes (count x rows*cols).
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      const std::vector<std::vector<unsigned char>>& images, const std::vector<unsigned char>& labels,
                      std::uint32_t rows, std::uint32_t cols) {
  if (images.size() != labels.size()) throw InvalidArgument("write_idx: image and label counts differ");
  std::string img, lab;
  detail::put_be32(img, kIdxImagesMagic);
  detail::put_be32(img, static_cast<std::uint32_t>(images.size()));
  detail::put_be32(img, rows);
  detail::put_be32(img, cols);
  for (const auto& im : images) {
    if (im.size() != std::size_t{rows} * cols) throw InvalidArgument("write_idx: image size mismatch");
    img.append(im.begin(), im.end());
  }
  detail::put_be32(lab, kIdxLabelsMagic);
  detail::put_be32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.append(labels.begin(), labels.end());
  write_text(images_path, img);
  write_text(labels_path, lab);
}

// ---------------------------------------------------------------------------
// Export

/// CSV of inputs followed by the target column, plus a provenance sidecar at
/// `path + ".json"`.
inline void export_dataset_csv(const LabeledDataset& d, const std::string& path, const std::string& target_name = "target") {
  std::vector<std::string> header = d.x.column_names;
  header.push_back(target_name);
  Matrix m(d.x.rows(), d.x.cols() + 1);
  m.leftCols(d.x.cols()) = d.x.values;
  for (Eigen::Index r = 0; r < d.x.rows(); ++r)
    m(r, d.x.cols()) = d.classification() ? d.y_class[static_cast<std::size_t>(r)] : d.y_real[static_cast<std::size_t>(r)];
  write_csv(path, header, m);
  write_text(path + ".json", d.meta.to_json().dump(2) + "\n");
}

}  // namespace gib

#endif  // GIB_DATAGEN_HPP_
