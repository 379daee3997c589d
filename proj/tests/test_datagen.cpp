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

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <set>

#include "gib/datagen.hpp"
#include "test_util.hpp"

namespace gib {
namespace {

using testing_util::slurp;
using testing_util::TempDir;

TEST(ForceToOne, EpsMarginalAtOneMillion) {
  const NoiseSpec noise{1.0 / 3.0, 3};
  const std::size_t m = 1000000;
  const auto s = gen_force_to_one(noise, m, 42);
  std::vector<double> counts(4, 0.0);
  for (int e : s.eps) counts[static_cast<std::size_t>(e)] += 1.0;
  const double p0 = 2.0 / 3.0, pi = 1.0 / 9.0;
  EXPECT_LT(std::abs(counts[0] / m - p0), 3.0 * std::sqrt(p0 * (1 - p0) / m));
  for (int i = 1; i <= 3; ++i)
    EXPECT_LT(std::abs(counts[static_cast<std::size_t>(i)] / m - pi), 3.0 * std::sqrt(pi * (1 - pi) / m)) << i;
}

TEST(ForceToOne, NoFlipAndSingleBit) {
  const auto none = gen_force_to_one({0.0, 4}, 500, 1);
  EXPECT_EQ(none.x_noisy, none.x_clean);
  for (int e : none.eps) EXPECT_EQ(e, 0);
  const auto one = gen_force_to_one({1.0, 1}, 200, 2);
  for (Eigen::Index r = 0; r < 200; ++r) {
    EXPECT_EQ(one.x_noisy(r, 0), 1);
    EXPECT_EQ(one.eps[static_cast<std::size_t>(r)], 1);
  }
}

TEST(ForceToOne, ForcedCoordinateIsOne) {
  const auto s = gen_force_to_one({0.5, 5}, 2000, 3);
  for (Eigen::Index r = 0; r < 2000; ++r) {
    const int e = s.eps[static_cast<std::size_t>(r)];
    for (int c = 0; c < 5; ++c) {
      if (e == c + 1) EXPECT_EQ(s.x_noisy(r, c), 1);
      else EXPECT_EQ(s.x_noisy(r, c), s.x_clean(r, c));
    }
  }
}

TEST(ForceToOne, NoiseSpecValidation) {
  EXPECT_THROW(gen_force_to_one({1.5, 3}, 1, 0), InvalidArgument);
  EXPECT_THROW(gen_force_to_one({0.5, 0}, 1, 0), InvalidArgument);
}

TEST(ForceToOne, EnumerationBasics) {
  for (int n = 1; n <= 6; ++n) {
    const auto pmf = enumerate_force_to_one({1.0 / 3.0, n});
    EXPECT_NO_THROW(pmf.validate());
    EXPECT_EQ(pmf.support.rows(), (1 << n) * (n + 1));
    std::map<int, double> clean;
    for (Eigen::Index r = 0; r < pmf.support.rows(); ++r) {
      int v = 0;
      for (int c = 0; c < n; ++c) v = v * 2 + pmf.support(r, c);
      clean[v] += pmf.probs[static_cast<std::size_t>(r)];
    }
    EXPECT_EQ(clean.size(), std::size_t{1} << n);
    for (const auto& [v, p] : clean) EXPECT_NEAR(p, 1.0 / (1 << n), 1e-15);
  }
  EXPECT_THROW(enumerate_force_to_one({0.3, kMaxEnumerationBits + 1}), InvalidArgument);
}

TEST(ForceToOne, ExactOrderingAtThreeBits) {
  const auto pmf = enumerate_force_to_one({1.0 / 3.0, 3});
  const ForceToOneLayout layout{3};
  const IntMatrix noisy = pmf.support.middleCols(3, 3);
  auto mi_with_eps = [&](SynergyFunction f) {
    const auto ext = append_column(pmf, apply_synergy_function(noisy, f));
    const std::vector<int> fc{static_cast<int>(ext.support.cols()) - 1}, ec{layout.eps()};
    return exact_mi(ext, fc, ec);
  };
  EXPECT_GT(mi_with_eps(SynergyFunction::kF1), mi_with_eps(SynergyFunction::kF3));
}

TEST(ForceToOne, SampledMatchesEnumerated) {
  for (int n = 1; n <= 4; ++n) {
    const NoiseSpec noise{1.0 / 3.0, n};
    const auto pmf = enumerate_force_to_one(noise);
    const std::size_t m = 1000000;
    const auto s = gen_force_to_one(noise, m, 100 + static_cast<std::uint64_t>(n));
    // Key on (clean, noisy, eps) tuples.
    auto key = [n](auto row_clean, auto row_noisy, int eps) {
      long k = eps;
      for (int c = 0; c < n; ++c) k = k * 4 + row_clean(c) * 2 + row_noisy(c);
      return k;
    };
    std::map<long, double> p, q;
    for (Eigen::Index r = 0; r < pmf.support.rows(); ++r)
      p[key([&](int c) { return pmf.support(r, c); }, [&](int c) { return pmf.support(r, n + c); },
            pmf.support(r, 2 * n))] += pmf.probs[static_cast<std::size_t>(r)];
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(m); ++r)
      q[key([&](int c) { return s.x_clean(r, c); }, [&](int c) { return s.x_noisy(r, c); },
            s.eps[static_cast<std::size_t>(r)])] += 1.0 / static_cast<double>(m);
    double tv = 0.0;
    for (const auto& [k, v] : p) tv += std::abs(v - (q.count(k) ? q[k] : 0.0));
    for (const auto& [k, v] : q)
      if (!p.count(k)) tv += v;
    EXPECT_LT(tv / 2.0, 0.005) << n;
  }
}

TEST(SynergyFunctions, Definitions) {
  IntMatrix x(2, 3);
  x << 0, 0, 0, 1, 0, 1;
  EXPECT_EQ(apply_synergy_function(x, SynergyFunction::kF1), (std::vector<int>{0, 1}));
  EXPECT_EQ(apply_synergy_function(x, SynergyFunction::kF2), (std::vector<int>{0, 1}));
  EXPECT_EQ(apply_synergy_function(x, SynergyFunction::kF3), (std::vector<int>{0, 0}));
  IntMatrix two(4, 2);
  two << 0, 0, 0, 1, 1, 0, 1, 1;
  EXPECT_EQ(apply_synergy_function(two, SynergyFunction::kF2), apply_synergy_function(two, SynergyFunction::kF3));
  EXPECT_THROW(apply_synergy_function(IntMatrix::Zero(2, 1), SynergyFunction::kF2), InvalidArgument);
  EXPECT_EQ(parse_synergy_function("f3"), SynergyFunction::kF3);
  EXPECT_THROW(parse_synergy_function("f4"), InvalidArgument);
}

TEST(SimpleFunctions, ClosedForms) {
  const double ab[] = {2, 3};
  EXPECT_EQ(evaluate(SimpleFunction::kAdd, ab), 5.0);
  EXPECT_EQ(evaluate(SimpleFunction::kMul, ab), 6.0);
  const double abc[] = {1, 2, 3};
  EXPECT_EQ(evaluate(SimpleFunction::kSp2, abc), 14.0);
  EXPECT_EQ(evaluate(SimpleFunction::kSp1, abc), 11.0);
  const double abcd[] = {1, 2, 3, 4};
  EXPECT_EQ(evaluate(SimpleFunction::kSp3, abcd), 24.0);
}

TEST(SimpleFunctions, GeneratorShapeRangeAndTargets) {
  for (auto f : {SimpleFunction::kAdd, SimpleFunction::kMul, SimpleFunction::kSp1, SimpleFunction::kSp2,
                 SimpleFunction::kSp3}) {
    const auto range = default_train_range(f);
    const auto d = gen_simple_function(f, kSimpleFunctionSamples, range, 9);
    EXPECT_NO_THROW(d.validate());
    EXPECT_EQ(d.x.cols(), arity(f));
    EXPECT_EQ(d.size(), 1500u);
    EXPECT_GE(d.x.values.minCoeff(), range.lo);
    EXPECT_LT(d.x.values.maxCoeff(), range.hi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      std::vector<double> v(d.x.values.row(r).data(), d.x.values.row(r).data() + d.x.cols());
      double want = 0.0;
      switch (f) {
        case SimpleFunction::kAdd: want = v[0] + v[1]; break;
        case SimpleFunction::kMul: want = v[0] * v[1]; break;
        case SimpleFunction::kSp1: want = v[0] * v[1] + v[1] * v[2] + v[2] * v[0]; break;
        case SimpleFunction::kSp2: want = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; break;
        case SimpleFunction::kSp3: want = v[0] * v[1] + v[1] * v[2] + v[2] * v[3] + v[3] * v[0]; break;
      }
      ASSERT_EQ(d.y_real[i], want);
    }
    EXPECT_EQ(parse_simple_function(to_string(f)), f);
  }
  EXPECT_EQ(default_train_range(SimpleFunction::kAdd).lo, 0.0);
  EXPECT_EQ(default_train_range(SimpleFunction::kMul).lo, -10.0);
  EXPECT_EQ(default_test_range(SimpleFunction::kSp3).hi, 1000.0);
  EXPECT_THROW(gen_simple_function(SimpleFunction::kAdd, 10, {1, 1}, 0), InvalidArgument);
  EXPECT_THROW(parse_simple_function("div"), InvalidArgument);
}

TEST(SimpleFunctions, PureFunctionOfSeed) {
  const auto a = gen_simple_function(SimpleFunction::kSp1, 100, {-10, 10}, 5);
  const auto b = gen_simple_function(SimpleFunction::kSp1, 100, {-10, 10}, 5);
  const auto c = gen_simple_function(SimpleFunction::kSp1, 100, {-10, 10}, 6);
  EXPECT_EQ(a.x.values, b.x.values);
  EXPECT_EQ(a.y_real, b.y_real);
  EXPECT_NE(a.x.values, c.x.values);
}

TEST(BinaryClassification, AllPatternsBalancedAndInvariant) {
  for (std::uint64_t seed : {0u, 1u, 7u}) {
    const auto d = gen_binary_classification(seed);
    ASSERT_EQ(d.size(), 4096u);
    EXPECT_EQ(d.x.cols(), kBinaryBits);
    EXPECT_EQ(d.n_classes, 2);
    std::vector<int> label_of(4096, -1);
    std::set<std::uint32_t> seen;
    int ones = 0;
    for (Eigen::Index r = 0; r < 4096; ++r) {
      const auto v = pattern_of_row(d.x, r);
      seen.insert(v);
      label_of[v] = d.y_class[static_cast<std::size_t>(r)];
      ones += label_of[v];
    }
    EXPECT_EQ(seen.size(), 4096u);
    EXPECT_EQ(ones, 2048);
    for (std::uint32_t v = 0; v < 4096; ++v) ASSERT_EQ(label_of[v], label_of[rotate12(v)]) << v;
  }
}

TEST(BinaryClassification, SeedDeterminism) {
  const auto a = gen_binary_classification(3), b = gen_binary_classification(3), c = gen_binary_classification(4);
  EXPECT_EQ(a.y_class, b.y_class);
  EXPECT_NE(a.y_class, c.y_class);
}

TEST(Idx, RoundTripAndScaling) {
  TempDir tmp;
  std::vector<std::vector<unsigned char>> images(3, std::vector<unsigned char>(28 * 28));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < images[i].size(); ++p) images[i][p] = static_cast<unsigned char>((p * 7 + i * 31) % 256);
  images[0][0] = 255;
  images[0][1] = 0;
  const std::vector<unsigned char> labels{3, 0, 9};
  write_idx(tmp.file("img"), tmp.file("lbl"), images, labels, 28, 28);
  const auto d = load_idx(tmp.file("img"), tmp.file("lbl"));
  EXPECT_EQ(d.x.cols(), 784);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.x.values(0, 0), 1.0);
  EXPECT_EQ(d.x.values(0, 1), 0.0);
  EXPECT_EQ(d.y_class, (std::vector<int>{3, 0, 9}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 784; ++p)
      ASSERT_EQ(d.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)), images[i][p] / 255.0);
  // Write back from the scaled values: identical bytes.
  std::vector<std::vector<unsigned char>> back(3, std::vector<unsigned char>(784));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 784; ++p)
      back[i][p] = static_cast<unsigned char>(
          std::lround(d.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) * 255.0));
  write_idx(tmp.file("img2"), tmp.file("lbl2"), back, labels, 28, 28);
  EXPECT_EQ(slurp(tmp.file("img")), slurp(tmp.file("img2")));
}

TEST(Idx, ErrorsNameByteOffset) {
  TempDir tmp;
  const std::vector<std::vector<unsigned char>> images(2, std::vector<unsigned char>(4, 1));
  write_idx(tmp.file("img"), tmp.file("lbl"), images, {1, 2}, 2, 2);
  auto expect_offset = [](const std::function<void()>& fn, const std::string& needle) {
    try {
      fn();
      ADD_FAILURE() << "no exception";
    } catch (const InvalidArgument& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  // Bad magic: swap the files.
  expect_offset([&] { load_idx(tmp.file("lbl"), tmp.file("img")); }, "byte offset 0");
  // Truncated payload.
  std::string img = slurp(tmp.file("img"));
  write_text(tmp.file("short"), img.substr(0, img.size() - 1));
  expect_offset([&] { load_idx(tmp.file("short"), tmp.file("lbl")); }, "byte offset " + std::to_string(img.size() - 1));
  // Count mismatch.
  write_idx(tmp.file("img3"), tmp.file("lbl3"), {images[0]}, {1}, 2, 2);
  expect_offset([&] { load_idx(tmp.file("img"), tmp.file("lbl3")); }, "byte offset 4");
  // Label out of range.
  write_idx(tmp.file("img4"), tmp.file("lbl4"), images, {1, 12}, 2, 2);
  expect_offset([&] { load_idx(tmp.file("img4"), tmp.file("lbl4")); }, "byte offset 9");
  EXPECT_THROW(load_idx(tmp.file("missing"), tmp.file("lbl")), IoError);
}

TEST(Export, CsvWithSidecar) {
  TempDir tmp;
  const auto d = gen_simple_function(SimpleFunction::kAdd, 4, {0, 10}, 1);
  export_dataset_csv(d, tmp.file("add.csv"));
  const auto t = read_csv(tmp.file("add.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "target"}));
  EXPECT_EQ(t.values.rows(), 4);
  const auto meta = nlohmann::json::parse(slurp(tmp.file("add.csv.json")));
  EXPECT_EQ(meta["generator"], "simple_function");
  EXPECT_EQ(meta["seed"], 1);
}

}  // namespace
}  // namespace gib
