// Copyright 2026 The tocomm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tocomm/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "gtest/gtest.h"
#include "tocomm/errors.hpp"

namespace tocomm::data {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tocomm_datasets_test";
  fs::create_directories(dir);
  return dir / name;
}

void put_be32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx(const fs::path& images, const fs::path& labels, int n, int rows, int cols, int label_count,
               std::uint32_t image_magic = 0x00000803U, bool truncate = false) {
  std::ofstream img(images, std::ios::binary);
  put_be32(img, image_magic);
  put_be32(img, n);
  put_be32(img, rows);
  put_be32(img, cols);
  const int pixels = n * rows * cols - (truncate ? 5 : 0);
  for (int i = 0; i < pixels; ++i) img.put(static_cast<char>(i % 256));
  std::ofstream lab(labels, std::ios::binary);
  put_be32(lab, 0x00000801U);
  put_be32(lab, label_count);
  for (int i = 0; i < label_count; ++i) lab.put(static_cast<char>(i % 10));
}

// Fraction of examples whose colour channel agrees with the label.
double colour_agreement(const Dataset& ds) {
  const int plane = ds.shape().height * ds.shape().width;
  std::size_t agree = 0;
  for (const auto& e : ds.examples()) {
    double c0 = 0.0, c1 = 0.0;
    for (int i = 0; i < plane; ++i) {
      c0 += e.x[i];
      c1 += e.x[plane + i];
    }
    agree += static_cast<std::size_t>((c1 > c0 ? 1 : 0) == e.y);
  }
  return static_cast<double>(agree) / ds.size();
}

TEST(DatasetTest, ValidatesInvariants) {
  const TensorShape s{1, 1, 2};
  EXPECT_THROW(Dataset(s, 2, 1, {}), InvalidArgument);
  EXPECT_THROW(Dataset(s, 2, 1, {{{0.1, 0.2}, 2, 0}}), InvalidArgument);
  EXPECT_THROW(Dataset(s, 2, 1, {{{0.1, 0.2}, 0, 1}}), InvalidArgument);
  EXPECT_THROW(Dataset(s, 2, 1, {{{0.1}, 0, 0}}), ShapeError);
  EXPECT_THROW(Dataset(s, 2, 1, {{{0.1, NAN}, 0, 0}}), InvalidArgument);
  EXPECT_NO_THROW(Dataset(s, 2, 1, {{{0.1, 0.2}, 1, 0}}));
}

TEST(SyntheticDigitsTest, BalancedBoundedDeterministic) {
  const Dataset a = make_synthetic_digits(200, 5);
  const Dataset b = make_synthetic_digits(200, 5);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  EXPECT_NE(a.content_hash(), make_synthetic_digits(200, 6).content_hash());
  EXPECT_EQ(a.class_count(), 10);
  std::vector<int> counts(10, 0);
  for (const auto& e : a.examples()) {
    ++counts[e.y];
    for (double v : e.x) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
  for (int c : counts) EXPECT_EQ(c, 20);
}

TEST(SyntheticDigitsTest, ExcludedClassesNeverAppear) {
  DigitOptions o;
  o.exclude_classes = {3, 7};
  const Dataset ds = make_synthetic_digits(100, 1, o);
  for (const auto& e : ds.examples()) {
    EXPECT_NE(e.y, 3);
    EXPECT_NE(e.y, 7);
  }
}

TEST(ColoredMnistTest, AgreementMatchesRequestedCorrelation) {
  const Dataset base = make_synthetic_digits(20000, 1);
  const std::vector<double> train_corr{0.9, 0.8};
  const Dataset train = make_colored_mnist(base, train_corr, 0.25, 2);
  ASSERT_EQ(train.env_count(), 2);
  EXPECT_EQ(train.shape().channels, 2);
  for (int env = 0; env < 2; ++env) {
    const Dataset part = train.environment(env);
    EXPECT_GE(part.size(), 10000u - 1);
    EXPECT_NEAR(colour_agreement(part), train_corr[env], 0.02);
  }
  const std::vector<double> test_corr{0.1};
  const Dataset test = make_colored_mnist(base, test_corr, 0.25, 3);
  EXPECT_NEAR(colour_agreement(test), 0.1, 0.02);
}

TEST(ColoredMnistTest, LabelIsFlippedDigitThreshold) {
  const Dataset base = make_synthetic_digits(20000, 4);
  const std::vector<double> corr{0.5};
  const Dataset ds = make_colored_mnist(base, corr, 0.25, 5);
  std::size_t flipped = 0;
  for (const auto& e : ds.examples()) flipped += static_cast<std::size_t>(e.y != (e.source_class < 5 ? 1 : 0));
  EXPECT_NEAR(static_cast<double>(flipped) / ds.size(), 0.25, 0.02);
}

TEST(ColoredMnistTest, DegenerateCorrelationIsExact) {
  const Dataset base = make_synthetic_digits(500, 6);
  const std::vector<double> corr{1.0};
  const Dataset ds = make_colored_mnist(base, corr, 0.0, 7);
  EXPECT_DOUBLE_EQ(colour_agreement(ds), 1.0);
}

TEST(ColoredMnistTest, DeterministicAndValidated) {
  const Dataset base = make_synthetic_digits(300, 8);
  const std::vector<double> corr{0.9, 0.8};
  EXPECT_EQ(make_colored_mnist(base, corr, 0.25, 9), make_colored_mnist(base, corr, 0.25, 9));
  const std::vector<double> bad{1.2};
  EXPECT_THROW(make_colored_mnist(base, bad, 0.25, 9), InvalidArgument);
  EXPECT_THROW(make_colored_mnist(base, corr, 0.6, 9), InvalidArgument);
  EXPECT_THROW(make_colored_mnist(Dataset(), corr, 0.25, 9), InvalidArgument);
}

double correlation(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

TEST(SyntheticGaussianTest, CorrelationStructure) {
  const auto g = make_synthetic_gaussian(3, 0.9, 100000, 1);
  ASSERT_EQ(g.u.rows(), 100000);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(correlation(g.u.col(j), g.v.col(j)), 0.9, 0.01);
    EXPECT_NEAR(g.u.col(j).mean(), 0.0, 0.02);
    EXPECT_NEAR(g.u.col(j).squaredNorm() / 100000.0, 1.0, 0.02);
  }
  const double tol = 3.0 / std::sqrt(100000.0);
  EXPECT_NEAR(correlation(g.u.col(0), g.v.col(1)), 0.0, tol);
  EXPECT_NEAR(correlation(g.u.col(1), g.u.col(2)), 0.0, tol);
}

TEST(SyntheticGaussianTest, IndependentWhenRhoZero) {
  const auto g = make_synthetic_gaussian(1, 0.0, 50000, 2);
  EXPECT_NEAR(correlation(g.u.col(0), g.v.col(0)), 0.0, 3.0 / std::sqrt(50000.0));
}

TEST(SyntheticGaussianTest, RejectsBadArguments) {
  EXPECT_THROW(make_synthetic_gaussian(1, 1.0, 10, 1), InvalidArgument);
  EXPECT_THROW(make_synthetic_gaussian(1, -1.5, 10, 1), InvalidArgument);
  EXPECT_THROW(make_synthetic_gaussian(1, 0.5, 1, 1), InvalidArgument);
}

TEST(AnchorTest, UniformExhaustiveIsSortedRange) {
  const Dataset ds = make_synthetic_digits(30, 1);
  const AnchorSet a = select_anchors(ds, 30, AnchorStrategy::kUniform, 4);
  ASSERT_EQ(a.k(), 30u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(a.indices[i], i);
}

TEST(AnchorTest, PerClassBalance) {
  const Dataset ds = make_synthetic_digits(200, 2);
  const AnchorSet one = select_anchors(ds, 10, AnchorStrategy::kPerClass, 5);
  std::set<int> classes;
  for (const auto& e : one.examples) classes.insert(e.y);
  EXPECT_EQ(classes.size(), 10u);

  const AnchorSet many = select_anchors(ds, 25, AnchorStrategy::kPerClass, 5);
  std::vector<int> counts(10, 0);
  for (const auto& e : many.examples) ++counts[e.y];
  for (int c : counts) {
    EXPECT_GE(c, 2);
    EXPECT_LE(c, 3);
  }
}

TEST(AnchorTest, DeterministicDistinctAndValidated) {
  const Dataset ds = make_synthetic_digits(100, 3);
  const AnchorSet a = select_anchors(ds, 16, AnchorStrategy::kUniform, 7);
  const AnchorSet b = select_anchors(ds, 16, AnchorStrategy::kUniform, 7);
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_NE(a.hash, select_anchors(ds, 16, AnchorStrategy::kUniform, 8).hash);
  EXPECT_TRUE(std::is_sorted(a.indices.begin(), a.indices.end()));
  EXPECT_EQ(std::set<std::size_t>(a.indices.begin(), a.indices.end()).size(), 16u);
  for (std::size_t i = 0; i < a.k(); ++i) EXPECT_EQ(a.examples[i], ds[a.indices[i]]);
  EXPECT_THROW(select_anchors(ds, 1, AnchorStrategy::kUniform, 7), InvalidArgument);
  EXPECT_THROW(select_anchors(ds, 101, AnchorStrategy::kUniform, 7), InvalidArgument);
  EXPECT_THROW(select_anchors(ds, 5, AnchorStrategy::kPerClass, 7), InvalidArgument);
  EXPECT_EQ(parse_anchor_strategy("per-class"), AnchorStrategy::kPerClass);
  EXPECT_THROW(parse_anchor_strategy("random"), InvalidArgument);
}

TEST(IdxTest, LoadsCanonicalPair) {
  const fs::path img = temp_path("ok-images.idx"), lab = temp_path("ok-labels.idx");
  write_idx(img, lab, 10, 28, 28, 10);
  const Dataset ds = load_idx(img, lab);
  EXPECT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.shape().channels, 1);
  EXPECT_EQ(ds.shape().height, 28);
  EXPECT_EQ(ds.shape().width, 28);
  EXPECT_DOUBLE_EQ(ds[0].x[1], 1.0 / 255.0);
  EXPECT_EQ(ds[3].y, 3);
}

TEST(IdxTest, RejectsBadFiles) {
  const fs::path img = temp_path("bad-images.idx"), lab = temp_path("bad-labels.idx");
  write_idx(img, lab, 10, 4, 4, 10, 0x00000801U);
  EXPECT_THROW(load_idx(img, lab), FormatError);
  write_idx(img, lab, 10, 4, 4, 10, 0x00000803U, true);
  EXPECT_THROW(load_idx(img, lab), FormatError);
  write_idx(img, lab, 10, 4, 4, 9);
  EXPECT_THROW(load_idx(img, lab), ConsistencyError);
  EXPECT_THROW(load_idx(temp_path("missing.idx"), lab), FormatError);
}

TEST(CsvTest, LoadsRowsInOrder) {
  const fs::path p = temp_path("three.csv");
  {
    std::ofstream os(p);
    os << "a,y,b\n0.5,1,0.25\n0,0,1\n1,2,0\n";
  }
  const Dataset ds = load_csv(p, "y");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.class_count(), 3);
  EXPECT_EQ(ds[0].y, 1);
  EXPECT_EQ(ds[0].x, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(ds[2].y, 2);
  EXPECT_THROW(load_csv(p, "label"), FormatError);
}

TEST(CsvTest, SaveLoadRoundTrip) {
  const Dataset base = make_synthetic_digits(40, 9);
  const std::vector<double> corr{0.9, 0.8};
  const Dataset ds = make_colored_mnist(base, corr, 0.25, 10);
  const fs::path p = temp_path("roundtrip.csv");
  save_csv(ds, p);
  const Dataset back = load_csv(p, "y");
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.env_count(), 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back[i].y, ds[i].y);
    EXPECT_EQ(back[i].d, ds[i].d);
    EXPECT_EQ(back[i].x, ds[i].x);
  }
}

TEST(GaussianBlobsTest, ShapeAndRange) {
  const Dataset ds = make_gaussian_blobs(300, 5, 4, 0.1, 1);
  EXPECT_EQ(ds.shape().width, 5);
  EXPECT_EQ(ds.class_count(), 4);
  for (const auto& e : ds.examples())
    for (double v : e.x) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  EXPECT_EQ(ds, make_gaussian_blobs(300, 5, 4, 0.1, 1));
}

}  // namespace
}  // namespace tocomm::data
