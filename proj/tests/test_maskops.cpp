#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pfpose/errors.hpp"
#include "pfpose/maskops.hpp"

using namespace pfpose;

namespace {

BinaryMask random_mask(std::mt19937_64& rng, int rows, int cols, double p) {
  std::bernoulli_distribution b(p);
  BinaryMask m(rows, cols);
  for (auto& v : m.data()) v = b(rng) ? 1 : 0;
  return m;
}

std::vector<std::uint8_t> raw(const BinaryMask& m) { return {m.data().begin(), m.data().end()}; }

}  // namespace

TEST(MedianFilter, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto m = random_mask(rng, 16, 16, 0.2 + 0.012 * i);
    EXPECT_EQ(raw(median_filter_3x3(m)), oracle::median3(raw(m), 16, 16));
  }
}

TEST(MedianFilter, NonSquareAndTinyImages) {
  std::mt19937_64 rng(2);
  for (auto [r, c] : std::vector<std::pair<int, int>>{{1, 1}, {1, 7}, {5, 2}, {9, 13}}) {
    const auto m = random_mask(rng, r, c, 0.5);
    EXPECT_EQ(raw(median_filter_3x3(m)), oracle::median3(raw(m), r, c));
  }
}

TEST(MedianFilter, IdempotentOnConstants) {
  for (std::uint8_t v : {0, 1}) {
    const BinaryMask m(12, 9, 1, v);
    EXPECT_EQ(median_filter_3x3(m), m);
    EXPECT_EQ(median_filter_3x3(median_filter_3x3(m)), m);
  }
}

TEST(MedianFilter, RemovesIsolatedPixelAndFillsHole) {
  BinaryMask speck(7, 7);
  speck(3, 3) = 1;
  EXPECT_EQ(count_nonzero(median_filter_3x3(speck)), 0u);
  BinaryMask hole(7, 7, 1, 1);
  hole(3, 3) = 0;
  EXPECT_EQ(count_nonzero(median_filter_3x3(hole)), 49u);
}

TEST(Dilate, MatchesNaiveOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto m = random_mask(rng, 16, 16, 0.01 + 0.004 * i);
    EXPECT_EQ(raw(dilate_5x5(m)), oracle::dilate5(raw(m), 16, 16));
  }
}

TEST(Dilate, SupersetOfInput) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto m = random_mask(rng, 16, 16, 0.05);
    const auto d = dilate_5x5(m);
    for (std::size_t k = 0; k < m.data().size(); ++k) EXPECT_GE(d.data()[k], m.data()[k]);
  }
}

TEST(Dilate, SinglePixelGrowsToFiveByFive) {
  BinaryMask m(9, 9);
  m(4, 4) = 1;
  const auto d = dilate_5x5(m);
  EXPECT_EQ(count_nonzero(d), 25u);
  EXPECT_EQ(d(2, 2), 1);
  EXPECT_EQ(d(1, 4), 0);
}

TEST(CleanMask, IsMedianThenDilate) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto m = random_mask(rng, 16, 16, 0.4);
    EXPECT_EQ(raw(clean_mask(m)), oracle::dilate5(oracle::median3(raw(m), 16, 16), 16, 16));
  }
}

TEST(MaskBbox, TightHalfOpenBox) {
  BinaryMask m(10, 12);
  m(2, 3) = 1;
  m(6, 9) = 1;
  EXPECT_EQ(mask_bbox(m), (BoundingBox{2, 3, 7, 10}));
  EXPECT_THROW(mask_bbox(BinaryMask(4, 4)), EmptyMask);
}

TEST(MaskedCrop, ZeroesOutsideMaskAndCutsToBox) {
  RgbImage rgb(6, 8, 3, 50);
  DepthImage depth(6, 8, 1, 900);
  BinaryMask m(6, 8);
  m(1, 2) = m(1, 3) = m(3, 2) = 1;
  const auto c = masked_crop(rgb, depth, m, 5);
  EXPECT_EQ(c.class_id, 5);
  EXPECT_EQ(c.bbox, (BoundingBox{1, 2, 4, 4}));
  ASSERT_EQ(c.rgb_crop.rows(), 3);
  ASSERT_EQ(c.rgb_crop.cols(), 2);
  EXPECT_EQ(c.depth_crop(0, 0), 900);
  EXPECT_EQ(c.depth_crop(1, 0), 0);
  EXPECT_EQ(c.rgb_crop(1, 1, 2), 0);
  EXPECT_EQ(c.rgb_crop(2, 0, 1), 50);
  EXPECT_EQ(count_nonzero(c.mask_crop), 3u);
  EXPECT_THROW(masked_crop(rgb, depth, BinaryMask(6, 8), 1), EmptyMask);
  EXPECT_THROW(masked_crop(rgb, DepthImage(5, 8), m, 1), InvalidArgument);
}
