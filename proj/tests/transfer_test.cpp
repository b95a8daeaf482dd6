#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gatgrasp/synth.hpp"
#include "gatgrasp/transfer.hpp"
#include "test_support.hpp"

using namespace gatgrasp;

namespace {

FeatureMap two_cell_map() {
  // 1×2 grid over an 8×4 image: cell centers at u = 1.5 and u = 5.5, v = 1.5.
  return FeatureMap{1, 2, 3, {1.0f, 2.0f, 3.0f, 5.0f, -2.0f, 7.0f}, {8, 4}};
}

// Cosine argmax with explicit loops, sharing nothing with the library
// except cell_center.
GridCell brute_force_argmax(const std::vector<double>& q, const FeatureMap& tgt, const TransferOptions& opts) {
  GridCell best{-1, -1};
  double best_score = -std::numeric_limits<double>::infinity();
  double qn = 0.0;
  for (double x : q) qn += x * x;
  qn = std::sqrt(qn);
  for (int r = 0; r < tgt.h; ++r) {
    for (int c = 0; c < tgt.w; ++c) {
      const PixelPoint center = tgt.cell_center(r, c);
      if (opts.region && !opts.region->contains(center)) continue;
      double dot = 0.0, n = 0.0;
      for (int k = 0; k < tgt.d; ++k) {
        const double f = tgt.data[static_cast<std::size_t>((r * tgt.w + c) * tgt.d + k)];
        dot += f * q[static_cast<std::size_t>(k)];
        n += f * f;
      }
      const double score = n > 0.0 ? dot / (std::sqrt(n) * qn) : 0.0;
      if (score > best_score) {
        best_score = score;
        best = {r, c};
      }
    }
  }
  return best;
}

}  // namespace

TEST(Sample, CellCenterReturnsThatCell) {
  const auto map = two_cell_map();
  const auto f = sample_feature(map, map.cell_center(0, 1));
  EXPECT_EQ(f, (std::vector<double>{5.0, -2.0, 7.0}));
}

TEST(Sample, MidpointAveragesNeighbours) {
  const auto map = two_cell_map();
  const auto f = sample_feature(map, {3.5, 1.5});
  EXPECT_DOUBLE_EQ(f[0], 3.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  EXPECT_DOUBLE_EQ(f[2], 5.0);
}

TEST(Sample, SingleCellGridAlwaysReturnsItsVector) {
  const FeatureMap map{1, 1, 2, {0.25f, -4.0f}, {17, 9}};
  for (double u : {-0.5, 0.0, 3.3, 16.4})
    for (double v : {-0.5, 4.0, 8.49}) EXPECT_EQ(sample_feature(map, {u, v}), (std::vector<double>{0.25, -4.0}));
}

TEST(Sample, OutOfImageIsRejected) {
  EXPECT_ERROR_CODE(sample_feature(two_cell_map(), {8.0, 1.0}), ErrorCode::OutOfBounds);
}

TEST(Transfer, IdentityMapsReturnTheSourceCell) {
  const auto map = synth::random_feature_map(12, 16, 8, 3, {128, 96});
  for (int r = 0; r < map.h; r += 3) {
    for (int c = 0; c < map.w; c += 5) {
      const auto corr = transfer_contact(map, map.cell_center(r, c), map);
      EXPECT_EQ(corr.target_cell, (GridCell{r, c}));
      EXPECT_NEAR(corr.similarity, 1.0, 1e-6);
      EXPECT_EQ(corr.target_pixel, map.cell_center(r, c));
    }
  }
}

TEST(Transfer, ColumnShiftIsRecovered) {
  const auto src = synth::random_feature_map(6, 10, 16, 21, {80, 48});
  FeatureMap tgt = src;
  for (int r = 0; r < src.h; ++r)
    for (int c = 0; c < src.w; ++c)
      std::copy(src.cell(r, c), src.cell(r, c) + src.d, tgt.cell(r, (c + 3) % src.w));
  for (int r = 0; r < src.h; ++r) {
    for (int c = 0; c < src.w; ++c) {
      const auto corr = transfer_contact(src, src.cell_center(r, c), tgt);
      EXPECT_EQ(corr.target_cell, (GridCell{r, (c + 3) % src.w}));
      EXPECT_NEAR(corr.similarity, 1.0, 1e-6);
    }
  }
}

TEST(Transfer, PlantedCorrespondence) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const synth::PlantedPair pair{{2, 3}, {7, 1}};
    const auto fp = synth::synth_featmap_pair(10, 12, 16, seed, {pair});
    const auto corr = transfer_contact(fp.src, fp.truth[0].src_pixel, fp.tgt);
    EXPECT_EQ(corr.target_cell, pair.tgt) << "seed " << seed;
  }
}

TEST(Transfer, MatchesBruteForceScan) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto src = synth::random_feature_map(9, 13, 6, seed, {130, 90});
    const auto tgt = synth::random_feature_map(11, 7, 6, seed + 100, {70, 110});
    const PixelPoint c{37.3 + static_cast<double>(seed), 51.9};
    const auto corr = transfer_contact(src, c, tgt);
    EXPECT_EQ(corr.target_cell, brute_force_argmax(sample_feature(src, c), tgt, {}));
  }
}

TEST(Transfer, RegionRestrictsTheSearch) {
  const auto map = synth::random_feature_map(8, 8, 8, 5, {64, 64});
  TransferOptions opts;
  opts.region = CropRect{32, 32, 32, 32};
  const auto corr = transfer_contact(map, map.cell_center(1, 1), map, opts);
  EXPECT_TRUE(opts.region->contains(corr.target_pixel));
  EXPECT_EQ(corr.target_cell, brute_force_argmax(sample_feature(map, map.cell_center(1, 1)), map, opts));
}

TEST(Transfer, ScalingDescriptorsDoesNotChangeTheResult) {
  const auto src = synth::random_feature_map(6, 6, 8, 2, {48, 48});
  auto tgt = synth::random_feature_map(6, 6, 8, 4, {48, 48});
  const auto base = transfer_contact(src, {20.0, 13.0}, tgt);
  for (auto& x : tgt.data) x *= 7.5f;
  EXPECT_EQ(transfer_contact(src, {20.0, 13.0}, tgt).target_cell, base.target_cell);
}

TEST(Transfer, TiesGoToTheFirstCellInRowMajorOrder) {
  FeatureMap tgt{2, 2, 2, {0, 1, 1, 0, 1, 0, 1, 0}, {4, 4}};
  const FeatureMap src{1, 1, 2, {3, 0}, {4, 4}};
  EXPECT_EQ(transfer_contact(src, {1.0, 1.0}, tgt).target_cell, (GridCell{0, 1}));
}

TEST(Transfer, Errors) {
  const FeatureMap a{1, 1, 2, {1, 0}, {4, 4}};
  const FeatureMap b{1, 1, 3, {1, 0, 0}, {4, 4}};
  EXPECT_ERROR_CODE(transfer_contact(a, {1, 1}, b), ErrorCode::ChannelMismatch);
  const FeatureMap zero{1, 1, 2, {0, 0}, {4, 4}};
  EXPECT_ERROR_CODE(transfer_contact(zero, {1, 1}, a), ErrorCode::ZeroQueryFeature);
}

TEST(FeatureMapValidation, RejectsNaNAndAllZero) {
  FeatureMap m{1, 2, 1, {0.0f, std::nanf("")}, {2, 1}};
  EXPECT_ERROR_CODE(m.validate(), ErrorCode::InvalidArgument);
  m.data = {0.0f, 0.0f};
  EXPECT_ERROR_CODE(m.validate(), ErrorCode::InvalidArgument);
  m.data = {0.0f, 1.0f};
  EXPECT_NO_THROW(m.validate());
}
