#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "segcd/ccl.hpp"

namespace segcd {
namespace {

CclParams params(Connectivity c, std::size_t min_area = 1) {
  CclParams p;
  p.connectivity = c;
  p.min_area = min_area;
  return p;
}

TEST(LabelComponents, LShapeAndSingleton) {
  const LabelRaster r(2, 2, std::vector<ClassCode>{1, 1, 1, 2});
  const auto res = label_components(r, params(Connectivity::four));
  ASSERT_EQ(res.instances.size(), 2u);
  EXPECT_EQ(res.instances[0].class_code, 1);
  EXPECT_EQ(res.instances[0].area, 3u);
  EXPECT_EQ(res.instances[1].class_code, 2);
  EXPECT_EQ(res.instances[1].area, 1u);
  EXPECT_EQ(std::vector<InstanceId>(res.map.labels().begin(), res.map.labels().end()),
            (std::vector<InstanceId>{1, 1, 1, 2}));
}

TEST(LabelComponents, UniformRaster) {
  const LabelRaster r(8, 8, ClassCode{5});
  const auto res = label_components(r, params(Connectivity::four));
  ASSERT_EQ(res.instances.size(), 1u);
  EXPECT_EQ(res.instances[0].area, 64u);
  EXPECT_EQ(res.instances[0].bbox, (Box{0, 0, 8, 8}));
  EXPECT_DOUBLE_EQ(res.instances[0].centroid.x, 3.5);
}

TEST(LabelComponents, DiagonalPairDependsOnConnectivity) {
  LabelRaster r(3, 3, ClassCode{0});
  r.set(0, 0, 1);
  r.set(1, 1, 1);
  auto count_class1 = [](const CclResult& res) {
    return std::count_if(res.instances.begin(), res.instances.end(),
                         [](const Instance& i) { return i.class_code == 1; });
  };
  EXPECT_EQ(count_class1(label_components(r, params(Connectivity::four))), 2);
  EXPECT_EQ(count_class1(label_components(r, params(Connectivity::eight))), 1);
}

TEST(LabelComponents, MinAreaAndIgnoreCodes) {
  // Class 2 blob of 2 pixels, class 3 blob of 4 pixels, class 1 elsewhere.
  LabelRaster r(4, 4, ClassCode{1});
  r.set(0, 0, 2);
  r.set(1, 0, 2);
  for (std::size_t y = 2; y < 4; ++y)
    for (std::size_t x = 2; x < 4; ++x) r.set(x, y, 3);

  auto p = params(Connectivity::four, 3);
  auto res = label_components(r, p);
  ASSERT_EQ(res.instances.size(), 2u);
  EXPECT_EQ(res.map.at(0, 0), 0u);
  EXPECT_EQ(res.instances[0].class_code, 1);
  EXPECT_EQ(res.instances[1].class_code, 3);
  EXPECT_EQ(res.map.at(3, 3), 2u);

  p.ignore_codes = {1};
  res = label_components(r, p);
  ASSERT_EQ(res.instances.size(), 1u);
  EXPECT_EQ(res.instances[0].class_code, 3);
  EXPECT_EQ(res.instances[0].id, 1u);
  EXPECT_EQ(res.map.at(1, 1), 0u);
}

TEST(LabelComponents, RejectsBadParams) {
  EXPECT_THROW(connectivity_from_int(6), ParameterError);
  CclParams p;
  p.min_area = 0;
  EXPECT_THROW(label_components(LabelRaster(2, 2), p), ParameterError);
}

TEST(LabelComponentsProperty, MatchesFloodFill) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const std::size_t w = 1 + rng() % 64, h = 1 + rng() % 64;
    const unsigned classes = 1 + static_cast<unsigned>(rng() % 8);
    const auto px = oracle::random_classes(rng, w, h, classes);
    const LabelRaster r(w, h, px);
    for (int conn : {4, 8}) {
      const auto res = label_components(r, params(connectivity_from_int(conn)));
      const auto expected = oracle::FloodFill(px, w, h, conn).run();
      const std::vector<InstanceId> got(res.map.labels().begin(), res.map.labels().end());
      ASSERT_TRUE(oracle::same_partition(got, expected)) << "case " << i << " conn " << conn;
    }
  }
}

TEST(LabelComponentsProperty, InvariantsHold) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 100; ++i) {
    const std::size_t w = 1 + rng() % 48, h = 1 + rng() % 48;
    const auto px = oracle::random_classes(rng, w, h, 1 + static_cast<unsigned>(rng() % 6));
    const LabelRaster r(w, h, px);
    CclParams p = params(rng() % 2 ? Connectivity::four : Connectivity::eight, 1 + rng() % 20);
    if (rng() % 3 == 0) p.ignore_codes = {static_cast<ClassCode>(rng() % 6)};
    const auto res = label_components(r, p);
    const auto again = label_components(r, p);
    ASSERT_EQ(res.map, again.map);

    // Ids 1..N, first pixels in scan order, attributes consistent with masks.
    std::vector<std::size_t> first_pixel;
    for (std::size_t k = 0; k < res.instances.size(); ++k) {
      const auto& inst = res.instances[k];
      ASSERT_EQ(inst.id, k + 1);
      ASSERT_GE(inst.area, p.min_area);
      ASSERT_FALSE(p.ignore_codes.contains(inst.class_code));
      const auto g = mask_geometry(inst.mask);
      ASSERT_EQ(g.area, inst.area);
      ASSERT_EQ(g.bbox, inst.bbox);
      first_pixel.push_back(inst.mask.spans().front().begin);
      for (const auto& s : inst.mask.spans()) {
        for (std::size_t q = s.begin; q < s.end; ++q) {
          ASSERT_EQ(res.map.labels()[q], inst.id);
          ASSERT_EQ(px[q], inst.class_code);
        }
      }
    }
    ASSERT_TRUE(std::is_sorted(first_pixel.begin(), first_pixel.end()));

    // Coverage: a pixel is 0 exactly when its flood-fill component was suppressed.
    const auto ff = oracle::FloodFill(px, w, h, static_cast<int>(p.connectivity)).run();
    std::map<int, std::size_t> size;
    for (int l : ff) ++size[l];
    for (std::size_t q = 0; q < px.size(); ++q) {
      const bool suppressed = size[ff[q]] < p.min_area || p.ignore_codes.contains(px[q]);
      ASSERT_EQ(res.map.labels()[q] == 0, suppressed);
    }
  }
}

TEST(MaskComponents, SplitsBlobs) {
  Bits bits(5 * 3, 0);
  bits[0] = bits[1] = 1;       // blob A
  bits[2 * 5 + 4] = 1;         // blob B
  bits[1 * 5 + 2] = 1;         // diagonal to A only under 8-connectivity
  const auto m = rle_encode(bits, 5, 3);
  EXPECT_EQ(mask_components(m, Connectivity::four).size(), 3u);
  EXPECT_EQ(mask_components(m, Connectivity::eight).size(), 2u);
  EXPECT_TRUE(mask_components(BinaryMask::empty({5, 3}), Connectivity::four).empty());
}

}  // namespace
}  // namespace segcd
