#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "segcd/ccl.hpp"
#include "segcd/noprompt.hpp"

namespace segcd {
namespace {

Instance box_instance(Extent e, Box b, InstanceId id = 1, ClassCode cls = 2) {
  return Instance::from_mask(id, cls, box_mask(e, b));
}

AggregationParams with_theta(double theta, std::size_t min_intersection = 1) {
  AggregationParams p;
  p.overlap_threshold = theta;
  p.min_intersection = min_intersection;
  return p;
}

TEST(IntersectingMasks, OrderedByCentroidDistance) {
  const Extent e{16, 16};
  const auto inst = box_instance(e, {4, 4, 9, 9});
  ASSERT_DOUBLE_EQ(inst.centroid.x, 8.0);
  const MaskSet masks(16, 16, {box_mask(e, {0, 0, 5, 5}, 2), box_mask(e, {5, 4, 9, 9}, 1),
                               box_mask(e, {14, 14, 2, 2}, 3)});
  EXPECT_EQ(intersecting_masks(inst, masks, 1), (std::vector<MaskId>{1, 2}));
  // B shares a single pixel with the instance.
  EXPECT_EQ(intersecting_masks(inst, masks, 2), (std::vector<MaskId>{1}));
}

TEST(IntersectingMasks, TiesBreakByLowerId) {
  const Extent e{8, 4};
  const auto inst = box_instance(e, {2, 0, 4, 4});
  // Left and right halves of the instance sit at equal distance.
  const MaskSet masks(8, 4, {box_mask(e, {4, 0, 2, 4}, 3), box_mask(e, {2, 0, 2, 4}, 7)});
  EXPECT_EQ(intersecting_masks(inst, masks, 1), (std::vector<MaskId>{3, 7}));
}

TEST(HierarchicalAggregate, IdentityMask) {
  const Extent e{8, 8};
  const auto inst = box_instance(e, {2, 2, 4, 4});
  const MaskSet masks(8, 8, {box_mask(e, {2, 2, 4, 4}, 5)});
  const auto v = hierarchical_aggregate(inst, masks, with_theta(0.5));
  EXPECT_FALSE(v.changed);
  EXPECT_DOUBLE_EQ(v.best_overlap, 1.0);
  EXPECT_EQ(v.masks_used, (std::vector<MaskId>{5}));
  EXPECT_TRUE(v.merged_mask.same_pixels(inst.mask));
}

TEST(HierarchicalAggregate, HalvesNeedBothAtHighThreshold) {
  const Extent e{8, 4};
  const auto inst = box_instance(e, {0, 0, 8, 4});
  const MaskSet masks(8, 4, {box_mask(e, {0, 0, 4, 4}, 1), box_mask(e, {4, 0, 4, 4}, 2)});

  const auto strict = hierarchical_aggregate(inst, masks, with_theta(0.9));
  ASSERT_EQ(strict.steps.size(), 2u);
  EXPECT_DOUBLE_EQ(strict.steps[0].overlap, 0.5);
  EXPECT_DOUBLE_EQ(strict.steps[1].overlap, 1.0);
  EXPECT_FALSE(strict.changed);
  EXPECT_EQ(strict.masks_used, (std::vector<MaskId>{1, 2}));

  // At 0.5 the first half already suffices.
  const auto loose = hierarchical_aggregate(inst, masks, with_theta(0.5));
  EXPECT_EQ(loose.steps.size(), 1u);
  EXPECT_FALSE(loose.changed);
}

TEST(HierarchicalAggregate, VanishedObjectIsChanged) {
  const Extent e{16, 16};
  const auto inst = box_instance(e, {2, 2, 4, 4});
  const MaskSet masks(16, 16, {box_mask(e, {10, 10, 4, 4}, 1)});
  const auto v = hierarchical_aggregate(inst, masks, AggregationParams{});
  EXPECT_TRUE(v.changed);
  EXPECT_EQ(v.best_overlap, 0.0);
  EXPECT_TRUE(v.steps.empty());
  EXPECT_TRUE(v.masks_used.empty());
  EXPECT_TRUE(v.merged_mask.is_empty());
}

TEST(HierarchicalAggregate, PatienceStopsNonImprovingMerges) {
  const Extent e{32, 8};
  const auto inst = box_instance(e, {0, 0, 8, 8});
  // A covers a quarter of the instance; B and C each clip two instance columns
  // but drag in a large outside area, so merging them only lowers the overlap.
  const MaskSet masks(32, 8, {box_mask(e, {0, 0, 4, 4}, 1), box_mask(e, {6, 0, 14, 8}, 2),
                              box_mask(e, {6, 0, 26, 8}, 3)});
  auto p = with_theta(0.9);
  p.patience = 1;
  auto v = hierarchical_aggregate(inst, masks, p);
  ASSERT_EQ(v.steps.size(), 2u);
  EXPECT_EQ(v.masks_used, (std::vector<MaskId>{1}));
  EXPECT_DOUBLE_EQ(v.best_overlap, 0.25);
  p.patience = 3;
  v = hierarchical_aggregate(inst, masks, p);
  EXPECT_EQ(v.steps.size(), 3u);
  EXPECT_EQ(v.masks_used, (std::vector<MaskId>{1}));
}

TEST(HierarchicalAggregate, ShapeCheckVetoesAtypicalMerge) {
  const Extent e{32, 32};
  const auto inst = box_instance(e, {0, 0, 8, 8});
  // IoU 64/(64+ (20*8-64)) = 0.4; a lower threshold accepts it, the area band does not.
  const MaskSet masks(32, 32, {box_mask(e, {0, 0, 20, 8}, 1)});
  auto p = with_theta(0.3);
  EXPECT_FALSE(hierarchical_aggregate(inst, masks, p).changed);
  p.use_shape_check = true;
  const auto v = hierarchical_aggregate(inst, masks, p);
  EXPECT_TRUE(v.changed);
  EXPECT_TRUE(v.shape_veto);
}

TEST(HierarchicalAggregate, ValidatesInput) {
  const Extent e{4, 4};
  const MaskSet masks(4, 4, {});
  Instance empty;
  empty.id = 1;
  empty.mask = BinaryMask::empty(e, 1);
  EXPECT_THROW(hierarchical_aggregate(empty, masks, AggregationParams{}), EmptyInstanceError);
  const auto inst = box_instance(e, {0, 0, 2, 2});
  EXPECT_THROW(hierarchical_aggregate(inst, masks, with_theta(0.0)), ParameterError);
  EXPECT_THROW(hierarchical_aggregate(inst, masks, with_theta(1.5)), ParameterError);
  auto p = AggregationParams{};
  p.patience = 0;
  EXPECT_THROW(hierarchical_aggregate(inst, masks, p), ParameterError);
  p = AggregationParams{};
  p.area_ratio_band = {1.2, 2.0};
  EXPECT_THROW(hierarchical_aggregate(inst, masks, p), ParameterError);
  EXPECT_THROW(hierarchical_aggregate(inst, MaskSet(5, 4, {}), AggregationParams{}), DimensionError);
}

TEST(DetectChangesNoprompt, TwoInstanceMap) {
  // Left half building (kept), right half water (gone in the masks).
  LabelRaster r(8, 8, ClassCode{2});
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 4; x < 8; ++x) r.set(x, y, 3);
  const auto ccl = label_components(r);
  ASSERT_EQ(ccl.instances.size(), 2u);
  const Extent e{8, 8};
  const MaskSet masks(8, 8, {box_mask(e, {0, 0, 4, 8}, 1)});
  const auto res = detect_changes_noprompt(ccl.instances, masks, AggregationParams{});
  ASSERT_EQ(res.verdicts.size(), 2u);
  EXPECT_FALSE(res.verdicts[0].changed);
  EXPECT_TRUE(res.verdicts[1].changed);
  EXPECT_EQ(res.change_map.count(), 32u);
  EXPECT_TRUE(res.change_map.at(5, 5));
  EXPECT_FALSE(res.change_map.at(1, 1));
}

TEST(DetectChangesNoprompt, NoInstancesGivesEmptyMap) {
  const MaskSet masks(4, 3, {});
  const auto res = detect_changes_noprompt({}, masks, AggregationParams{});
  EXPECT_TRUE(res.verdicts.empty());
  EXPECT_EQ(res.change_map.extent(), (Extent{4, 3}));
  EXPECT_EQ(res.change_map.count(), 0u);
}

struct Fixture {
  std::vector<Instance> instances;
  MaskSet masks;
};

Fixture random_fixture(std::mt19937_64& rng) {
  const std::size_t w = 8 + rng() % 40, h = 8 + rng() % 40;
  const auto px = oracle::random_classes(rng, w, h, 2 + static_cast<unsigned>(rng() % 4));
  CclParams cp;
  cp.min_area = 1;
  auto ccl = label_components(LabelRaster(w, h, px), cp);
  std::vector<BinaryMask> masks;
  const std::size_t n = rng() % 15;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = rng() % w, y = rng() % h;
    const Box b{x, y, 1 + rng() % (w - x), 1 + rng() % (h - y)};
    masks.push_back(box_mask({w, h}, b, static_cast<MaskId>(100 + i)));
  }
  // Some instance copies so unchanged verdicts show up too.
  for (const auto& inst : ccl.instances) {
    if (rng() % 3 == 0) masks.push_back(inst.mask.with_id(1000 + inst.id));
  }
  return {std::move(ccl.instances), MaskSet(w, h, std::move(masks))};
}

TEST(NopromptProperty, AggregationInvariants) {
  std::mt19937_64 rng(99);
  for (int c = 0; c < 300; ++c) {
    const auto fx = random_fixture(rng);
    AggregationParams p;
    p.overlap_threshold = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    p.min_intersection = 1 + rng() % 4;
    p.patience = 1 + rng() % 4;
    for (const auto& inst : fx.instances) {
      const auto v = hierarchical_aggregate(inst, fx.masks, p);
      // Merged intersection never shrinks.
      for (std::size_t k = 1; k < v.steps.size(); ++k) {
        ASSERT_GE(v.steps[k].intersection, v.steps[k - 1].intersection);
      }
      // Every step but the last stays below the threshold.
      for (std::size_t k = 0; k + 1 < v.steps.size(); ++k) ASSERT_LT(v.steps[k].overlap, p.overlap_threshold);
      ASSERT_EQ(v.changed, v.best_overlap < p.overlap_threshold);
      // masks_used is a prefix of the merge order and rebuilds merged_mask.
      ASSERT_LE(v.masks_used.size(), v.steps.size());
      BinaryMask rebuilt = BinaryMask::empty(inst.mask.extent());
      for (std::size_t k = 0; k < v.masks_used.size(); ++k) {
        ASSERT_EQ(v.masks_used[k], v.steps[k].mask_id);
        for (const auto& m : fx.masks.masks()) {
          if (m.id() == v.masks_used[k]) rebuilt = mask_union(rebuilt, m);
        }
      }
      ASSERT_TRUE(rebuilt.same_pixels(v.merged_mask));
      ASSERT_DOUBLE_EQ(v.best_overlap, v.merged_mask.is_empty() ? 0.0 : iou(v.merged_mask, inst.mask));
      // Merge order equals the candidate list.
      const auto cands = intersecting_masks(inst, fx.masks, p.min_intersection);
      ASSERT_LE(v.steps.size(), cands.size());
      for (std::size_t k = 0; k < v.steps.size(); ++k) ASSERT_EQ(v.steps[k].mask_id, cands[k]);
      // Stopping before the end of the list needs a reason.
      if (v.steps.size() < cands.size()) {
        const bool reached = !v.steps.empty() && v.steps.back().overlap >= p.overlap_threshold;
        const bool stale = v.steps.size() - v.masks_used.size() >= p.patience;
        ASSERT_TRUE(reached || stale);
      }
    }
  }
}

TEST(NopromptProperty, ThresholdExtremes) {
  std::mt19937_64 rng(123);
  for (int c = 0; c < 200; ++c) {
    const auto fx = random_fixture(rng);
    for (const auto& inst : fx.instances) {
      const auto cands = intersecting_masks(inst, fx.masks, 1);
      // A tiny threshold accepts any intersecting mask.
      auto lo = with_theta(1e-9);
      ASSERT_EQ(hierarchical_aggregate(inst, fx.masks, lo).changed, cands.empty());
      // At 1.0 only an exact reconstruction is unchanged.
      const auto hi = hierarchical_aggregate(inst, fx.masks, with_theta(1.0));
      ASSERT_EQ(!hi.changed, hi.merged_mask.same_pixels(inst.mask) && !inst.mask.is_empty());
    }
  }
}

TEST(NopromptProperty, WorkerCountDoesNotMatter) {
  std::mt19937_64 rng(5150);
  for (int c = 0; c < 50; ++c) {
    const auto fx = random_fixture(rng);
    const auto a = detect_changes_noprompt(fx.instances, fx.masks, AggregationParams{}, 1);
    const auto b = detect_changes_noprompt(fx.instances, fx.masks, AggregationParams{}, 4);
    ASSERT_EQ(a.change_map, b.change_map);
    ASSERT_EQ(a.verdicts.size(), b.verdicts.size());
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
      ASSERT_EQ(a.verdicts[i].instance_id, b.verdicts[i].instance_id);
      ASSERT_EQ(a.verdicts[i].masks_used, b.verdicts[i].masks_used);
      ASSERT_EQ(a.verdicts[i].best_overlap, b.verdicts[i].best_overlap);
    }
  }
}

TEST(NopromptProperty, ChangeMapIsUnionOfChangedInstances) {
  std::mt19937_64 rng(8);
  for (int c = 0; c < 100; ++c) {
    const auto fx = random_fixture(rng);
    const auto res = detect_changes_noprompt(fx.instances, fx.masks, AggregationParams{});
    Bits expected(fx.masks.extent().pixels(), 0);
    for (std::size_t i = 0; i < fx.instances.size(); ++i) {
      ASSERT_EQ(res.verdicts[i].instance_id, fx.instances[i].id);
      if (!res.verdicts[i].changed) continue;
      const auto bits = rle_decode(fx.instances[i].mask);
      for (std::size_t q = 0; q < bits.size(); ++q) expected[q] |= bits[q];
    }
    ASSERT_EQ(res.change_map.bits(), expected);
  }
}

}  // namespace
}  // namespace segcd
