#pragma once

// Change detection without prompts: segmenter masks that intersect a map
// instance are merged outward from the instance centroid, and the instance is
// unchanged as soon as the merged mask overlaps it well enough.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "segcd/ccl.hpp"
#include "segcd/error.hpp"
#include "segcd/mask.hpp"
#include "segcd/parallel.hpp"
#include "segcd/raster.hpp"

namespace segcd {

/// Closed ratio interval [lo, hi].
struct RatioBand {
  double lo = 0.5;
  double hi = 2.0;

  bool contains(double r) const noexcept { return r >= lo && r <= hi; }
};

struct AggregationParams {
  double overlap_threshold = 0.5;
  std::size_t min_intersection = 8;
  std::size_t patience = 3;
  bool use_shape_check = false;
  RatioBand area_ratio_band{0.5, 2.0};
  RatioBand aspect_ratio_band{0.5, 2.0};

  void validate() const {
    if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0)) {
      throw ParameterError("overlap threshold must lie in (0, 1]");
    }
    if (min_intersection < 1) throw ParameterError("min_intersection must be >= 1");
    if (patience < 1) throw ParameterError("patience must be >= 1");
    for (const auto* band : {&area_ratio_band, &aspect_ratio_band}) {
      if (!(band->lo < 1.0 && 1.0 < band->hi)) throw ParameterError("ratio bands need lo < 1 < hi");
    }
  }
};

/// One merge of the aggregation: the mask added and the state right after it.
struct MergeStep {
  MaskId mask_id = 0;
  std::size_t intersection = 0;  // |merged ∩ instance|
  double overlap = 0.0;          // IoU(merged, instance)
};

struct InstanceVerdict {
  InstanceId instance_id = 0;
  bool changed = true;
  double best_overlap = 0.0;
  /// Merged mask at the best-overlap prefix of the merge sequence.
  BinaryMask merged_mask;
  /// Ids of the masks forming merged_mask, in merge order.
  std::vector<MaskId> masks_used;
  /// Every merge performed, including those past the best prefix.
  std::vector<MergeStep> steps;
  /// True when the overlap test passed but the shape check flipped the verdict.
  bool shape_veto = false;
};

struct NopromptResult {
  ChangeMap change_map;
  std::vector<InstanceVerdict> verdicts;  // ascending instance id
};

namespace detail {

/// Mask centroids and boxes computed once per mask set.
class MaskCatalog {
 public:
  explicit MaskCatalog(const MaskSet& masks) : masks_(&masks) {
    entries_.reserve(masks.size());
    for (const auto& m : masks.masks()) {
      Entry e;
      e.empty = m.is_empty();
      if (!e.empty) {
        const auto g = mask_geometry(m);
        e.bbox = g.bbox;
        e.centroid = g.centroid;
      }
      entries_.push_back(e);
    }
  }

  /// Indices (into masks.masks()) of masks meeting min_intersection with the
  /// instance, nearest centroid first, ties by mask id.
  std::vector<std::size_t> candidates(const Instance& instance, std::size_t min_intersection) const {
    require_same_extent(instance.mask.extent(), masks_->extent(), "instance vs mask set");
    struct Scored {
      double dist2;
      MaskId id;
      std::size_t index;
    };
    std::vector<Scored> found;
    const auto all = masks_->masks();
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto& e = entries_[i];
      if (e.empty || !overlaps(e.bbox, instance.bbox)) continue;
      if (detail::intersection_count(all[i].spans(), instance.mask.spans()) < min_intersection) continue;
      const double dx = e.centroid.x - instance.centroid.x;
      const double dy = e.centroid.y - instance.centroid.y;
      found.push_back({dx * dx + dy * dy, all[i].id(), i});
    }
    std::sort(found.begin(), found.end(), [](const Scored& a, const Scored& b) {
      if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
      return a.id < b.id;
    });
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& f : found) out.push_back(f.index);
    return out;
  }

  const MaskSet& masks() const noexcept { return *masks_; }

 private:
  struct Entry {
    bool empty = true;
    Box bbox;
    Point centroid;
  };

  static bool overlaps(const Box& a, const Box& b) noexcept {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
  }

  const MaskSet* masks_;
  std::vector<Entry> entries_;
};

inline InstanceVerdict aggregate_with(const Instance& instance, const MaskCatalog& catalog,
                                      const AggregationParams& params) {
  if (instance.mask.is_empty()) {
    throw EmptyInstanceError("instance " + std::to_string(instance.id) + " has no pixels");
  }
  const auto all = catalog.masks().masks();
  const auto order = catalog.candidates(instance, params.min_intersection);
  const std::size_t inst_area = instance.mask.area();

  InstanceVerdict v;
  v.instance_id = instance.id;
  v.merged_mask = BinaryMask::empty(instance.mask.extent());

  std::vector<Span> merged;
  std::size_t best_prefix = 0;
  std::size_t stale = 0;
  for (std::size_t idx : order) {
    merged = detail::unite(merged, all[idx].spans());
    std::size_t merged_area = 0;
    for (const auto& s : merged) merged_area += s.size();
    const std::size_t inter = detail::intersection_count(merged, instance.mask.spans());
    const double overlap =
        static_cast<double>(inter) / static_cast<double>(merged_area + inst_area - inter);
    v.steps.push_back({all[idx].id(), inter, overlap});

    if (overlap > v.best_overlap) {
      v.best_overlap = overlap;
      best_prefix = v.steps.size();
      v.merged_mask = BinaryMask::from_spans(instance.mask.extent(), merged);
      stale = 0;
    } else {
      ++stale;
    }
    if (overlap >= params.overlap_threshold) break;
    if (stale >= params.patience) break;
  }

  for (std::size_t k = 0; k < best_prefix; ++k) v.masks_used.push_back(v.steps[k].mask_id);
  v.changed = v.best_overlap < params.overlap_threshold;

  if (!v.changed && params.use_shape_check) {
    const auto mg = mask_geometry(v.merged_mask);
    const auto ig = mask_geometry(instance.mask);
    const double area_ratio = static_cast<double>(mg.area) / static_cast<double>(ig.area);
    const double aspect_ratio = mg.aspect_ratio / ig.aspect_ratio;
    if (!params.area_ratio_band.contains(area_ratio) ||
        !params.aspect_ratio_band.contains(aspect_ratio)) {
      v.changed = true;
      v.shape_veto = true;
    }
  }
  return v;
}

}  // namespace detail

/// Ids of masks intersecting `instance` by at least `min_intersection` pixels,
/// ordered by centroid distance to the instance centroid (ties: lower id first).
inline std::vector<MaskId> intersecting_masks(const Instance& instance, const MaskSet& masks,
                                              std::size_t min_intersection) {
  const detail::MaskCatalog catalog(masks);
  std::vector<MaskId> ids;
  for (std::size_t i : catalog.candidates(instance, min_intersection)) {
    ids.push_back(masks.masks()[i].id());
  }
  return ids;
}

/// Merges candidate masks in outward order until the overlap (IoU) with the
/// instance reaches the threshold, candidates run out, or `patience`
/// consecutive merges fail to improve the best overlap.
inline InstanceVerdict hierarchical_aggregate(const Instance& instance, const MaskSet& masks,
                                              const AggregationParams& params) {
  params.validate();
  return detail::aggregate_with(instance, detail::MaskCatalog(masks), params);
}

/// Runs the aggregation for every instance and paints changed instances.
/// Output is identical for any worker count.
inline NopromptResult detect_changes_noprompt(std::span<const Instance> instances,
                                              const MaskSet& masks,
                                              const AggregationParams& params,
                                              std::size_t workers = 1) {
  params.validate();
  for (const auto& inst : instances) {
    require_same_extent(inst.mask.extent(), masks.extent(),
                        ("instance " + std::to_string(inst.id) + " vs mask set").c_str());
  }
  std::vector<const Instance*> ordered;
  ordered.reserve(instances.size());
  for (const auto& inst : instances) ordered.push_back(&inst);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Instance* a, const Instance* b) { return a->id < b->id; });

  const detail::MaskCatalog catalog(masks);
  NopromptResult result;
  result.verdicts.resize(ordered.size());
  parallel_for(ordered.size(), workers, [&](std::size_t i) {
    result.verdicts[i] = detail::aggregate_with(*ordered[i], catalog, params);
  });

  result.change_map = ChangeMap(masks.extent());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (!result.verdicts[i].changed) continue;
    for (const auto& s : ordered[i]->mask.spans()) {
      for (std::size_t p = s.begin; p < s.end; ++p) result.change_map.set_index(p);
    }
  }
  return result;
}

}  // namespace segcd
