#pragma once

// Prompted change detection: background map instances become box/mask
// prompts for the segmenter; pixels of an instance that the prompted
// segmentation leaves out are emerging objects.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "segcd/ccl.hpp"
#include "segcd/error.hpp"
#include "segcd/mask.hpp"
#include "segcd/parallel.hpp"
#include "segcd/raster.hpp"

namespace segcd {

struct PromptSpec {
  InstanceId instance_id = 0;
  ClassCode class_code = 0;
  Box prompt_box;
  BinaryMask prompt_mask;
};

struct PromptedResult {
  InstanceId instance_id = 0;
  BinaryMask segmented;
};

struct PromptDetection {
  ChangeMap change_map;
  std::vector<std::string> warnings;
};

/// One prompt per background-class instance, in instance-id order.
inline std::vector<PromptSpec> export_prompts(std::span<const Instance> instances,
                                              const Legend& legend) {
  std::map<InstanceId, PromptSpec> by_id;
  for (const auto& inst : instances) {
    const auto* entry = legend.find(inst.class_code);
    if (entry == nullptr) {
      throw LegendError("instance " + std::to_string(inst.id) + " has class " +
                        std::to_string(inst.class_code) + " missing from legend");
    }
    if (!entry->is_background) continue;
    by_id[inst.id] = {inst.id, inst.class_code, mask_geometry(inst.mask).bbox, inst.mask};
  }
  std::vector<PromptSpec> out;
  out.reserve(by_id.size());
  for (auto& [id, spec] : by_id) out.push_back(std::move(spec));
  return out;
}

/// Instance pixels the segmentation did not claim, minus 4-connected blobs
/// smaller than `min_blob_area`.
inline BinaryMask anomaly_extract(const Instance& instance, const PromptedResult& result,
                                  std::size_t min_blob_area) {
  if (result.instance_id != instance.id) {
    throw PairingError("prompted result for instance " + std::to_string(result.instance_id) +
                       " paired with instance " + std::to_string(instance.id));
  }
  require_same_extent(instance.mask.extent(), result.segmented.extent(),
                      ("prompted result for instance " + std::to_string(instance.id)).c_str());
  const auto missed = mask_difference(instance.mask, result.segmented);
  if (min_blob_area <= 1 || missed.is_empty()) return missed;

  std::vector<Span> kept;
  for (const auto& blob : mask_components(missed, Connectivity::four)) {
    if (blob.area() >= min_blob_area) kept = detail::unite(kept, blob.spans());
  }
  return BinaryMask::from_spans(instance.mask.extent(), std::move(kept));
}

/// Union of anomaly_extract over background instances. Background instances
/// without a result add nothing and produce one warning each.
inline PromptDetection detect_changes_prompt(Extent extent, std::span<const Instance> instances,
                                             std::span<const PromptedResult> results,
                                             const Legend& legend, std::size_t min_blob_area,
                                             std::size_t workers = 1) {
  std::map<InstanceId, const Instance*> by_id;
  for (const auto& inst : instances) {
    require_same_extent(inst.mask.extent(), extent,
                        ("instance " + std::to_string(inst.id)).c_str());
    by_id[inst.id] = &inst;
  }

  std::map<InstanceId, const PromptedResult*> paired;
  for (const auto& r : results) {
    auto it = by_id.find(r.instance_id);
    if (it == by_id.end()) {
      throw PairingError("prompted result references unknown instance " + std::to_string(r.instance_id));
    }
    if (!legend.is_background(it->second->class_code)) {
      throw PairingError("prompted result references non-background instance " +
                         std::to_string(r.instance_id));
    }
    if (!paired.emplace(r.instance_id, &r).second) {
      throw PairingError("duplicate prompted result for instance " + std::to_string(r.instance_id));
    }
  }

  PromptDetection out;
  std::vector<std::pair<const Instance*, const PromptedResult*>> work;
  for (const auto& [id, inst] : by_id) {
    if (!legend.is_background(inst->class_code)) continue;
    auto it = paired.find(id);
    if (it == paired.end()) {
      out.warnings.push_back("background instance " + std::to_string(id) + " has no prompted result");
      continue;
    }
    work.emplace_back(inst, it->second);
  }

  std::vector<BinaryMask> anomalies(work.size());
  parallel_for(work.size(), workers, [&](std::size_t i) {
    anomalies[i] = anomaly_extract(*work[i].first, *work[i].second, min_blob_area);
  });

  out.change_map = ChangeMap(extent);
  for (const auto& a : anomalies) {
    for (const auto& s : a.spans()) {
      for (std::size_t p = s.begin; p < s.end; ++p) out.change_map.set_index(p);
    }
  }
  return out;
}

}  // namespace segcd
