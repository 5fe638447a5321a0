#pragma once

// Connected component labeling of class rasters.
//
// Two raster passes with a union-find equivalence table: the first pass
// assigns provisional labels from the already-visited neighbours (W, N and,
// for 8-connectivity, NW and NE) and records equivalences; the second pass
// replaces each provisional label by its set representative. Components are
// then filtered by area / class and renumbered 1..N in scan order of their
// first pixel.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "segcd/error.hpp"
#include "segcd/mask.hpp"
#include "segcd/raster.hpp"

namespace segcd {

enum class Connectivity : int { four = 4, eight = 8 };

inline Connectivity connectivity_from_int(int n) {
  if (n == 4) return Connectivity::four;
  if (n == 8) return Connectivity::eight;
  throw ParameterError("connectivity must be 4 or 8, got " + std::to_string(n));
}

struct CclParams {
  Connectivity connectivity = Connectivity::four;
  std::size_t min_area = 16;
  std::set<ClassCode> ignore_codes;

  void validate() const {
    if (min_area < 1) throw ParameterError("min_area must be >= 1");
  }
};

/// Per-pixel instance ids; 0 marks pixels that belong to no instance.
class InstanceMap {
 public:
  InstanceMap() = default;
  InstanceMap(std::size_t width, std::size_t height, std::vector<InstanceId> labels)
      : extent_{width, height}, labels_(std::move(labels)) {
    if (labels_.size() != extent_.pixels()) throw DimensionError("instance map size mismatch");
  }

  std::size_t width() const noexcept { return extent_.width; }
  std::size_t height() const noexcept { return extent_.height; }
  Extent extent() const noexcept { return extent_; }
  std::span<const InstanceId> labels() const noexcept { return labels_; }
  InstanceId at(std::size_t x, std::size_t y) const { return labels_[y * extent_.width + x]; }

  friend bool operator==(const InstanceMap&, const InstanceMap&) = default;

 private:
  Extent extent_;
  std::vector<InstanceId> labels_;
};

struct Instance {
  InstanceId id = 0;
  ClassCode class_code = 0;
  BinaryMask mask;  // mask.id() == id
  std::size_t area = 0;
  Box bbox;
  Point centroid;

  /// Rebuilds the derived attributes from `mask`.
  static Instance from_mask(InstanceId id, ClassCode class_code, BinaryMask mask) {
    if (mask.is_empty()) throw EmptyInstanceError("instance " + std::to_string(id) + " has no pixels");
    Instance inst;
    inst.id = id;
    inst.class_code = class_code;
    inst.mask = mask.with_id(id);
    const auto g = mask_geometry(inst.mask);
    inst.area = g.area;
    inst.bbox = g.bbox;
    inst.centroid = g.centroid;
    return inst;
  }
};

struct CclResult {
  InstanceMap map;
  std::vector<Instance> instances;  // instances[i].id == i + 1
};

namespace detail {

class UnionFind {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  // The smaller root wins, so representatives are the earliest-created labels.
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

  std::size_t size() const noexcept { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

constexpr std::uint32_t kNoLabel = 0xFFFFFFFFu;

/// Two-pass labeling of pixels for which `active(i)` holds; pixels i and j join
/// when both are active, adjacent, and `same(i, j)`. Returns dense root ids
/// (0..n-1) per pixel or kNoLabel, numbered in scan order of first pixel.
template <class Active, class Same>
std::vector<std::uint32_t> two_pass_label(std::size_t width, std::size_t height,
                                          Connectivity conn, Active active, Same same,
                                          std::size_t& n_components) {
  std::vector<std::uint32_t> prov(width * height, kNoLabel);
  UnionFind uf;
  const bool eight = conn == Connectivity::eight;

  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t i = y * width + x;
      if (!active(i)) continue;
      std::uint32_t label = kNoLabel;
      auto consider = [&](std::size_t j) {
        if (prov[j] == kNoLabel || !same(i, j)) return;
        if (label == kNoLabel) {
          label = prov[j];
        } else {
          uf.unite(label, prov[j]);
        }
      };
      if (x > 0) consider(i - 1);
      if (y > 0) {
        consider(i - width);
        if (eight) {
          if (x > 0) consider(i - width - 1);
          if (x + 1 < width) consider(i - width + 1);
        }
      }
      prov[i] = label == kNoLabel ? uf.make() : label;
    }
  }

  std::vector<std::uint32_t> dense(uf.size(), kNoLabel);
  std::uint32_t next = 0;
  for (auto& p : prov) {
    if (p == kNoLabel) continue;
    const std::uint32_t root = uf.find(p);
    if (dense[root] == kNoLabel) dense[root] = next++;
    p = dense[root];
  }
  n_components = next;
  return prov;
}

/// Gathers per-label spans from a dense label image (labels 0..n-1, kNoLabel skipped).
inline std::vector<std::vector<Span>> spans_by_label(std::span<const std::uint32_t> labels,
                                                     std::size_t n) {
  std::vector<std::vector<Span>> spans(n);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t l = labels[i];
    if (l == kNoLabel) continue;
    auto& v = spans[l];
    if (!v.empty() && v.back().end == i) {
      v.back().end = i + 1;
    } else {
      v.push_back({i, i + 1});
    }
  }
  return spans;
}

}  // namespace detail

/// Labels same-class connected regions of `raster`.
///
/// Components smaller than `min_area` or whose class is in `ignore_codes` get
/// label 0. Remaining components are numbered 1..N in raster-scan order of
/// their first pixel.
inline CclResult label_components(const LabelRaster& raster, const CclParams& params = {}) {
  params.validate();
  const std::size_t w = raster.width();
  const std::size_t h = raster.height();
  const auto px = raster.pixels();

  std::size_t n = 0;
  auto comp = detail::two_pass_label(
      w, h, params.connectivity,
      [&](std::size_t i) { return !params.ignore_codes.contains(px[i]); },
      [&](std::size_t i, std::size_t j) { return px[i] == px[j]; }, n);

  auto spans = detail::spans_by_label(comp, n);

  // Components are already in first-pixel scan order; dropping some keeps it.
  std::vector<InstanceId> final_id(n, 0);
  std::vector<Instance> instances;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t area = 0;
    for (const auto& s : spans[c]) area += s.size();
    if (area < params.min_area) continue;
    const auto id = static_cast<InstanceId>(instances.size() + 1);
    final_id[c] = id;
    const ClassCode code = px[spans[c].front().begin];
    instances.push_back(
        Instance::from_mask(id, code, BinaryMask::from_spans(raster.extent(), std::move(spans[c]), id)));
  }

  std::vector<InstanceId> labels(w * h, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (comp[i] != detail::kNoLabel) labels[i] = final_id[comp[i]];
  }
  return {InstanceMap(w, h, std::move(labels)), std::move(instances)};
}

/// Connected blobs of a binary mask as separate masks, in scan order.
inline std::vector<BinaryMask> mask_components(const BinaryMask& mask, Connectivity conn) {
  if (mask.is_empty()) return {};
  // Work inside the bounding box so large grids with small masks stay cheap.
  const auto g = mask_geometry(mask);
  const std::size_t W = mask.width();
  const Box b = g.bbox;
  Bits local(b.w * b.h, 0);
  for (const auto& s : mask.spans()) {
    for (std::size_t p = s.begin; p < s.end; ++p) {
      local[(p / W - b.y) * b.w + (p % W - b.x)] = 1;
    }
  }
  std::size_t n = 0;
  auto comp = detail::two_pass_label(
      b.w, b.h, conn, [&](std::size_t i) { return local[i] != 0; },
      [](std::size_t, std::size_t) { return true; }, n);

  std::vector<std::vector<Span>> spans(n);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    if (comp[i] == detail::kNoLabel) continue;
    const std::size_t gi = (i / b.w + b.y) * W + (i % b.w + b.x);
    auto& v = spans[comp[i]];
    if (!v.empty() && v.back().end == gi) {
      v.back().end = gi + 1;
    } else {
      v.push_back({gi, gi + 1});
    }
  }
  std::vector<BinaryMask> out;
  out.reserve(n);
  for (auto& s : spans) out.push_back(BinaryMask::from_spans(mask.extent(), std::move(s)));
  return out;
}

}  // namespace segcd
