#pragma once

// Synthetic scenes for exercising the detectors without imagery or a model.
//
// A scene is a map raster of rectangles and ellipses on one background class,
// plus what a segmenter would plausibly return for the "current" state of the
// ground: objects may keep their shape, shrink along one axis, vanish, or
// appear where the map only has background. Over-segmentation is simulated by
// cutting object masks with axis-parallel lines, and boundary noise by a
// square dilation or erosion of random radius.
//
// Every random draw comes from SplitMix64 in a fixed order, so a seed
// reproduces the scene byte for byte on any platform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "segcd/ccl.hpp"
#include "segcd/error.hpp"
#include "segcd/mask.hpp"
#include "segcd/prompt.hpp"
#include "segcd/raster.hpp"

namespace segcd {

/// SplitMix64 (Steele, Lea & Flood 2014).
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kMix1 = 0xBF58476D1CE4E5B9ull;
  static constexpr std::uint64_t kMix2 = 0x94D049BB133111EBull;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += kGamma);
    z = (z ^ (z >> 30)) * kMix1;
    z = (z ^ (z >> 27)) * kMix2;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n), rejection-sampled so there is no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(below(hi - lo + 1)); }

  bool coin() { return (next() >> 63) != 0; }

 private:
  std::uint64_t state_;
};

struct ChangeFractions {
  double shape_change = 0.0;
  double removal = 0.0;
  double new_object = 0.0;
};

struct SceneParams {
  std::uint64_t seed = 7;
  std::size_t width = 192;
  std::size_t height = 192;
  std::size_t n_objects = 10;
  ChangeFractions change_fractions;
  std::size_t split_k = 1;
  std::size_t boundary_noise = 0;

  void validate() const {
    const auto& f = change_fractions;
    if (f.shape_change < 0 || f.removal < 0 || f.new_object < 0) {
      throw ParameterError("change fractions must be >= 0");
    }
    if (f.shape_change + f.removal + f.new_object > 1.0 + 1e-9) {
      throw ParameterError("change fractions must sum to <= 1");
    }
    if (split_k < 1) throw ParameterError("split_k must be >= 1");
    if (width == 0 || height == 0) throw ParameterError("scene must be at least 1x1");
  }
};

enum class ObjectRole { unchanged, shape_changed, removed, new_object };
enum class ShapeKind { rectangle, ellipse };

inline const char* to_string(ObjectRole r) {
  switch (r) {
    case ObjectRole::unchanged: return "unchanged";
    case ObjectRole::shape_changed: return "shape_changed";
    case ObjectRole::removed: return "removed";
    case ObjectRole::new_object: return "new_object";
  }
  return "?";
}

inline const char* to_string(ShapeKind s) { return s == ShapeKind::rectangle ? "rectangle" : "ellipse"; }

struct SceneObject {
  std::uint32_t id = 0;
  ClassCode class_code = 0;
  ObjectRole role = ObjectRole::unchanged;
  ShapeKind shape = ShapeKind::rectangle;
  /// Geometry on the ground before any change (for new objects: where it appears).
  Box bbox;
  /// Shrunk geometry of a shape-changed object.
  std::optional<Box> changed_bbox;
};

struct Scene {
  SceneParams params;
  LabelRaster map;
  Legend legend;
  MaskSet masks;
  std::vector<PromptedResult> prompted;
  ChangeMap truth;
  std::vector<SceneObject> objects;
};

namespace synth {

inline constexpr ClassCode kBackground = 1;
inline constexpr ClassCode kBuilding = 2;
inline constexpr ClassCode kWater = 3;
inline constexpr ClassCode kImpervious = 4;
inline constexpr std::size_t kMinSide = 16;
inline constexpr std::size_t kPlacementTries = 500;
// Shape changes shrink one axis by a factor well outside the default
// aggregation bands (0.5, 2.0).
inline constexpr double kShrinkLo = 0.2;
inline constexpr double kShrinkHi = 0.3;
inline constexpr double kMaxShrunkOverlap = 0.45;

inline Legend default_legend() {
  return Legend({{kBackground, "vegetation", true},
                 {kBuilding, "building", false},
                 {kWater, "water", false},
                 {kImpervious, "impervious", false}});
}

/// Rasterizes a shape filling `box`. Ellipses keep pixels whose centres lie
/// inside the inscribed ellipse.
inline BinaryMask shape_mask(Extent extent, ShapeKind shape, const Box& box) {
  if (shape == ShapeKind::rectangle) return box_mask(extent, box);
  const double a = box.w / 2.0, b = box.h / 2.0;
  const double cx = box.x + a, cy = box.y + b;
  std::vector<Span> spans;
  for (std::size_t y = box.y; y < box.y + box.h; ++y) {
    for (std::size_t x = box.x; x < box.x + box.w; ++x) {
      const double dx = (x + 0.5 - cx) / a, dy = (y + 0.5 - cy) / b;
      if (dx * dx + dy * dy > 1.0) continue;
      const std::size_t i = y * extent.width + x;
      if (!spans.empty() && spans.back().end == i) {
        spans.back().end = i + 1;
      } else {
        spans.push_back({i, i + 1});
      }
    }
  }
  return BinaryMask::from_spans(extent, std::move(spans));
}

/// Square (Chebyshev) dilation or erosion by `radius`; outside the grid counts as unset.
inline BinaryMask morph(const BinaryMask& mask, std::size_t radius, bool dilate) {
  if (radius == 0) return mask;
  const std::size_t W = mask.width(), H = mask.height();
  const Bits src = rle_decode(mask);
  Bits tmp(src.size()), dst(src.size());
  const auto r = static_cast<std::ptrdiff_t>(radius);
  auto pass = [&](const Bits& in, Bits& out, bool horizontal) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        bool any = false, all = true;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          const auto xx = static_cast<std::ptrdiff_t>(x) + (horizontal ? d : 0);
          const auto yy = static_cast<std::ptrdiff_t>(y) + (horizontal ? 0 : d);
          const bool v = xx >= 0 && yy >= 0 && xx < static_cast<std::ptrdiff_t>(W) &&
                         yy < static_cast<std::ptrdiff_t>(H) && in[yy * W + xx];
          any = any || v;
          all = all && v;
        }
        out[y * W + x] = (dilate ? any : all) ? 1 : 0;
      }
    }
  };
  pass(src, tmp, true);
  pass(tmp, dst, false);
  return rle_encode(dst, W, H);
}

namespace detail {

inline bool separated(const Box& a, const Box& b, std::size_t gap) {
  return a.x + a.w + gap <= b.x || b.x + b.w + gap <= a.x || a.y + a.h + gap <= b.y ||
         b.y + b.h + gap <= a.y;
}

inline std::size_t role_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

inline std::vector<BinaryMask> split(const BinaryMask& mask, std::size_t pieces, SplitMix64& rng) {
  std::vector<BinaryMask> out{mask};
  for (std::size_t t = 1; t < pieces; ++t) {
    std::size_t target = 0;
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (out[i].area() > out[target].area()) target = i;
    }
    const auto g = mask_geometry(out[target]);
    bool vertical = rng.coin();
    if ((vertical ? g.bbox.w : g.bbox.h) < 2) vertical = !vertical;
    const std::size_t len = vertical ? g.bbox.w : g.bbox.h;
    if (len < 2) break;
    const std::size_t start = vertical ? g.bbox.x : g.bbox.y;
    const std::size_t cut = rng.between(start + 1, start + len - 1);
    const Extent e = mask.extent();
    const Box half = vertical ? Box{0, 0, cut, e.height} : Box{0, 0, e.width, cut};
    auto first = mask_intersection(out[target], box_mask(e, half));
    auto second = mask_difference(out[target], first);
    if (first.is_empty() || second.is_empty()) continue;
    out[target] = std::move(first);
    out.push_back(std::move(second));
  }
  return out;
}

}  // namespace detail

/// Builds a scene. Throws PlacementError when the objects cannot be packed.
///
/// Prompted results are keyed by the instance ids label_components assigns
/// to the map with default parameters.
inline Scene generate_scene(const SceneParams& params) {
  params.validate();
  SplitMix64 rng(params.seed);
  const Extent extent{params.width, params.height};
  const std::size_t n = params.n_objects;
  const std::size_t margin = params.boundary_noise + 1;

  Scene scene;
  scene.params = params;
  scene.legend = default_legend();

  // Roles: exact counts, then a Fisher-Yates shuffle.
  std::vector<ObjectRole> roles;
  auto add = [&](ObjectRole r, std::size_t k) {
    for (std::size_t i = 0; i < k && roles.size() < n; ++i) roles.push_back(r);
  };
  add(ObjectRole::shape_changed, detail::role_count(params.change_fractions.shape_change, n));
  add(ObjectRole::removed, detail::role_count(params.change_fractions.removal, n));
  add(ObjectRole::new_object, detail::role_count(params.change_fractions.new_object, n));
  add(ObjectRole::unchanged, n);
  for (std::size_t i = n; i > 1; --i) std::swap(roles[i - 1], roles[rng.below(i)]);

  const std::size_t max_side = std::max(kMinSide, std::min(params.width, params.height) / 5);
  for (std::size_t i = 0; i < n; ++i) {
    SceneObject obj;
    obj.id = static_cast<std::uint32_t>(i + 1);
    obj.role = roles[i];
    obj.class_code = static_cast<ClassCode>(kBuilding + rng.below(3));
    if (obj.class_code == kBuilding) {
      obj.shape = ShapeKind::rectangle;
    } else if (obj.class_code == kWater) {
      obj.shape = ShapeKind::ellipse;
    } else {
      obj.shape = rng.coin() ? ShapeKind::rectangle : ShapeKind::ellipse;
    }
    const std::size_t w = rng.between(kMinSide, max_side);
    const std::size_t h = rng.between(kMinSide, max_side);
    if (w + 2 * margin > params.width || h + 2 * margin > params.height) {
      throw PlacementError("scene " + to_string(extent) + " too small for a " + std::to_string(w) + "x" +
                           std::to_string(h) + " object");
    }

    bool placed = false;
    for (std::size_t attempt = 0; attempt < kPlacementTries && !placed; ++attempt) {
      const Box b{rng.between(margin, params.width - margin - w), rng.between(margin, params.height - margin - h), w, h};
      placed = std::all_of(scene.objects.begin(), scene.objects.end(),
                           [&](const SceneObject& o) { return detail::separated(b, o.bbox, 2 * margin); });
      if (placed) obj.bbox = b;
    }
    if (!placed) {
      throw PlacementError("could not place object " + std::to_string(obj.id) + " of " + std::to_string(n) +
                           " after " + std::to_string(kPlacementTries) + " tries");
    }

    if (obj.role == ObjectRole::shape_changed) {
      const bool shrink_x = rng.coin();
      const double factor = kShrinkLo + (kShrinkHi - kShrinkLo) * rng.uniform();
      Box c = obj.bbox;
      std::size_t& side = shrink_x ? c.w : c.h;
      std::size_t& pos = shrink_x ? c.x : c.y;
      const std::size_t old_side = side;
      side = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(old_side * factor + 0.5)));
      pos += (old_side - side) / 2;
      // Under the worst noise draw (full dilation) the shrunk object must
      // still overlap its old footprint by less than kMaxShrunkOverlap.
      const auto old_mask = shape_mask(extent, obj.shape, obj.bbox);
      while (side > 1 &&
             iou(morph(shape_mask(extent, obj.shape, c), params.boundary_noise, true), old_mask) >=
                 kMaxShrunkOverlap) {
        --side;
        pos = (shrink_x ? obj.bbox.x : obj.bbox.y) + (old_side - side) / 2;
      }
      obj.changed_bbox = c;
    }
    scene.objects.push_back(obj);
  }

  // Map: everything that existed before the change.
  scene.map = LabelRaster(params.width, params.height, kBackground);
  for (const auto& o : scene.objects) {
    if (o.role == ObjectRole::new_object) continue;
    const auto footprint = shape_mask(extent, o.shape, o.bbox);
    for (const auto& s : footprint.spans()) {
      for (std::size_t p = s.begin; p < s.end; ++p) scene.map.set(p % params.width, p / params.width, o.class_code);
    }
  }

  // Segmenter view: objects present now, each noisy and split.
  std::vector<BinaryMask> masks;
  std::vector<Span> present;
  std::vector<Span> appeared;
  MaskId next_id = 1;
  for (const auto& o : scene.objects) {
    if (o.role == ObjectRole::removed) continue;
    const Box geom = o.changed_bbox.value_or(o.bbox);
    BinaryMask seen = shape_mask(extent, o.shape, geom);
    const std::size_t radius = static_cast<std::size_t>(rng.below(params.boundary_noise + 1));
    if (radius > 0) {
      const bool dilate = rng.coin();
      auto noisy = morph(seen, radius, dilate);
      if (noisy.is_empty()) noisy = morph(seen, radius, true);
      seen = std::move(noisy);
    }
    present = segcd::detail::unite(present, seen.spans());
    if (o.role == ObjectRole::new_object) appeared = segcd::detail::unite(appeared, seen.spans());
    const std::size_t pieces = 1 + static_cast<std::size_t>(rng.below(params.split_k));
    for (auto& piece : detail::split(seen, pieces, rng)) {
      const double score = 0.85 + 0.15 * rng.uniform();
      masks.push_back(piece.with_id(next_id++).with_score(score));
    }
  }
  const auto everything = box_mask(extent, {0, 0, params.width, params.height});
  const auto background =
      BinaryMask::from_spans(extent, segcd::detail::subtract(everything.spans(), present), next_id++, 1.0);
  if (!background.is_empty()) masks.push_back(background);
  scene.masks = MaskSet(params.width, params.height, std::move(masks));

  // Truth: old footprints of changed/removed objects, new objects where they appear.
  std::vector<Span> truth;
  for (const auto& o : scene.objects) {
    if (o.role == ObjectRole::unchanged) continue;
    truth = segcd::detail::unite(truth, shape_mask(extent, o.shape, o.bbox).spans());
  }
  scene.truth = ChangeMap(extent);
  for (const auto& s : truth) {
    for (std::size_t p = s.begin; p < s.end; ++p) scene.truth.set_index(p);
  }

  // Prompted segmentation of each background instance misses what appeared on it.
  const auto ccl = label_components(scene.map);
  for (const auto& inst : ccl.instances) {
    if (!scene.legend.is_background(inst.class_code)) continue;
    scene.prompted.push_back(
        {inst.id, BinaryMask::from_spans(extent, segcd::detail::subtract(inst.mask.spans(), appeared), inst.id)});
  }
  return scene;
}

/// Object list, parameter echo and generator identification.
inline nlohmann::json scene_manifest(const Scene& scene) {
  using nlohmann::json;
  auto box = [](const Box& b) { return json::array({b.x, b.y, b.w, b.h}); };
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json j = {{"id", o.id},
              {"class", o.class_code},
              {"role", to_string(o.role)},
              {"shape", to_string(o.shape)},
              {"bbox", box(o.bbox)}};
    if (o.changed_bbox) j["changed_bbox"] = box(*o.changed_bbox);
    objects.push_back(std::move(j));
  }
  const auto& p = scene.params;
  char hex[3][19];
  std::snprintf(hex[0], sizeof hex[0], "0x%016llX", static_cast<unsigned long long>(SplitMix64::kGamma));
  std::snprintf(hex[1], sizeof hex[1], "0x%016llX", static_cast<unsigned long long>(SplitMix64::kMix1));
  std::snprintf(hex[2], sizeof hex[2], "0x%016llX", static_cast<unsigned long long>(SplitMix64::kMix2));
  return {{"params",
           {{"seed", p.seed},
            {"width", p.width},
            {"height", p.height},
            {"n_objects", p.n_objects},
            {"change_fractions",
             {{"shape_change", p.change_fractions.shape_change},
              {"removal", p.change_fractions.removal},
              {"new_object", p.change_fractions.new_object}}},
            {"split_k", p.split_k},
            {"boundary_noise", p.boundary_noise}}},
          {"prng",
           {{"name", "splitmix64"},
            {"gamma", hex[0]},
            {"mix1", hex[1]},
            {"mix2", hex[2]},
            {"shifts", json::array({30, 27, 31})}}},
          {"objects", std::move(objects)}};
}

}  // namespace synth

using synth::generate_scene;

}  // namespace segcd
