#pragma once

// Run-length encoded binary masks and the set algebra / shape attributes
// built on them.
//
// Runs follow a row-major scan and alternate zero-runs and one-runs,
// starting with a zero-run. The leading zero-run may have length 0; every
// other run is strictly positive. Under that rule every bitvector has exactly
// one encoding, so equality of runs is equality of masks.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segcd/error.hpp"
#include "segcd/raster.hpp"

namespace segcd {

using Run = std::uint32_t;

/// Half-open interval [begin, end) of set pixels in row-major index space.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

namespace detail {

inline std::vector<Span> runs_to_spans(std::span<const Run> runs) {
  std::vector<Span> spans;
  spans.reserve(runs.size() / 2);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1) spans.push_back({pos, pos + runs[i]});
    pos += runs[i];
  }
  return spans;
}

inline std::vector<Run> spans_to_runs(std::span<const Span> spans, std::size_t total) {
  std::vector<Run> runs;
  runs.reserve(spans.size() * 2 + 1);
  std::size_t pos = 0;
  for (const auto& s : spans) {
    runs.push_back(static_cast<Run>(s.begin - pos));
    runs.push_back(static_cast<Run>(s.size()));
    pos = s.end;
  }
  if (pos < total || runs.empty()) runs.push_back(static_cast<Run>(total - pos));
  return runs;
}

/// Sorted, non-overlapping, non-empty, non-adjacent spans inside [0, total).
inline bool spans_canonical(std::span<const Span> spans, std::size_t total) {
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.begin >= s.end || s.end > total) return false;
    if (i > 0 && s.begin <= prev_end) return false;
    prev_end = s.end;
  }
  return true;
}

}  // namespace detail

/// One segmentation mask over a width x height grid, stored as runs.
///
/// Instances are immutable once built; every factory validates its input.
class BinaryMask {
 public:
  BinaryMask() = default;

  /// Throws CorruptMaskError unless `runs` is a canonical encoding summing to width*height.
  static BinaryMask from_runs(std::size_t width, std::size_t height, std::vector<Run> runs,
                              MaskId id = 0, double score = 1.0) {
    if (width == 0 || height == 0) throw DimensionError("mask must be at least 1x1");
    if (runs.empty()) throw CorruptMaskError("mask has no runs");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i > 0 && runs[i] == 0) {
        throw CorruptMaskError("zero-length run at position " + std::to_string(i));
      }
      sum += runs[i];
    }
    if (sum != static_cast<std::uint64_t>(width) * height) {
      throw CorruptMaskError("runs sum to " + std::to_string(sum) + ", expected " +
                             std::to_string(width * height));
    }
    BinaryMask m;
    m.extent_ = {width, height};
    m.spans_ = detail::runs_to_spans(runs);
    m.runs_ = std::move(runs);
    m.id_ = id;
    m.score_ = score;
    return m;
  }

  static BinaryMask from_spans(Extent extent, std::vector<Span> spans, MaskId id = 0,
                               double score = 1.0) {
    if (extent.width == 0 || extent.height == 0) throw DimensionError("mask must be at least 1x1");
    if (!detail::spans_canonical(spans, extent.pixels())) {
      throw CorruptMaskError("spans are not sorted, disjoint and in range");
    }
    BinaryMask m;
    m.extent_ = extent;
    m.runs_ = detail::spans_to_runs(spans, extent.pixels());
    m.spans_ = std::move(spans);
    m.id_ = id;
    m.score_ = score;
    return m;
  }

  static BinaryMask empty(Extent extent, MaskId id = 0) { return from_spans(extent, {}, id); }

  std::size_t width() const noexcept { return extent_.width; }
  std::size_t height() const noexcept { return extent_.height; }
  Extent extent() const noexcept { return extent_; }
  std::span<const Run> runs() const noexcept { return runs_; }
  std::span<const Span> spans() const noexcept { return spans_; }
  MaskId id() const noexcept { return id_; }
  double score() const noexcept { return score_; }

  std::size_t area() const noexcept {
    std::size_t a = 0;
    for (const auto& s : spans_) a += s.size();
    return a;
  }

  bool is_empty() const noexcept { return spans_.empty(); }

  BinaryMask with_id(MaskId id) const {
    BinaryMask m = *this;
    m.id_ = id;
    return m;
  }

  BinaryMask with_score(double score) const {
    BinaryMask m = *this;
    m.score_ = score;
    return m;
  }

  /// Same pixels, ignoring id and score.
  bool same_pixels(const BinaryMask& other) const noexcept {
    return extent_ == other.extent_ && runs_ == other.runs_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Extent extent_;
  std::vector<Run> runs_;
  std::vector<Span> spans_;
  MaskId id_ = 0;
  double score_ = 1.0;
};

inline BinaryMask rle_encode(std::span<const std::uint8_t> bits, std::size_t width,
                             std::size_t height, MaskId id = 0, double score = 1.0) {
  if (bits.size() != width * height) {
    throw DimensionError("rle_encode: " + std::to_string(bits.size()) + " bits for a " +
                         std::to_string(width) + "x" + std::to_string(height) + " grid");
  }
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < bits.size()) {
    if (!bits[i]) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    while (i < bits.size() && bits[i]) ++i;
    spans.push_back({begin, i});
  }
  return BinaryMask::from_spans({width, height}, std::move(spans), id, score);
}

inline Bits rle_decode(const BinaryMask& mask) {
  Bits bits(mask.extent().pixels(), 0);
  for (const auto& s : mask.spans()) {
    std::fill(bits.begin() + static_cast<std::ptrdiff_t>(s.begin),
              bits.begin() + static_cast<std::ptrdiff_t>(s.end), std::uint8_t{1});
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Set algebra. All binary operations require equal extents.

namespace detail {

inline std::size_t intersection_count(std::span<const Span> a, std::span<const Span> b) {
  std::size_t count = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::size_t lo = std::max(a[i].begin, b[j].begin);
    const std::size_t hi = std::min(a[i].end, b[j].end);
    if (lo < hi) count += hi - lo;
    if (a[i].end < b[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

inline std::vector<Span> unite(std::span<const Span> a, std::span<const Span> b) {
  std::vector<Span> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  auto push = [&out](const Span& s) {
    if (!out.empty() && s.begin <= out.back().end) {
      out.back().end = std::max(out.back().end, s.end);
    } else {
      out.push_back(s);
    }
  };
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].begin <= b[j].begin)) {
      push(a[i++]);
    } else {
      push(b[j++]);
    }
  }
  return out;
}

inline std::vector<Span> subtract(std::span<const Span> a, std::span<const Span> b) {
  std::vector<Span> out;
  std::size_t j = 0;
  for (const auto& s : a) {
    std::size_t cur = s.begin;
    while (j < b.size() && b[j].end <= cur) ++j;
    std::size_t k = j;
    while (k < b.size() && b[k].begin < s.end) {
      if (b[k].begin > cur) out.push_back({cur, b[k].begin});
      cur = std::max(cur, b[k].end);
      if (cur >= s.end) break;
      ++k;
    }
    if (cur < s.end) out.push_back({cur, s.end});
  }
  return out;
}

inline std::vector<Span> intersect(std::span<const Span> a, std::span<const Span> b) {
  std::vector<Span> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::size_t lo = std::max(a[i].begin, b[j].begin);
    const std::size_t hi = std::min(a[i].end, b[j].end);
    if (lo < hi) out.push_back({lo, hi});
    if (a[i].end < b[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

}  // namespace detail

inline std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_extent(a.extent(), b.extent(), "intersection_count");
  return detail::intersection_count(a.spans(), b.spans());
}

inline BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_extent(a.extent(), b.extent(), "mask_union");
  return BinaryMask::from_spans(a.extent(), detail::unite(a.spans(), b.spans()));
}

inline BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  require_same_extent(a.extent(), b.extent(), "mask_intersection");
  return BinaryMask::from_spans(a.extent(), detail::intersect(a.spans(), b.spans()));
}

/// Pixels of `a` not in `b`.
inline BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
  require_same_extent(a.extent(), b.extent(), "mask_difference");
  return BinaryMask::from_spans(a.extent(), detail::subtract(a.spans(), b.spans()));
}

/// |A ∩ B| / |A ∪ B|; 0 when both masks are empty.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t inter = intersection_count(a, b);
  const std::size_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Shape attributes.

struct MaskGeometry {
  std::size_t area = 0;
  Box bbox;
  Point centroid;
  double aspect_ratio = 0.0;  // bbox.w / bbox.h
};

/// Throws EmptyMaskError when the mask has no set pixels.
inline MaskGeometry mask_geometry(const BinaryMask& mask) {
  if (mask.is_empty()) throw EmptyMaskError("geometry of an empty mask (id " + std::to_string(mask.id()) + ")");
  const std::size_t w = mask.width();
  std::size_t min_x = std::numeric_limits<std::size_t>::max(), max_x = 0;
  std::size_t min_y = std::numeric_limits<std::size_t>::max(), max_y = 0;
  std::size_t area = 0;
  // Integer sums keep the centroid exact up to the final division.
  std::uint64_t sum_x = 0, sum_y = 0;
  for (const auto& s : mask.spans()) {
    std::size_t pos = s.begin;
    while (pos < s.end) {
      const std::size_t y = pos / w;
      const std::size_t x0 = pos % w;
      const std::size_t row_end = std::min(s.end, (y + 1) * w);
      const std::size_t x1 = row_end - y * w;  // exclusive
      const std::size_t n = x1 - x0;
      area += n;
      sum_x += static_cast<std::uint64_t>(x0 + x1 - 1) * n / 2;
      sum_y += static_cast<std::uint64_t>(y) * n;
      min_x = std::min(min_x, x0);
      max_x = std::max(max_x, x1 - 1);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      pos = row_end;
    }
  }
  MaskGeometry g;
  g.area = area;
  g.bbox = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
  g.centroid = {static_cast<double>(sum_x) / static_cast<double>(area),
                static_cast<double>(sum_y) / static_cast<double>(area)};
  g.aspect_ratio = static_cast<double>(g.bbox.w) / static_cast<double>(g.bbox.h);
  return g;
}

/// Mask covering exactly `box`.
inline BinaryMask box_mask(Extent extent, const Box& box, MaskId id = 0) {
  if (box.x + box.w > extent.width || box.y + box.h > extent.height) {
    throw DimensionError("box exceeds the grid");
  }
  std::vector<Span> spans;
  if (box.w > 0) {
    for (std::size_t y = box.y; y < box.y + box.h; ++y) {
      const std::size_t b = y * extent.width + box.x;
      if (!spans.empty() && spans.back().end == b) {
        spans.back().end = b + box.w;
      } else {
        spans.push_back({b, b + box.w});
      }
    }
  }
  return BinaryMask::from_spans(extent, std::move(spans), id);
}

/// Segmenter output: all masks share the set's extent and have unique ids.
class MaskSet {
 public:
  MaskSet() = default;

  MaskSet(std::size_t width, std::size_t height, std::vector<BinaryMask> masks)
      : extent_{width, height}, masks_(std::move(masks)) {
    if (width == 0 || height == 0) throw DimensionError("mask set must be at least 1x1");
    std::set<MaskId> ids;
    for (const auto& m : masks_) {
      if (m.extent() != extent_) {
        throw DimensionError("mask " + std::to_string(m.id()) + " is " + to_string(m.extent()) +
                             ", mask set is " + to_string(extent_));
      }
      if (!ids.insert(m.id()).second) {
        throw CorruptMaskError("duplicate mask id " + std::to_string(m.id()));
      }
    }
  }

  std::size_t width() const noexcept { return extent_.width; }
  std::size_t height() const noexcept { return extent_.height; }
  Extent extent() const noexcept { return extent_; }
  std::span<const BinaryMask> masks() const noexcept { return masks_; }
  std::size_t size() const noexcept { return masks_.size(); }

  friend bool operator==(const MaskSet&, const MaskSet&) = default;

 private:
  Extent extent_;
  std::vector<BinaryMask> masks_;
};

}  // namespace segcd
