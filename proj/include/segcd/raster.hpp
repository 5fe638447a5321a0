#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segcd/error.hpp"

namespace segcd {

using ClassCode = std::uint16_t;
using InstanceId = std::uint32_t;
using MaskId = std::uint32_t;

/// Row-major 0/1 pixel vector.
using Bits = std::vector<std::uint8_t>;

struct Extent {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t pixels() const noexcept { return width * height; }
  friend bool operator==(const Extent&, const Extent&) = default;
};

inline std::string to_string(const Extent& e) {
  return std::to_string(e.width) + "x" + std::to_string(e.height);
}

inline void require_same_extent(const Extent& a, const Extent& b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
  }
}

/// Axis-aligned pixel rectangle, half-open: [x, x + w) x [y, y + h).
struct Box {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Grid of land-cover class codes, e.g. a rasterized map layer.
class LabelRaster {
 public:
  LabelRaster() = default;

  LabelRaster(std::size_t width, std::size_t height, ClassCode fill = 0)
      : extent_{width, height}, pixels_(width * height, fill) {
    check_extent();
  }

  LabelRaster(std::size_t width, std::size_t height, std::vector<ClassCode> pixels)
      : extent_{width, height}, pixels_(std::move(pixels)) {
    check_extent();
    if (pixels_.size() != extent_.pixels()) {
      throw DimensionError("label raster: " + std::to_string(pixels_.size()) +
                           " pixels for a " + to_string(extent_) + " grid");
    }
  }

  std::size_t width() const noexcept { return extent_.width; }
  std::size_t height() const noexcept { return extent_.height; }
  Extent extent() const noexcept { return extent_; }
  std::span<const ClassCode> pixels() const noexcept { return pixels_; }

  ClassCode at(std::size_t x, std::size_t y) const { return pixels_[y * extent_.width + x]; }
  void set(std::size_t x, std::size_t y, ClassCode code) { pixels_[y * extent_.width + x] = code; }

  friend bool operator==(const LabelRaster&, const LabelRaster&) = default;

 private:
  void check_extent() const {
    if (extent_.width == 0 || extent_.height == 0) {
      throw DimensionError("label raster must be at least 1x1");
    }
  }

  Extent extent_;
  std::vector<ClassCode> pixels_;
};

struct LegendEntry {
  ClassCode code = 0;
  std::string name;
  bool is_background = false;

  friend bool operator==(const LegendEntry&, const LegendEntry&) = default;
};

/// Class-code table. Background classes are the ones usable as segmenter prompts.
class Legend {
 public:
  Legend() = default;

  explicit Legend(std::vector<LegendEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw LegendError("legend has no entries");
    std::set<ClassCode> seen;
    for (const auto& e : entries_) {
      if (!seen.insert(e.code).second) {
        throw LegendError("duplicate legend code " + std::to_string(e.code));
      }
    }
  }

  std::span<const LegendEntry> entries() const noexcept { return entries_; }

  const LegendEntry* find(ClassCode code) const noexcept {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [code](const LegendEntry& e) { return e.code == code; });
    return it == entries_.end() ? nullptr : &*it;
  }

  bool contains(ClassCode code) const noexcept { return find(code) != nullptr; }

  /// Throws LegendError if `code` is absent.
  bool is_background(ClassCode code) const {
    const auto* e = find(code);
    if (e == nullptr) throw LegendError("class code " + std::to_string(code) + " not in legend");
    return e->is_background;
  }

  /// Every code used by `raster` must have an entry.
  void check_covers(const LabelRaster& raster) const {
    std::set<ClassCode> used(raster.pixels().begin(), raster.pixels().end());
    for (ClassCode c : used) {
      if (!contains(c)) throw LegendError("raster uses class code " + std::to_string(c) + " missing from legend");
    }
  }

  friend bool operator==(const Legend&, const Legend&) = default;

 private:
  std::vector<LegendEntry> entries_;
};

/// Binary changed/unchanged raster.
class ChangeMap {
 public:
  ChangeMap() = default;

  ChangeMap(std::size_t width, std::size_t height)
      : extent_{width, height}, changed_(width * height, 0) {}

  ChangeMap(std::size_t width, std::size_t height, Bits changed)
      : extent_{width, height}, changed_(std::move(changed)) {
    if (changed_.size() != extent_.pixels()) {
      throw DimensionError("change map: " + std::to_string(changed_.size()) + " pixels for a " +
                           to_string(extent_) + " grid");
    }
    for (auto& b : changed_) b = b ? 1 : 0;
  }

  explicit ChangeMap(Extent e) : ChangeMap(e.width, e.height) {}

  std::size_t width() const noexcept { return extent_.width; }
  std::size_t height() const noexcept { return extent_.height; }
  Extent extent() const noexcept { return extent_; }
  const Bits& bits() const noexcept { return changed_; }

  bool at(std::size_t x, std::size_t y) const { return changed_[y * extent_.width + x] != 0; }
  void set_index(std::size_t i, bool v = true) { changed_[i] = v ? 1 : 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(changed_.begin(), changed_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const ChangeMap&, const ChangeMap&) = default;

 private:
  Extent extent_;
  Bits changed_;
};

}  // namespace segcd
