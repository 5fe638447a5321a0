#pragma once

// File formats.
//
//   graymap      P5 binary graymap: "P5\n<width> <height>\n<maxval>\n" then raw
//                samples; maxval 255 -> 8-bit, 65535 -> 16-bit big-endian.
//                Label rasters are written 16-bit; change maps 8-bit {0,255}.
//   pixmap       P6 binary RGB pixmap, 8-bit (overlay output only).
//   legend       text, one `code,name,is_background` entry per line, is_background
//                in {0,1}; lines starting with '#' and blank lines are ignored.
//   mask set     JSON {"width":W,"height":H,"masks":[{"id":I,"score":S,"runs":[...]}]}
//   instances    JSON {"width":W,"height":H,"instances":[{"id","class_code","area",
//                "bbox":[x,y,w,h],"centroid":[x,y],"runs":[...]}]}
//   prompts      JSON [{"instance_id","class_code","box":[x,y,w,h],"runs":[...]}]
//   results      JSON {"width":W,"height":H,"results":[{"instance_id","runs":[...]}]}
//   verdicts     CSV instance_id,changed,best_overlap,n_masks_used

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "segcd/ccl.hpp"
#include "segcd/error.hpp"
#include "segcd/mask.hpp"
#include "segcd/noprompt.hpp"
#include "segcd/prompt.hpp"
#include "segcd/raster.hpp"

namespace segcd {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

inline void write_text(const std::string& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const std::string& path) {
  const auto b = read_file(path);
  return std::string(b.begin(), b.end());
}

// ---------------------------------------------------------------------------
// Graymaps

struct Graymap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint16_t maxval = 255;
  std::vector<std::uint16_t> samples;
};

namespace detail {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint64_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 0xFFFFFFFFull) throw FormatError(std::string(what) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("expected ") + what, start);
    return v;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Graymap decode_graymap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("missing P5 magic number", 0);
  }
  detail::HeaderReader r(bytes);
  r.advance(2);
  if (bytes.size() <= 2 || !std::isspace(bytes[2])) throw FormatError("expected whitespace after magic", 2);
  Graymap g;
  g.width = r.number("width");
  g.height = r.number("height");
  const std::size_t maxval_at = r.pos();
  const auto maxval = r.number("maxval");
  if (g.width == 0 || g.height == 0) throw FormatError("zero image dimension", maxval_at);
  if (maxval != 255 && maxval != 65535) {
    throw FormatError("maxval must be 255 or 65535, got " + std::to_string(maxval), r.pos());
  }
  g.maxval = static_cast<std::uint16_t>(maxval);
  if (r.pos() >= bytes.size() || !std::isspace(bytes[r.pos()])) {
    throw FormatError("expected single whitespace after maxval", r.pos());
  }
  r.advance(1);

  const std::size_t sample_bytes = g.maxval == 65535 ? 2 : 1;
  const std::size_t n = g.width * g.height;
  const std::size_t data = r.pos();
  const std::size_t need = n * sample_bytes;
  if (bytes.size() - data < need) {
    throw FormatError("truncated pixel data: need " + std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - data),
                      bytes.size());
  }
  if (bytes.size() - data > need) throw FormatError("trailing bytes after pixel data", data + need);
  g.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (sample_bytes == 2) {
      g.samples[i] = static_cast<std::uint16_t>((bytes[data + 2 * i] << 8) | bytes[data + 2 * i + 1]);
    } else {
      g.samples[i] = bytes[data + i];
    }
  }
  return g;
}

inline Bytes encode_graymap(const Graymap& g) {
  const std::string header =
      "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n" + std::to_string(g.maxval) + "\n";
  Bytes out(header.begin(), header.end());
  const bool wide = g.maxval > 255;
  out.reserve(out.size() + g.samples.size() * (wide ? 2 : 1));
  for (auto s : g.samples) {
    if (wide) {
      out.push_back(static_cast<std::uint8_t>(s >> 8));
      out.push_back(static_cast<std::uint8_t>(s & 0xFF));
    } else {
      out.push_back(static_cast<std::uint8_t>(s));
    }
  }
  return out;
}

inline LabelRaster decode_label_raster(std::span<const std::uint8_t> bytes) {
  auto g = decode_graymap(bytes);
  return LabelRaster(g.width, g.height, std::move(g.samples));
}

inline Bytes encode_label_raster(const LabelRaster& raster) {
  Graymap g{raster.width(), raster.height(), 65535, {raster.pixels().begin(), raster.pixels().end()}};
  return encode_graymap(g);
}

/// Any nonzero sample reads as changed.
inline ChangeMap decode_change_map(std::span<const std::uint8_t> bytes) {
  const auto g = decode_graymap(bytes);
  Bits bits(g.samples.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = g.samples[i] != 0 ? 1 : 0;
  return ChangeMap(g.width, g.height, std::move(bits));
}

inline Bytes encode_change_map(const ChangeMap& map) {
  Graymap g{map.width(), map.height(), 255, {}};
  g.samples.reserve(map.bits().size());
  for (auto b : map.bits()) g.samples.push_back(b ? 255 : 0);
  return encode_graymap(g);
}

/// Instance ids as a 16-bit graymap; ids above 65535 cannot be represented.
inline Bytes encode_instance_map(const InstanceMap& map) {
  Graymap g{map.width(), map.height(), 65535, {}};
  g.samples.reserve(map.labels().size());
  for (auto id : map.labels()) {
    if (id > 65535) throw ExportError("instance id " + std::to_string(id) + " exceeds 16-bit export range");
    g.samples.push_back(static_cast<std::uint16_t>(id));
  }
  return encode_graymap(g);
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// P6 pixmap of `base` in gray with changed pixels painted `highlight`.
inline Bytes encode_overlay(const Graymap& base, const ChangeMap& change, Rgb highlight) {
  require_same_extent({base.width, base.height}, change.extent(), "overlay");
  const std::string header =
      "P6\n" + std::to_string(base.width) + " " + std::to_string(base.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  std::uint16_t lo = 0xFFFF, hi = 0;
  for (auto s : base.samples) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (std::size_t i = 0; i < base.samples.size(); ++i) {
    if (change.bits()[i]) {
      out.insert(out.end(), {highlight.r, highlight.g, highlight.b});
      continue;
    }
    const auto v = hi == lo ? std::uint8_t{128}
                            : static_cast<std::uint8_t>((base.samples[i] - lo) * 255u / (hi - lo));
    out.insert(out.end(), {v, v, v});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Legend

inline Legend parse_legend(std::string_view text) {
  std::vector<LegendEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    const std::string where = "legend line " + std::to_string(line_no) + ": ";
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) throw FormatError(where + "expected code,name,is_background");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string code_s = trim(line.substr(0, c1));
    const std::string name = trim(line.substr(c1 + 1, c2 - c1 - 1));
    const std::string bg_s = trim(line.substr(c2 + 1));
    if (code_s.empty() || code_s.find_first_not_of("0123456789") != std::string::npos || code_s.size() > 5) {
      throw FormatError(where + "bad class code '" + code_s + "'");
    }
    const unsigned long code = std::stoul(code_s);
    if (code > 65535) throw FormatError(where + "class code exceeds 65535");
    if (bg_s != "0" && bg_s != "1") throw FormatError(where + "is_background must be 0 or 1");
    entries.push_back({static_cast<ClassCode>(code), name, bg_s == "1"});
  }
  try {
    return Legend(std::move(entries));
  } catch (const LegendError& e) {
    throw FormatError(std::string("legend: ") + e.what());
  }
}

inline std::string format_legend(const Legend& legend) {
  std::string out = "# code,name,is_background\n";
  for (const auto& e : legend.entries()) {
    out += std::to_string(e.code) + "," + e.name + "," + (e.is_background ? "1" : "0") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents

using Json = nlohmann::json;

namespace detail {

inline Json parse_json(std::string_view text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string(what) + ": invalid JSON: " + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
}

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(where + ": missing field '" + key + "'");
  return *it;
}

inline std::uint64_t unsigned_field(const Json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number_unsigned()) throw FormatError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline Extent extent_of(const Json& doc, const std::string& where) {
  const auto w = unsigned_field(doc, "width", where);
  const auto h = unsigned_field(doc, "height", where);
  if (w == 0 || h == 0) throw FormatError(where + ": width and height must be >= 1");
  return {static_cast<std::size_t>(w), static_cast<std::size_t>(h)};
}

inline BinaryMask mask_from(const Json& obj, Extent extent, MaskId id, double score,
                            const std::string& where) {
  const auto& runs_j = field(obj, "runs", where);
  if (!runs_j.is_array()) throw FormatError(where + ".runs: expected an array");
  std::vector<Run> runs;
  runs.reserve(runs_j.size());
  for (const auto& r : runs_j) {
    if (!r.is_number_unsigned() || r.get<std::uint64_t>() > 0xFFFFFFFFull) {
      throw FormatError(where + ".runs: expected non-negative 32-bit integers");
    }
    runs.push_back(r.get<Run>());
  }
  try {
    return BinaryMask::from_runs(extent.width, extent.height, std::move(runs), id, score);
  } catch (const CorruptMaskError& e) {
    throw FormatError(where + ".runs: " + e.what());
  }
}

inline Json runs_json(const BinaryMask& m) { return Json(std::vector<Run>(m.runs().begin(), m.runs().end())); }

inline Json box_json(const Box& b) { return Json::array({b.x, b.y, b.w, b.h}); }

inline std::string dump(const Json& j) { return j.dump() + "\n"; }

}  // namespace detail

inline MaskSet parse_mask_set(std::string_view text) {
  const Json doc = detail::parse_json(text, "mask set");
  const Extent ext = detail::extent_of(doc, "mask set");
  const auto& masks_j = detail::field(doc, "masks", "mask set");
  if (!masks_j.is_array()) throw FormatError("mask set.masks: expected an array");
  std::vector<BinaryMask> masks;
  masks.reserve(masks_j.size());
  std::set<MaskId> ids;
  for (std::size_t i = 0; i < masks_j.size(); ++i) {
    const std::string where = "masks[" + std::to_string(i) + "]";
    const auto& m = masks_j[i];
    const auto id = detail::unsigned_field(m, "id", where);
    if (id > 0xFFFFFFFFull) throw FormatError(where + ".id: exceeds 32 bits");
    double score = 1.0;
    if (m.is_object() && m.contains("score")) {
      if (!m["score"].is_number()) throw FormatError(where + ".score: expected a number");
      score = m["score"].get<double>();
      if (!(score >= 0.0 && score <= 1.0)) throw FormatError(where + ".score: outside [0,1]");
    }
    if (!ids.insert(static_cast<MaskId>(id)).second) throw FormatError(where + ".id: duplicate mask id " + std::to_string(id));
    masks.push_back(detail::mask_from(m, ext, static_cast<MaskId>(id), score, where));
  }
  return MaskSet(ext.width, ext.height, std::move(masks));
}

inline std::string format_mask_set(const MaskSet& set) {
  Json masks = Json::array();
  for (const auto& m : set.masks()) {
    masks.push_back({{"id", m.id()}, {"score", m.score()}, {"runs", detail::runs_json(m)}});
  }
  return detail::dump({{"width", set.width()}, {"height", set.height()}, {"masks", std::move(masks)}});
}

/// Instance dump written by `ccl`; derived attributes are recomputed on load
/// and must agree with the stored ones.
inline std::string format_instances(Extent extent, std::span<const Instance> instances) {
  Json arr = Json::array();
  for (const auto& inst : instances) {
    arr.push_back({{"id", inst.id},
                   {"class_code", inst.class_code},
                   {"area", inst.area},
                   {"bbox", detail::box_json(inst.bbox)},
                   {"centroid", Json::array({inst.centroid.x, inst.centroid.y})},
                   {"runs", detail::runs_json(inst.mask)}});
  }
  return detail::dump({{"width", extent.width}, {"height", extent.height}, {"instances", std::move(arr)}});
}

struct InstanceSet {
  Extent extent;
  std::vector<Instance> instances;
};

inline InstanceSet parse_instances(std::string_view text) {
  const Json doc = detail::parse_json(text, "instances");
  InstanceSet out;
  out.extent = detail::extent_of(doc, "instances");
  const auto& arr = detail::field(doc, "instances", "instances");
  if (!arr.is_array()) throw FormatError("instances.instances: expected an array");
  std::set<InstanceId> ids;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "instances[" + std::to_string(i) + "]";
    const auto& j = arr[i];
    const auto id = detail::unsigned_field(j, "id", where);
    const auto code = detail::unsigned_field(j, "class_code", where);
    if (id == 0 || id > 0xFFFFFFFFull) throw FormatError(where + ".id: must be in 1..2^32-1");
    if (code > 65535) throw FormatError(where + ".class_code: exceeds 65535");
    if (!ids.insert(static_cast<InstanceId>(id)).second) throw FormatError(where + ".id: duplicate");
    auto mask = detail::mask_from(j, out.extent, static_cast<MaskId>(id), 1.0, where);
    if (mask.is_empty()) throw FormatError(where + ": instance has no pixels");
    auto inst = Instance::from_mask(static_cast<InstanceId>(id), static_cast<ClassCode>(code), std::move(mask));
    if (j.contains("area") && (!j["area"].is_number_unsigned() || j["area"].get<std::uint64_t>() != inst.area)) {
      throw FormatError(where + ".area: does not match runs");
    }
    out.instances.push_back(std::move(inst));
  }
  return out;
}

inline std::string format_prompts(std::span<const PromptSpec> prompts) {
  Json arr = Json::array();
  for (const auto& p : prompts) {
    arr.push_back({{"instance_id", p.instance_id},
                   {"class_code", p.class_code},
                   {"box", detail::box_json(p.prompt_box)},
                   {"runs", detail::runs_json(p.prompt_mask)}});
  }
  return detail::dump(arr);
}

/// Prompt files carry no dimensions, so the scene extent is supplied.
inline std::vector<PromptSpec> parse_prompts(std::string_view text, Extent extent) {
  const Json doc = detail::parse_json(text, "prompts");
  if (!doc.is_array()) throw FormatError("prompts: expected an array");
  std::vector<PromptSpec> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "prompts[" + std::to_string(i) + "]";
    const auto& j = doc[i];
    PromptSpec p;
    p.instance_id = static_cast<InstanceId>(detail::unsigned_field(j, "instance_id", where));
    p.class_code = static_cast<ClassCode>(detail::unsigned_field(j, "class_code", where));
    const auto& box = detail::field(j, "box", where);
    if (!box.is_array() || box.size() != 4) throw FormatError(where + ".box: expected [x,y,w,h]");
    for (const auto& v : box) {
      if (!v.is_number_unsigned()) throw FormatError(where + ".box: expected non-negative integers");
    }
    p.prompt_box = {box[0].get<std::size_t>(), box[1].get<std::size_t>(), box[2].get<std::size_t>(),
                    box[3].get<std::size_t>()};
    p.prompt_mask = detail::mask_from(j, extent, p.instance_id, 1.0, where);
    out.push_back(std::move(p));
  }
  return out;
}

struct PromptedResultSet {
  Extent extent;
  std::vector<PromptedResult> results;
};

inline std::string format_prompted_results(Extent extent, std::span<const PromptedResult> results) {
  Json arr = Json::array();
  for (const auto& r : results) {
    arr.push_back({{"instance_id", r.instance_id}, {"runs", detail::runs_json(r.segmented)}});
  }
  return detail::dump({{"width", extent.width}, {"height", extent.height}, {"results", std::move(arr)}});
}

inline PromptedResultSet parse_prompted_results(std::string_view text) {
  const Json doc = detail::parse_json(text, "prompted results");
  PromptedResultSet out;
  out.extent = detail::extent_of(doc, "prompted results");
  const auto& arr = detail::field(doc, "results", "prompted results");
  if (!arr.is_array()) throw FormatError("prompted results.results: expected an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "results[" + std::to_string(i) + "]";
    const auto id = detail::unsigned_field(arr[i], "instance_id", where);
    if (id > 0xFFFFFFFFull) throw FormatError(where + ".instance_id: exceeds 32 bits");
    out.results.push_back({static_cast<InstanceId>(id),
                           detail::mask_from(arr[i], out.extent, static_cast<MaskId>(id), 1.0, where)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_verdicts_csv(std::span<const InstanceVerdict> verdicts) {
  std::string out = "instance_id,changed,best_overlap,n_masks_used\n";
  char buf[32];
  for (const auto& v : verdicts) {
    std::snprintf(buf, sizeof buf, "%.6f", v.best_overlap);
    out += std::to_string(v.instance_id) + "," + (v.changed ? "1" : "0") + "," + buf + "," +
           std::to_string(v.masks_used.size()) + "\n";
  }
  return out;
}

}  // namespace segcd
