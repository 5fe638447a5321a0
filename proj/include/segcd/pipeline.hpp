#pragma once

// Command-line front end. Every subcommand reads and writes only files in the
// formats documented in io.hpp, so stages can be run and replaced one by one.
//
// Exit status: 0 success, 1 usage error, 2 data or format error.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segcd/ccl.hpp"
#include "segcd/error.hpp"
#include "segcd/eval.hpp"
#include "segcd/io.hpp"
#include "segcd/noprompt.hpp"
#include "segcd/prompt.hpp"
#include "segcd/synth.hpp"

namespace segcd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

inline constexpr Rgb kHighlight{255, 0, 0};

inline const char* format_help() {
  return R"(File formats:
  graymap (.pgm)   "P5\n<width> <height>\n<maxval>\n" + raw samples; maxval 255 = 8-bit,
                   65535 = 16-bit big-endian. Label rasters are 16-bit class codes;
                   change maps are 8-bit, 0 = unchanged, 255 = changed (any nonzero
                   value reads as changed).
  legend (.txt)    one "code,name,is_background" per line, is_background in {0,1};
                   '#' starts a comment line.
  mask set         {"width":W,"height":H,"masks":[{"id":I,"score":S,"runs":[...]}]}
  runs             row-major run lengths alternating 0s and 1s, starting with a
                   (possibly empty) run of 0s; they sum to W*H.
  instances        {"width":W,"height":H,"instances":[{"id","class_code","area",
                   "bbox":[x,y,w,h],"centroid":[x,y],"runs":[...]}]}
  prompts          [{"instance_id","class_code","box":[x,y,w,h],"runs":[...]}]
  prompted results {"width":W,"height":H,"results":[{"instance_id","runs":[...]}]}
  verdicts (.csv)  instance_id,changed,best_overlap,n_masks_used
  metrics (.csv)   dataset,tp,fp,fn,tn,oa,f1,kc (ratios to 6 decimals)
  overlay (.ppm)   "P6\n<width> <height>\n255\n" + RGB; changed pixels in red.
  config           "key = value" lines naming long flags without "--"; '#' comments.
                   Command-line flags take precedence.
)";
}

namespace detail {

/// Data problem tied to a file; reported with exit status 2.
class DataError : public Error {
 public:
  using Error::Error;
};

template <class Fn>
auto with_file(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const IoError&) {
    throw;
  } catch (const ParameterError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void check_same(const std::string& a, Extent ea, const std::string& b, Extent eb) {
  if (ea != eb) {
    throw DataError("dimension mismatch: " + a + " is " + to_string(ea) + ", " + b + " is " + to_string(eb));
  }
}

inline LabelRaster load_raster(const std::string& p) {
  return with_file(p, [&] { return decode_label_raster(read_file(p)); });
}
inline ChangeMap load_change_map(const std::string& p) {
  return with_file(p, [&] { return decode_change_map(read_file(p)); });
}
inline Legend load_legend(const std::string& p) {
  return with_file(p, [&] { return parse_legend(read_text(p)); });
}
inline InstanceSet load_instances(const std::string& p) {
  return with_file(p, [&] { return parse_instances(read_text(p)); });
}
inline MaskSet load_masks(const std::string& p) {
  return with_file(p, [&] { return parse_mask_set(read_text(p)); });
}
inline PromptedResultSet load_results(const std::string& p) {
  return with_file(p, [&] { return parse_prompted_results(read_text(p)); });
}

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::vector<ConfigEntry> parse_config(const std::string& path) {
  const std::string text = read_text(path);
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(path + ": line " + std::to_string(no) + ": expected key = value");
    }
    out.push_back({trim(t.substr(0, eq)), trim(t.substr(eq + 1)), no});
  }
  return out;
}

inline bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

class Logger {
 public:
  Logger(std::ostream& err, const bool& quiet) : err_(err), quiet_(quiet) {}
  void info(const std::string& msg) const {
    if (!quiet_) err_ << "[segcd] " << msg << "\n";
  }
  void warn(const std::string& msg) const { err_ << "[segcd] warning: " << msg << "\n"; }

 private:
  std::ostream& err_;
  const bool& quiet_;
};

inline std::pair<double, double> parse_band(const std::string& s, const char* what) {
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(s);
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ParameterError(std::string(what) + ": expected lo,hi, got '" + s + "'");
  }
}

}  // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Land-cover change detection between class rasters and segmentation masks", "segcd"};
  app.footer(format_help());
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages on stderr");
  const detail::Logger log(err, quiet);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file supplying defaults for this subcommand's flags");
  };
  std::size_t workers = 1;
  auto add_workers = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Worker threads for per-instance work (0 = all cores)");
  };

  // ccl
  auto* ccl = app.add_subcommand("ccl", "Label connected same-class regions of a class raster");
  std::string raster_path, legend_path, instances_path, map_out;
  int connectivity = 4;
  std::size_t min_area = 16;
  std::vector<unsigned> ignore_codes;
  ccl->add_option("--raster", raster_path, "Class raster (.pgm)")->required();
  ccl->add_option("--legend", legend_path, "Legend; when given, every raster code must appear in it");
  ccl->add_option("--connectivity", connectivity, "4 or 8")->capture_default_str();
  ccl->add_option("--min-area", min_area, "Components below this pixel count are dropped")->capture_default_str();
  ccl->add_option("--ignore-codes", ignore_codes, "Class codes never labeled")->delimiter(',');
  ccl->add_option("--out-instances", instances_path, "Instance dump (.json)")->required();
  ccl->add_option("--out-map", map_out, "Instance ids as a 16-bit graymap");
  add_config(ccl);

  // prompts
  auto* prompts = app.add_subcommand("prompts", "Export box/mask prompts for background instances");
  std::string prompts_out;
  prompts->add_option("--instances", instances_path, "Instance dump (.json)")->required();
  prompts->add_option("--legend", legend_path, "Legend (.txt)")->required();
  prompts->add_option("--out", prompts_out, "Prompt export (.json)")->required();
  add_config(prompts);

  // detect-noprompt
  auto* noprompt = app.add_subcommand("detect-noprompt", "Aggregate masks per instance and threshold the overlap");
  std::string masks_path, change_out, verdicts_out;
  AggregationParams agg;
  std::string area_band = "0.5,2.0", aspect_band = "0.5,2.0";
  noprompt->add_option("--instances", instances_path, "Instance dump (.json)")->required();
  noprompt->add_option("--masks", masks_path, "Mask set (.json)")->required();
  noprompt->add_option("--out", change_out, "Change map (.pgm)")->required();
  noprompt->add_option("--verdicts", verdicts_out, "Per-instance verdicts (.csv)");
  noprompt->add_option("--theta", agg.overlap_threshold, "Overlap (IoU) threshold in (0,1]")->capture_default_str();
  noprompt->add_option("--min-intersection", agg.min_intersection, "Minimum mask/instance overlap in pixels")
      ->capture_default_str();
  noprompt->add_option("--patience", agg.patience, "Stop after this many merges without improvement")
      ->capture_default_str();
  noprompt->add_flag("--shape-check", agg.use_shape_check, "Veto unchanged verdicts whose shape ratios leave the bands");
  noprompt->add_option("--area-band", area_band, "Allowed merged/instance area ratio lo,hi")->capture_default_str();
  noprompt->add_option("--aspect-band", aspect_band, "Allowed merged/instance aspect ratio lo,hi")
      ->capture_default_str();
  add_workers(noprompt);
  add_config(noprompt);

  // detect-prompt
  auto* prompt = app.add_subcommand("detect-prompt", "Extract unrecognized pixels inside prompted background instances");
  std::string results_path;
  std::size_t min_blob_area = 16;
  prompt->add_option("--instances", instances_path, "Instance dump (.json)")->required();
  prompt->add_option("--results", results_path, "Prompted results (.json)")->required();
  prompt->add_option("--legend", legend_path, "Legend (.txt)")->required();
  prompt->add_option("--out", change_out, "Change map (.pgm)")->required();
  prompt->add_option("--min-blob-area", min_blob_area, "Smaller 4-connected blobs are discarded")->capture_default_str();
  add_workers(prompt);
  add_config(prompt);

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "Pixelwise OR of two change maps");
  std::string fuse_a, fuse_b, fuse_out;
  fuse_cmd->add_option("a", fuse_a, "First change map")->required();
  fuse_cmd->add_option("b", fuse_b, "Second change map")->required();
  fuse_cmd->add_option("out", fuse_out, "Output change map")->required();
  add_config(fuse_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Confusion counts, OA, F1 and kappa against a reference");
  std::string pred_path, truth_path, metrics_out, dataset = "scene";
  eval_cmd->add_option("--pred", pred_path, "Predicted change map")->required();
  eval_cmd->add_option("--truth", truth_path, "Reference change map")->required();
  eval_cmd->add_option("--out", metrics_out, "Metrics (.csv)")->required();
  eval_cmd->add_option("--dataset", dataset, "Name written in the first column")->capture_default_str();
  add_config(eval_cmd);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene with known changes");
  SceneParams sp;
  std::string out_dir;
  synth_cmd->add_option("--seed", sp.seed)->capture_default_str();
  synth_cmd->add_option("--width", sp.width)->capture_default_str();
  synth_cmd->add_option("--height", sp.height)->capture_default_str();
  synth_cmd->add_option("--n-objects", sp.n_objects)->capture_default_str();
  synth_cmd->add_option("--shape-change", sp.change_fractions.shape_change, "Fraction of objects that shrink")
      ->capture_default_str();
  synth_cmd->add_option("--removal", sp.change_fractions.removal, "Fraction of objects that vanish")
      ->capture_default_str();
  synth_cmd->add_option("--new-object", sp.change_fractions.new_object, "Fraction of objects absent from the map")
      ->capture_default_str();
  synth_cmd->add_option("--split-k", sp.split_k, "Maximum masks per object")->capture_default_str();
  synth_cmd->add_option("--boundary-noise", sp.boundary_noise, "Maximum dilation/erosion radius")
      ->capture_default_str();
  synth_cmd->add_option("--out-dir", out_dir,
                        "Writes map.pgm legend.txt masks.json prompted.json truth.pgm manifest.json")
      ->required();
  add_config(synth_cmd);

  // render
  auto* render = app.add_subcommand("render", "Canonical 8-bit change map, optionally an RGB overlay");
  std::string render_in, render_out, overlay_base, overlay_out;
  render->add_option("--in", render_in, "Change map (any graymap; nonzero = changed)")->required();
  render->add_option("--out", render_out, "8-bit change map (.pgm)")->required();
  render->add_option("--overlay-base", overlay_base, "Graymap drawn under the changes");
  render->add_option("--overlay-out", overlay_out, "Overlay pixmap (.ppm)");
  add_config(render);

  try {
    // Config values become flags unless the same flag is already present.
    std::string cfg;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
    }
    if (!cfg.empty()) {
      const auto it = std::find_if(args.begin(), args.end(), [](const std::string& a) { return !a.empty() && a[0] != '-'; });
      CLI::App* sub = nullptr;
      const auto all_subs = app.get_subcommands([](CLI::App*) { return true; });
      if (it != args.end()) {
        for (auto* s : all_subs) {
          if (s->get_name() == *it) sub = s;
        }
      }
      if (sub != nullptr) {
        std::vector<std::string> extra;
        for (const auto& e : detail::parse_config(cfg)) {
          const std::string flag = "--" + e.key;
          const bool known_anywhere = std::any_of(all_subs.begin(), all_subs.end(), [&](CLI::App* s) {
            return s->get_option_no_throw(flag) != nullptr;
          });
          if (!known_anywhere) {
            throw ParameterError(cfg + ": line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
          }
          const auto* opt = sub->get_option_no_throw(flag);
          if (opt == nullptr || e.key == "config" || detail::has_flag(args, flag)) continue;
          if (opt->get_expected_min() == 0) {
            if (e.value == "1" || e.value == "true") extra.push_back(flag);
          } else {
            extra.push_back(flag);
            extra.push_back(e.value);
          }
        }
        args.insert(args.end(), extra.begin(), extra.end());
      }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "segcd: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "segcd: " << e.what() << "\n";
    return kExitData;
  } catch (const ParameterError& e) {
    err << "segcd: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*ccl) {
      CclParams params;
      params.connectivity = connectivity_from_int(connectivity);
      params.min_area = min_area;
      for (auto c : ignore_codes) params.ignore_codes.insert(static_cast<ClassCode>(c));
      params.validate();
      const auto raster = detail::load_raster(raster_path);
      if (!legend_path.empty()) {
        const auto legend = detail::load_legend(legend_path);
        detail::with_file(raster_path, [&] { legend.check_covers(raster); });
      }
      const auto result = label_components(raster, params);
      write_text(instances_path, format_instances(raster.extent(), result.instances));
      if (!map_out.empty()) {
        detail::with_file(map_out, [&] { write_file(map_out, encode_instance_map(result.map)); });
      }
      log.info("ccl: " + std::to_string(result.instances.size()) + " instances");
    } else if (*prompts) {
      const auto inst = detail::load_instances(instances_path);
      const auto legend = detail::load_legend(legend_path);
      const auto specs = detail::with_file(legend_path, [&] { return export_prompts(inst.instances, legend); });
      write_text(prompts_out, format_prompts(specs));
      log.info("prompts: " + std::to_string(specs.size()) + " background instances");
    } else if (*noprompt) {
      const auto [alo, ahi] = detail::parse_band(area_band, "--area-band");
      const auto [rlo, rhi] = detail::parse_band(aspect_band, "--aspect-band");
      agg.area_ratio_band = {alo, ahi};
      agg.aspect_ratio_band = {rlo, rhi};
      agg.validate();
      const auto inst = detail::load_instances(instances_path);
      const auto masks = detail::load_masks(masks_path);
      detail::check_same(instances_path, inst.extent, masks_path, masks.extent());
      const auto res = detect_changes_noprompt(inst.instances, masks, agg, workers);
      write_file(change_out, encode_change_map(res.change_map));
      if (!verdicts_out.empty()) write_text(verdicts_out, format_verdicts_csv(res.verdicts));
      const auto n_changed = std::count_if(res.verdicts.begin(), res.verdicts.end(),
                                           [](const InstanceVerdict& v) { return v.changed; });
      log.info("detect-noprompt: " + std::to_string(n_changed) + " of " + std::to_string(res.verdicts.size()) +
               " instances changed");
    } else if (*prompt) {
      const auto inst = detail::load_instances(instances_path);
      const auto results = detail::load_results(results_path);
      const auto legend = detail::load_legend(legend_path);
      detail::check_same(instances_path, inst.extent, results_path, results.extent);
      const auto det = detail::with_file(results_path, [&] {
        return detect_changes_prompt(inst.extent, inst.instances, results.results, legend, min_blob_area, workers);
      });
      for (const auto& w : det.warnings) log.warn(w);
      write_file(change_out, encode_change_map(det.change_map));
      log.info("detect-prompt: " + std::to_string(det.change_map.count()) + " changed pixels");
    } else if (*fuse_cmd) {
      const auto a = detail::load_change_map(fuse_a);
      const auto b = detail::load_change_map(fuse_b);
      detail::check_same(fuse_a, a.extent(), fuse_b, b.extent());
      write_file(fuse_out, encode_change_map(fuse(a, b)));
    } else if (*eval_cmd) {
      const auto pred = detail::load_change_map(pred_path);
      const auto truth = detail::load_change_map(truth_path);
      detail::check_same(pred_path, pred.extent(), truth_path, truth.extent());
      const auto m = evaluate(pred, truth);
      write_text(metrics_out, metrics_csv_header() + "\n" + metrics_csv_line(dataset, m) + "\n");
      log.info("eval: " + metrics_csv_line(dataset, m));
    } else if (*synth_cmd) {
      const auto scene = generate_scene(sp);
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      const fs::path dir(out_dir);
      write_file((dir / "map.pgm").string(), encode_label_raster(scene.map));
      write_text((dir / "legend.txt").string(), format_legend(scene.legend));
      write_text((dir / "masks.json").string(), format_mask_set(scene.masks));
      write_text((dir / "prompted.json").string(), format_prompted_results(scene.map.extent(), scene.prompted));
      write_file((dir / "truth.pgm").string(), encode_change_map(scene.truth));
      write_text((dir / "manifest.json").string(), synth::scene_manifest(scene).dump(2) + "\n");
      log.info("synth: " + std::to_string(scene.objects.size()) + " objects, " +
               std::to_string(scene.masks.size()) + " masks");
    } else if (*render) {
      const auto bytes = read_file(render_in);
      const auto map = detail::with_file(render_in, [&] { return decode_change_map(bytes); });
      write_file(render_out, encode_change_map(map));
      if (!overlay_out.empty()) {
        const std::string base_path = overlay_base.empty() ? render_in : overlay_base;
        const auto base = detail::with_file(base_path, [&] { return decode_graymap(read_file(base_path)); });
        detail::check_same(base_path, {base.width, base.height}, render_in, map.extent());
        write_file(overlay_out, encode_overlay(base, map, kHighlight));
      }
    }
  } catch (const ParameterError& e) {
    err << "segcd: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "segcd: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "segcd: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace segcd::cli
