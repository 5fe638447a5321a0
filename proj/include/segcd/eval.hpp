#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>

#include "segcd/error.hpp"
#include "segcd/raster.hpp"

namespace segcd {

/// Confusion counts with changed as the positive class, plus OA, F1 and Cohen's kappa.
struct MetricsRecord {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  double oa = 0.0;
  double f1 = 0.0;
  double kc = 0.0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
};

/// F1 is 0 when 2tp+fp+fn == 0; kappa is 0 when chance agreement is 1.
inline MetricsRecord metrics_from_confusion(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                            std::uint64_t tn) {
  MetricsRecord m{tp, fp, fn, tn, 0.0, 0.0, 0.0};
  const std::uint64_t total = m.total();
  if (total == 0) throw DimensionError("cannot evaluate an empty confusion matrix");
  const double n = static_cast<double>(total);
  m.oa = static_cast<double>(tp + tn) / n;

  const std::uint64_t f1_den = 2 * tp + fp + fn;
  m.f1 = f1_den == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(f1_den);

  // Chance agreement numerator in exact integers so the p_e == 1 guard is exact.
  using u128 = unsigned __int128;
  const u128 chance = static_cast<u128>(tp + fn) * (tp + fp) + static_cast<u128>(fp + tn) * (fn + tn);
  const u128 total2 = static_cast<u128>(total) * total;
  if (chance == total2) {
    m.kc = 0.0;
  } else {
    const double pe = static_cast<double>(chance) / (n * n);
    m.kc = (m.oa - pe) / (1.0 - pe);
  }
  return m;
}

inline ChangeMap fuse(const ChangeMap& a, const ChangeMap& b) {
  require_same_extent(a.extent(), b.extent(), "fuse");
  Bits out(a.bits().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a.bits()[i] | b.bits()[i]) ? 1 : 0;
  return ChangeMap(a.width(), a.height(), std::move(out));
}

inline MetricsRecord evaluate(const ChangeMap& pred, const ChangeMap& truth) {
  require_same_extent(pred.extent(), truth.extent(), "evaluate");
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  const auto& p = pred.bits();
  const auto& t = truth.bits();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]) {
      if (t[i]) {
        ++tp;
      } else {
        ++fp;
      }
    } else if (t[i]) {
      ++fn;
    } else {
      ++tn;
    }
  }
  return metrics_from_confusion(tp, fp, fn, tn);
}

inline std::string metrics_csv_header() { return "dataset,tp,fp,fn,tn,oa,f1,kc"; }

/// `dataset,tp,fp,fn,tn,oa,f1,kc` with ratios at 6 decimals.
inline std::string metrics_csv_line(const std::string& dataset, const MetricsRecord& m) {
  char ratios[96];
  std::snprintf(ratios, sizeof ratios, "%.6f,%.6f,%.6f", m.oa, m.f1, m.kc);
  return dataset + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," +
         std::to_string(m.fn) + "," + std::to_string(m.tn) + "," + ratios;
}

}  // namespace segcd
