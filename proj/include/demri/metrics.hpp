#pragma once

// Segmentation and classification evaluation: Dice, 3D Hausdorff distance,
// volumes, percentage of infarcted myocardium, PMO detection accuracy,
// anatomical consistency, and per-case / per-submission aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "demri/components.hpp"
#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::metrics {

// 2|A n B| / (|A| + |B|). Two empty masks agree perfectly (1.0).
inline double dice(const Mask3D& truth, const Mask3D& pred) {
  require_same_extents(truth.extents(), pred.extents(), "dice");
  std::size_t a = 0, b = 0, both = 0;
  auto t = truth.values();
  auto p = pred.values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool in_t = t[i] != 0, in_p = p[i] != 0;
    a += in_t;
    b += in_p;
    both += in_t && in_p;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

// Mask voxels with at least one face neighbour outside the mask; the grid
// border counts as outside.
inline std::vector<std::size_t> boundary_voxels(const Mask3D& mask) {
  std::vector<std::size_t> out;
  auto v = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i]) continue;
    int inside = 0;
    bool open = false;
    for_each_neighbor(mask.extents(), i, Connectivity::face6, [&](std::size_t j) {
      ++inside;
      if (!v[j]) open = true;
    });
    if (open || inside < 6) out.push_back(i);
  }
  return out;
}

inline double grid_diagonal_mm(const Extents& e, const Spacing& s) {
  const double dx = static_cast<double>(e.nx) * s.x;
  const double dy = static_cast<double>(e.ny) * s.y;
  const double dz = static_cast<double>(e.nz) * s.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact 1D squared distance transform (lower envelope of parabolas) over
// sample positions q * step. Sites are the finite entries of f.
inline void distance_1d(std::span<const double> f, double step, std::span<double> out, std::vector<std::size_t>& v,
                        std::vector<double>& z) {
  const std::size_t n = f.size();
  v.resize(n);
  z.resize(n + 1);
  long k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double pq = static_cast<double>(q) * step;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const double pv = static_cast<double>(v[static_cast<std::size_t>(k)]) * step;
      s = ((f[q] + pq * pq) - (f[v[static_cast<std::size_t>(k)]] + pv * pv)) / (2.0 * (pq - pv));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double pq = static_cast<double>(q) * step;
    while (z[j + 1] < pq) ++j;
    const double d = (static_cast<double>(q) - static_cast<double>(v[j])) * step;
    out[q] = d * d + f[v[j]];
  }
}

// Squared physical distance from every voxel to the nearest site.
inline std::vector<double> squared_distance_map(const Extents& e, const Spacing& s,
                                                std::span<const std::size_t> sites) {
  std::vector<double> d(e.voxels(), kInf);
  for (std::size_t i : sites) d[i] = 0.0;
  std::vector<std::size_t> v;
  std::vector<double> z;
  const std::size_t longest = std::max({e.nx, e.ny, e.nz});
  std::vector<double> line(longest), result(longest);
  const std::array<std::size_t, 3> n = {e.nx, e.ny, e.nz};
  const std::array<std::size_t, 3> stride = {1, e.nx, e.nx * e.ny};
  const std::array<double, 3> step = {s.x, s.y, s.z};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t len = n[static_cast<std::size_t>(axis)];
    const std::size_t st = stride[static_cast<std::size_t>(axis)];
    for (std::size_t start = 0; start < d.size(); ++start) {
      // A line starts at voxels whose coordinate along `axis` is zero.
      if ((start / st) % len != 0) continue;
      for (std::size_t q = 0; q < len; ++q) line[q] = d[start + q * st];
      distance_1d(std::span<const double>(line.data(), len), step[static_cast<std::size_t>(axis)],
                  std::span<double>(result.data(), len), v, z);
      for (std::size_t q = 0; q < len; ++q) d[start + q * st] = result[q];
    }
  }
  return d;
}

inline double directed_hausdorff(std::span<const std::size_t> from, const std::vector<double>& to_map) {
  double worst = 0.0;
  for (std::size_t i : from) worst = std::max(worst, to_map[i]);
  return std::sqrt(worst);
}

}  // namespace detail

struct HausdorffResult {
  double mm = 0.0;
  bool sentinel = false;  // one mask empty: mm is the grid's physical diagonal
};

// Symmetric Hausdorff distance between the boundary-voxel centres of both
// masks, in physical coordinates (x sx, y sy, z sz).
inline HausdorffResult hausdorff3d(const Mask3D& truth, const Mask3D& pred, const Spacing& spacing) {
  require_same_extents(truth.extents(), pred.extents(), "hausdorff3d");
  require_valid(spacing);
  const auto bt = boundary_voxels(truth);
  const auto bp = boundary_voxels(pred);
  if (bt.empty() && bp.empty()) return {0.0, false};
  if (bt.empty() || bp.empty()) {
    warn("hausdorff3d: empty mask; returning the grid diagonal");
    return {grid_diagonal_mm(truth.extents(), spacing), true};
  }
  const auto to_pred = detail::squared_distance_map(truth.extents(), spacing, bp);
  const auto to_truth = detail::squared_distance_map(truth.extents(), spacing, bt);
  return {std::max(detail::directed_hausdorff(bt, to_pred), detail::directed_hausdorff(bp, to_truth)), false};
}

inline double volume_cm3(const Mask3D& mask, const Spacing& spacing) {
  return static_cast<double>(count_set(mask)) * voxel_volume_cm3(spacing);
}

// 100 |infarct + PMO| / |myocardium total|; 0 (with a warning) when there is
// no myocardium.
inline double pim_percent(const LabelMap& m) {
  const std::size_t wall = count_voxels(m, selectors::kMyocardiumTotal);
  if (wall == 0) {
    warn("pim_percent: no myocardium; PIM set to 0");
    return 0.0;
  }
  return 100.0 * static_cast<double>(count_voxels(m, selectors::kInfarctPlusPmo)) / static_cast<double>(wall);
}

struct PresenceAccuracy {
  double case_percent = 0.0;
  double slice_percent = 0.0;
};

struct PresenceHits {
  bool case_hit = false;
  std::size_t slices_correct = 0;
  std::size_t slices_total = 0;
};

inline PresenceHits pmo_presence_hits(const LabelMap& truth, const LabelMap& pred) {
  require_same_extents(truth.extents(), pred.extents(), "pmo_presence");
  const auto t = tissue_presence(truth, selectors::kPmo);
  const auto p = tissue_presence(pred, selectors::kPmo);
  PresenceHits h{t.case_present == p.case_present, 0, t.per_slice.size()};
  for (std::size_t z = 0; z < t.per_slice.size(); ++z) h.slices_correct += t.per_slice[z] == p.per_slice[z];
  return h;
}

inline PresenceAccuracy presence_accuracy(std::span<const PresenceHits> hits) {
  if (hits.empty()) throw ArgumentError("pmo_presence_accuracy: no cases");
  std::size_t cases = 0, correct = 0, total = 0;
  for (const auto& h : hits) {
    cases += h.case_hit;
    correct += h.slices_correct;
    total += h.slices_total;
  }
  return {100.0 * static_cast<double>(cases) / static_cast<double>(hits.size()),
          total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 100.0};
}

inline PresenceAccuracy pmo_presence_accuracy(std::span<const std::pair<LabelMap, LabelMap>> cases) {
  std::vector<PresenceHits> hits;
  hits.reserve(cases.size());
  for (const auto& [truth, pred] : cases) hits.push_back(pmo_presence_hits(truth, pred));
  return presence_accuracy(hits);
}

// Violations of the anatomical nesting: PMO components without a
// face-adjacent infarct voxel, plus infarct components without a
// face-adjacent normal-myocardium or cavity voxel. Components use
// 26-connectivity.
inline std::size_t consistency_violations(const LabelMap& m) {
  std::size_t violations = 0;
  const TissueSelector infarct{Tissue::infarct};
  const auto pmo = label_components(m, selectors::kPmo, Connectivity::full26);
  for (const auto& comp : pmo.members)
    if (!component_touches(m, comp, infarct)) ++violations;
  const auto inf = label_components(m, infarct, Connectivity::full26);
  const TissueSelector host{Tissue::myocardium, Tissue::cavity};
  for (const auto& comp : inf.members)
    if (!component_touches(m, comp, host)) ++violations;
  return violations;
}

// Percentages; empty optionals mark undefined ratios (zero denominators).
struct ClassificationScores {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  double accuracy = 0.0;
};

inline ClassificationScores scores_from_confusion(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp) {
  if (tp + fn + tn + fp == 0) throw ArgumentError("classification_metrics: no samples");
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  ClassificationScores s{tp, fn, tn, fp, ratio(tp, tp + fn), ratio(tn, tn + fp), ratio(tp, tp + fp), 0.0};
  s.accuracy = *ratio(tp + tn, tp + fn + tn + fp);
  return s;
}

// Positive class = pathological.
inline ClassificationScores classification_metrics(std::span<const bool> truths, std::span<const bool> preds) {
  if (truths.size() != preds.size()) throw ArgumentError("classification_metrics: length mismatch");
  if (truths.empty()) throw ArgumentError("classification_metrics: no samples");
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i]) {
      (preds[i] ? tp : fn) += 1;
    } else {
      (preds[i] ? fp : tn) += 1;
    }
  }
  return scores_from_confusion(tp, fn, tn, fp);
}

// ---------------------------------------------------------------------------
// Per-case evaluation

struct VolumeOverlap {
  double dice = 0.0;
  double vol_truth = 0.0;  // cm3
  double vol_pred = 0.0;
  double vol_diff = 0.0;  // |truth - pred|
};

struct MyocardiumMetrics : VolumeOverlap {
  double hausdorff_mm = 0.0;
  bool hausdorff_sentinel = false;
};

struct ScarMetrics : VolumeOverlap {
  double pct_truth = 0.0;  // percentage points of the myocardial wall
  double pct_pred = 0.0;
  double pct_diff = 0.0;
};

struct CaseMetrics {
  std::string case_id;
  MyocardiumMetrics myocardium;
  ScarMetrics infarct;  // infarct including PMO
  ScarMetrics pmo;
  PresenceHits pmo_presence;
  std::size_t consistency_violations = 0;  // of the prediction
  std::optional<std::string> error;        // set when the case was scored worst-possible
};

namespace detail {

inline VolumeOverlap overlap(const LabelMap& truth, const LabelMap& pred, TissueSelector sel, const Spacing& s) {
  const Mask3D t = region_mask(truth, sel);
  const Mask3D p = region_mask(pred, sel);
  VolumeOverlap o;
  o.dice = dice(t, p);
  o.vol_truth = volume_cm3(t, s);
  o.vol_pred = volume_cm3(p, s);
  o.vol_diff = std::abs(o.vol_truth - o.vol_pred);
  return o;
}

inline double pim_of(const LabelMap& m, TissueSelector scar) {
  const std::size_t wall = count_voxels(m, selectors::kMyocardiumTotal);
  if (wall == 0) return 0.0;
  return 100.0 * static_cast<double>(count_voxels(m, scar)) / static_cast<double>(wall);
}

inline ScarMetrics scar(const LabelMap& truth, const LabelMap& pred, TissueSelector sel, const Spacing& s) {
  ScarMetrics out;
  static_cast<VolumeOverlap&>(out) = overlap(truth, pred, sel, s);
  out.pct_truth = pim_of(truth, sel);
  out.pct_pred = pim_of(pred, sel);
  out.pct_diff = std::abs(out.pct_truth - out.pct_pred);
  return out;
}

}  // namespace detail

// Volumes use the truth spacing; predictions must share the truth extents.
inline CaseMetrics evaluate_case(const LabelMap& truth, const LabelMap& pred, std::string case_id = {}) {
  require_same_extents(truth.extents(), pred.extents(), "evaluate_case");
  const Spacing& s = truth.spacing();
  CaseMetrics c;
  c.case_id = std::move(case_id);
  static_cast<VolumeOverlap&>(c.myocardium) = detail::overlap(truth, pred, selectors::kMyocardiumTotal, s);
  const auto hd = hausdorff3d(region_mask(truth, selectors::kMyocardiumTotal),
                              region_mask(pred, selectors::kMyocardiumTotal), s);
  c.myocardium.hausdorff_mm = hd.mm;
  c.myocardium.hausdorff_sentinel = hd.sentinel;
  c.infarct = detail::scar(truth, pred, selectors::kInfarctPlusPmo, s);
  c.pmo = detail::scar(truth, pred, selectors::kPmo, s);
  c.pmo_presence = pmo_presence_hits(truth, pred);
  c.consistency_violations = consistency_violations(pred);
  return c;
}

// Worst-possible score for a case whose prediction is missing or unusable:
// Dice 0, Hausdorff = grid diagonal, predicted volumes and percentages 0,
// PMO detection counted wrong on the case and every slice.
inline CaseMetrics worst_case_metrics(const LabelMap& truth, std::string case_id, std::string reason) {
  const Spacing& s = truth.spacing();
  const double voxel = voxel_volume_cm3(s);
  CaseMetrics c;
  c.case_id = std::move(case_id);
  c.error = std::move(reason);
  auto fill = [&](VolumeOverlap& o, TissueSelector sel) {
    o.dice = 0.0;
    o.vol_truth = static_cast<double>(count_voxels(truth, sel)) * voxel;
    o.vol_pred = 0.0;
    o.vol_diff = o.vol_truth;
  };
  fill(c.myocardium, selectors::kMyocardiumTotal);
  c.myocardium.hausdorff_mm = grid_diagonal_mm(truth.extents(), s);
  c.myocardium.hausdorff_sentinel = true;
  fill(c.infarct, selectors::kInfarctPlusPmo);
  fill(c.pmo, selectors::kPmo);
  c.infarct.pct_truth = c.infarct.pct_diff = detail::pim_of(truth, selectors::kInfarctPlusPmo);
  c.pmo.pct_truth = c.pmo.pct_diff = detail::pim_of(truth, selectors::kPmo);
  c.pmo_presence = {false, 0, truth.nz()};
  return c;
}

// ---------------------------------------------------------------------------
// Submission aggregation

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

enum class Direction { higher_better, lower_better };

struct RankedMetricInfo {
  const char* key;
  Direction direction;
};

inline constexpr std::size_t kRankedMetricCount = 9;

// Leaderboard column order: myocardium, infarction, PMO.
inline constexpr std::array<RankedMetricInfo, kRankedMetricCount> kRankedMetrics = {{
    {"myocardium_dice", Direction::higher_better},
    {"myocardium_vol_diff_cm3", Direction::lower_better},
    {"myocardium_hausdorff_mm", Direction::lower_better},
    {"infarct_dice", Direction::higher_better},
    {"infarct_vol_diff_cm3", Direction::lower_better},
    {"infarct_pct_diff", Direction::lower_better},
    {"pmo_dice", Direction::higher_better},
    {"pmo_vol_diff_cm3", Direction::lower_better},
    {"pmo_pct_diff", Direction::lower_better},
}};

inline std::array<double, kRankedMetricCount> ranked_values(const CaseMetrics& c) {
  return {c.myocardium.dice, c.myocardium.vol_diff, c.myocardium.hausdorff_mm,
          c.infarct.dice,    c.infarct.vol_diff,    c.infarct.pct_diff,
          c.pmo.dice,        c.pmo.vol_diff,        c.pmo.pct_diff};
}

struct SubmissionMetrics {
  std::size_t cases = 0;
  std::size_t failed_cases = 0;
  std::array<MeanStd, kRankedMetricCount> ranked{};  // kRankedMetrics order
  PresenceAccuracy pmo_accuracy;                     // auxiliary, not ranked

  const MeanStd& get(std::size_t metric) const { return ranked.at(metric); }
  std::array<double, kRankedMetricCount> means() const {
    std::array<double, kRankedMetricCount> out{};
    for (std::size_t k = 0; k < kRankedMetricCount; ++k) out[k] = ranked[k].mean;
    return out;
  }
};

inline MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

inline SubmissionMetrics evaluate_submission(std::span<const CaseMetrics> cases) {
  if (cases.empty()) throw ArgumentError("evaluate_submission: no cases");
  SubmissionMetrics out;
  out.cases = cases.size();
  std::array<std::vector<double>, kRankedMetricCount> columns;
  std::vector<PresenceHits> hits;
  for (const auto& c : cases) {
    const auto values = ranked_values(c);
    for (std::size_t k = 0; k < kRankedMetricCount; ++k) columns[k].push_back(values[k]);
    hits.push_back(c.pmo_presence);
    out.failed_cases += c.error.has_value();
  }
  for (std::size_t k = 0; k < kRankedMetricCount; ++k) out.ranked[k] = mean_std(columns[k]);
  out.pmo_accuracy = presence_accuracy(hits);
  return out;
}

inline SubmissionMetrics evaluate_submission(std::span<const std::pair<LabelMap, LabelMap>> pairs) {
  std::vector<CaseMetrics> cases;
  cases.reserve(pairs.size());
  for (const auto& [truth, pred] : pairs) cases.push_back(evaluate_case(truth, pred));
  return evaluate_submission(cases);
}

}  // namespace demri::metrics
