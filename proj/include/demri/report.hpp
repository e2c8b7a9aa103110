#pragma once

// JSON evaluation report. Schema "demri-eval-report/1":
//
//   {
//     "schema": "demri-eval-report/1",
//     "submission_id": string,
//     "submission": {
//       "cases": int, "failed_cases": int,
//       "metrics": { <ranked key>: {"mean": x, "std": x}, ... },   // nine keys
//       "pmo_accuracy": {"case_percent": x, "slice_percent": x}
//     },
//     "cases": [ {
//       "case_id": string, "error": string | null,
//       "myocardium": {"dice", "vol_truth_cm3", "vol_pred_cm3", "vol_diff_cm3",
//                      "hausdorff_mm", "hausdorff_sentinel"},
//       "infarct" / "pmo": {"dice", "vol_truth_cm3", "vol_pred_cm3", "vol_diff_cm3",
//                           "pct_truth", "pct_pred", "pct_diff"},
//       "pmo_presence": {"case_hit", "slices_correct", "slices_total"},
//       "consistency_violations": int
//     } ... ],
//     "warnings": [string ...]
//   }
//
// Reals carry six significant digits.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demri/errors.hpp"
#include "demri/format.hpp"
#include "demri/metrics.hpp"
#include "demri/ranking.hpp"

namespace demri::report {

inline constexpr const char* kSchema = "demri-eval-report/1";

using Json = nlohmann::ordered_json;

namespace detail {

inline Json overlap_json(const metrics::VolumeOverlap& o) {
  return {{"dice", round6(o.dice)},
          {"vol_truth_cm3", round6(o.vol_truth)},
          {"vol_pred_cm3", round6(o.vol_pred)},
          {"vol_diff_cm3", round6(o.vol_diff)}};
}

inline Json scar_json(const metrics::ScarMetrics& s) {
  Json j = overlap_json(s);
  j["pct_truth"] = round6(s.pct_truth);
  j["pct_pred"] = round6(s.pct_pred);
  j["pct_diff"] = round6(s.pct_diff);
  return j;
}

}  // namespace detail

inline Json case_json(const metrics::CaseMetrics& c) {
  Json j;
  j["case_id"] = c.case_id;
  j["error"] = c.error ? Json(*c.error) : Json(nullptr);
  Json myo = detail::overlap_json(c.myocardium);
  myo["hausdorff_mm"] = round6(c.myocardium.hausdorff_mm);
  myo["hausdorff_sentinel"] = c.myocardium.hausdorff_sentinel;
  j["myocardium"] = std::move(myo);
  j["infarct"] = detail::scar_json(c.infarct);
  j["pmo"] = detail::scar_json(c.pmo);
  j["pmo_presence"] = {{"case_hit", c.pmo_presence.case_hit},
                       {"slices_correct", c.pmo_presence.slices_correct},
                       {"slices_total", c.pmo_presence.slices_total}};
  j["consistency_violations"] = c.consistency_violations;
  return j;
}

inline Json submission_json(const metrics::SubmissionMetrics& s) {
  Json ranked;
  for (std::size_t k = 0; k < metrics::kRankedMetricCount; ++k)
    ranked[metrics::kRankedMetrics[k].key] = {{"mean", round6(s.ranked[k].mean)}, {"std", round6(s.ranked[k].std)}};
  return {{"cases", s.cases},
          {"failed_cases", s.failed_cases},
          {"metrics", std::move(ranked)},
          {"pmo_accuracy",
           {{"case_percent", round6(s.pmo_accuracy.case_percent)},
            {"slice_percent", round6(s.pmo_accuracy.slice_percent)}}}};
}

inline Json build_report(const std::string& submission_id, const metrics::SubmissionMetrics& submission,
                         const std::vector<metrics::CaseMetrics>& cases, const std::vector<std::string>& warnings) {
  Json j;
  j["schema"] = kSchema;
  j["submission_id"] = submission_id;
  j["submission"] = submission_json(submission);
  Json arr = Json::array();
  for (const auto& c : cases) arr.push_back(case_json(c));
  j["cases"] = std::move(arr);
  j["warnings"] = warnings;
  return j;
}

// Pulls the nine ranked means out of a report for leaderboard building.
inline ranking::SubmissionScores read_submission_scores(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string())
    throw SchemaError("report has no schema string");
  const std::string schema = j["schema"].get<std::string>();
  if (schema != kSchema) throw SchemaError("report schema '" + schema + "' is not '" + kSchema + "'");
  ranking::SubmissionScores s;
  try {
    s.submission_id = j.at("submission_id").get<std::string>();
    const auto& m = j.at("submission").at("metrics");
    for (std::size_t k = 0; k < metrics::kRankedMetricCount; ++k)
      s.values[k] = m.at(metrics::kRankedMetrics[k].key).at("mean").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
  return s;
}

}  // namespace demri::report
