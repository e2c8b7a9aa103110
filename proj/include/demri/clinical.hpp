#pragma once

// Clinical records: CSV ingestion, validation, imputation and feature
// encoding.
//
// CSV schema (header names, any column order, comma separated):
//
//   case_id       string, unique
//   sex           M | F
//   age           years, [0, 120]
//   tobacco       yes | no | former
//   overweight    0 | 1   (BMI > 25)
//   hypertension  0 | 1
//   diabetes      0 | 1
//   history_cad   0 | 1   (previous acute cardiac event)
//   st_elevation  0 | 1   (STEMI on ECG)
//   troponin      ng/mL, >= 0
//   killip        1 | 2 | 3 | 4 (maximum Killip class)
//   lvef          %, [0, 100]
//   ntprobnp      pg/mL, >= 0
//   label         0 | 1   (1 = pathological); optional column
//
// Empty cells are missing values, imputed at encoding time.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::clinical {

enum class Sex { female, male };
enum class Tobacco { yes, no, former };

struct ClinicalRecord {
  std::string case_id;
  std::optional<Sex> sex;
  std::optional<double> age;
  std::optional<Tobacco> tobacco;
  std::optional<bool> overweight;
  std::optional<bool> hypertension;
  std::optional<bool> diabetes;
  std::optional<bool> history_cad;
  std::optional<bool> st_elevation;
  std::optional<double> troponin;
  std::optional<int> killip;
  std::optional<double> lvef;
  std::optional<double> ntprobnp;
  std::optional<bool> pathological;  // ground truth, when known
};

inline constexpr std::array<const char*, 13> kRequiredColumns = {
    "case_id",     "sex",          "age",      "tobacco", "overweight", "hypertension", "diabetes",
    "history_cad", "st_elevation", "troponin", "killip",  "lvef",       "ntprobnp"};
inline constexpr const char* kLabelColumn = "label";

struct TableIssue {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string column;
  std::string message;
};

struct ClinicalTable {
  std::vector<ClinicalRecord> records;  // rows without issues
  std::vector<TableIssue> issues;       // rows with issues are listed here, not in records

  void throw_if_issues() const {
    if (!issues.empty()) throw CellError(issues.front().row, issues.front().column, issues.front().message);
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

inline std::optional<double> parse_real(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

class RowParser {
 public:
  RowParser(const std::vector<std::string>& cells, const std::map<std::string, std::size_t>& columns,
            std::size_t row, std::vector<TableIssue>& issues)
      : cells_(cells), columns_(columns), row_(row), issues_(issues) {}

  // nullopt for an empty cell; records an issue and returns nullopt when the
  // cell cannot be read.
  const std::string* cell(const char* name) const {
    const auto it = columns_.find(name);
    if (it == columns_.end() || it->second >= cells_.size()) return nullptr;
    const std::string& c = cells_[it->second];
    return c.empty() ? nullptr : &c;
  }

  void fail(const char* column, std::string message) { issues_.push_back({row_, column, std::move(message)}); }

  std::optional<double> real(const char* name, double lo, double hi) {
    const std::string* c = cell(name);
    if (!c) return std::nullopt;
    const auto v = parse_real(*c);
    if (!v) {
      fail(name, "cannot parse '" + *c + "' as a number");
      return std::nullopt;
    }
    if (*v < lo || *v > hi) {
      fail(name, "value " + *c + " out of range");
      return std::nullopt;
    }
    return v;
  }

  std::optional<bool> flag(const char* name) {
    const std::string* c = cell(name);
    if (!c) return std::nullopt;
    if (*c == "0") return false;
    if (*c == "1") return true;
    fail(name, "expected 0 or 1, got '" + *c + "'");
    return std::nullopt;
  }

 private:
  const std::vector<std::string>& cells_;
  const std::map<std::string, std::size_t>& columns_;
  std::size_t row_;
  std::vector<TableIssue>& issues_;
};

}  // namespace detail

inline ClinicalTable parse_clinical_csv(std::istream& in) {
  std::string line;
  std::string header_line;
  while (std::getline(in, header_line)) {
    if (!detail::trim(header_line).empty()) break;
  }
  if (detail::trim(header_line).empty()) throw SchemaError("clinical table is empty");
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) header_line.erase(0, 3);

  const auto header = detail::split_csv_line(header_line);
  std::map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < header.size(); ++i) columns.emplace(header[i], i);
  for (const char* name : kRequiredColumns)
    if (!columns.count(name)) throw SchemaError(std::string("clinical table is missing column '") + name + "'");

  ClinicalTable table;
  std::map<std::string, std::size_t> seen_ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    const std::size_t issues_before = table.issues.size();
    detail::RowParser p(cells, columns, row, table.issues);
    if (cells.size() != header.size())
      p.fail("", "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));

    ClinicalRecord r;
    if (const std::string* id = p.cell("case_id")) {
      r.case_id = *id;
      if (auto [it, fresh] = seen_ids.emplace(*id, row); !fresh)
        p.fail("case_id", "duplicate case id '" + *id + "' (first on row " + std::to_string(it->second) + ")");
    } else {
      p.fail("case_id", "case id is required");
    }
    if (const std::string* c = p.cell("sex")) {
      if (*c == "M" || *c == "m") {
        r.sex = Sex::male;
      } else if (*c == "F" || *c == "f") {
        r.sex = Sex::female;
      } else {
        p.fail("sex", "expected M or F, got '" + *c + "'");
      }
    }
    r.age = p.real("age", 0.0, 120.0);
    if (const std::string* c = p.cell("tobacco")) {
      if (*c == "yes") {
        r.tobacco = Tobacco::yes;
      } else if (*c == "no") {
        r.tobacco = Tobacco::no;
      } else if (*c == "former") {
        r.tobacco = Tobacco::former;
      } else {
        p.fail("tobacco", "expected yes, no or former, got '" + *c + "'");
      }
    }
    r.overweight = p.flag("overweight");
    r.hypertension = p.flag("hypertension");
    r.diabetes = p.flag("diabetes");
    r.history_cad = p.flag("history_cad");
    r.st_elevation = p.flag("st_elevation");
    r.troponin = p.real("troponin", 0.0, 1e9);
    if (const std::string* c = p.cell("killip")) {
      const auto v = detail::parse_real(*c);
      if (!v || *v != std::floor(*v)) {
        p.fail("killip", "expected an integer class, got '" + *c + "'");
      } else if (*v < 1 || *v > 4) {
        p.fail("killip", "Killip class " + *c + " out of range 1..4");
      } else {
        r.killip = static_cast<int>(*v);
      }
    }
    r.lvef = p.real("lvef", 0.0, 100.0);
    r.ntprobnp = p.real("ntprobnp", 0.0, 1e9);
    if (columns.count(kLabelColumn)) r.pathological = p.flag(kLabelColumn);

    if (table.issues.size() == issues_before) table.records.push_back(std::move(r));
  }
  return table;
}

inline ClinicalTable parse_clinical_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open clinical table " + path.string());
  return parse_clinical_csv(in);
}

// ---------------------------------------------------------------------------
// Feature encoding

// Encoded layout; the first kClinicalFeatureCount entries are fixed,
// appended image features follow.
inline constexpr std::array<const char*, 14> kClinicalFeatureNames = {
    "sex_male",   "age",       "tobacco_yes", "tobacco_no",   "tobacco_former", "overweight", "hypertension",
    "diabetes",   "history_cad", "st_elevation", "troponin",  "killip",         "lvef",       "ntprobnp"};
inline constexpr std::size_t kClinicalFeatureCount = kClinicalFeatureNames.size();

// Training-set statistics reused to encode test data.
struct FeatureStats {
  struct Numeric {
    std::string name;
    double mean = 0.0;
    double std = 0.0;
    double median = 0.0;
  };
  std::vector<Numeric> numeric;  // age, troponin, killip, lvef, ntprobnp, then extras
  // Modes used to impute categorical / boolean gaps.
  Sex sex_mode = Sex::male;
  Tobacco tobacco_mode = Tobacco::no;
  std::array<bool, 5> flag_modes{};  // overweight, hypertension, diabetes, history_cad, st_elevation

  std::size_t extra_count() const noexcept { return numeric.size() >= 5 ? numeric.size() - 5 : 0; }
  std::size_t dimension() const noexcept { return kClinicalFeatureCount + extra_count(); }
};

struct EncodedFeatures {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<std::string>> imputed;  // per record, names of imputed fields
  FeatureStats stats;
};

namespace detail {

inline std::array<std::optional<double>, 5> numeric_fields(const ClinicalRecord& r) {
  return {r.age, r.troponin, r.killip ? std::optional<double>(*r.killip) : std::nullopt, r.lvef, r.ntprobnp};
}

inline std::array<std::optional<bool>, 5> flag_fields(const ClinicalRecord& r) {
  return {r.overweight, r.hypertension, r.diabetes, r.history_cad, r.st_elevation};
}

inline constexpr std::array<const char*, 5> kNumericNames = {"age", "troponin", "killip", "lvef", "ntprobnp"};
inline constexpr std::array<const char*, 5> kFlagNames = {"overweight", "hypertension", "diabetes", "history_cad",
                                                          "st_elevation"};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Learns means, population standard deviations, medians and modes from the
// training records. `extras[i]` holds record i's appended image features.
inline FeatureStats fit_feature_stats(std::span<const ClinicalRecord> records,
                                      std::span<const std::vector<double>> extras = {},
                                      std::span<const std::string> extra_names = {}) {
  if (records.empty()) throw ArgumentError("encode_features: no records");
  if (!extras.empty() && extras.size() != records.size())
    throw ArgumentError("encode_features: one extra-feature row per record required");
  const std::size_t n_extra = extras.empty() ? 0 : extras.front().size();

  std::vector<std::vector<double>> columns(5 + n_extra);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto nums = detail::numeric_fields(records[i]);
    for (std::size_t k = 0; k < 5; ++k)
      if (nums[k]) columns[k].push_back(*nums[k]);
    if (n_extra) {
      if (extras[i].size() != n_extra) throw ArgumentError("encode_features: ragged extra features");
      for (std::size_t k = 0; k < n_extra; ++k) columns[5 + k].push_back(extras[i][k]);
    }
  }

  FeatureStats stats;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    FeatureStats::Numeric s;
    s.name = k < 5 ? detail::kNumericNames[k]
                   : (k - 5 < extra_names.size() ? extra_names[k - 5] : "extra_" + std::to_string(k - 5));
    const auto& c = columns[k];
    if (!c.empty()) {
      double sum = 0.0;
      for (double v : c) sum += v;
      s.mean = sum / static_cast<double>(c.size());
      double ss = 0.0;
      for (double v : c) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / static_cast<double>(c.size()));
      s.median = detail::median_of(c);
    }
    stats.numeric.push_back(std::move(s));
  }

  std::array<std::size_t, 2> sex{};
  std::array<std::size_t, 3> tobacco{};
  std::array<std::array<std::size_t, 2>, 5> flags{};
  for (const auto& r : records) {
    if (r.sex) ++sex[static_cast<std::size_t>(*r.sex)];
    if (r.tobacco) ++tobacco[static_cast<std::size_t>(*r.tobacco)];
    const auto f = detail::flag_fields(r);
    for (std::size_t k = 0; k < 5; ++k)
      if (f[k]) ++flags[k][*f[k] ? 1 : 0];
  }
  // Ties resolve to the first category in declaration order.
  stats.sex_mode = sex[1] > sex[0] ? Sex::male : Sex::female;
  stats.tobacco_mode = static_cast<Tobacco>(std::max_element(tobacco.begin(), tobacco.end()) - tobacco.begin());
  for (std::size_t k = 0; k < 5; ++k) stats.flag_modes[k] = flags[k][1] > flags[k][0];
  return stats;
}

// Encodes records with the given statistics (fitted on the records when
// none are supplied). Numerics are z-scored; a zero-variance column encodes
// as 0 with a warning.
inline EncodedFeatures encode_features(std::span<const ClinicalRecord> records,
                                       const std::optional<FeatureStats>& stats = std::nullopt,
                                       std::span<const std::vector<double>> extras = {},
                                       std::span<const std::string> extra_names = {}) {
  if (records.empty()) throw ArgumentError("encode_features: no records");
  EncodedFeatures out;
  out.stats = stats ? *stats : fit_feature_stats(records, extras, extra_names);
  const FeatureStats& st = out.stats;
  const std::size_t n_extra = st.extra_count();
  if (n_extra && extras.size() != records.size())
    throw ArgumentError("encode_features: model expects " + std::to_string(n_extra) + " extra features per record");

  for (std::size_t k = 0; k < st.numeric.size(); ++k)
    if (!(st.numeric[k].std > 0.0)) warn("encode_features: feature '" + st.numeric[k].name + "' has zero variance; encoded as 0");

  auto z = [&](std::size_t k, double v) {
    const auto& s = st.numeric[k];
    return s.std > 0.0 ? (v - s.mean) / s.std : 0.0;
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::vector<std::string> imputed;
    std::vector<double> row;
    row.reserve(st.dimension());

    Sex sex = st.sex_mode;
    if (r.sex) sex = *r.sex; else imputed.emplace_back("sex");
    row.push_back(sex == Sex::male ? 1.0 : 0.0);

    const auto nums = detail::numeric_fields(r);
    auto numeric = [&](std::size_t k) {
      if (nums[k]) return z(k, *nums[k]);
      imputed.emplace_back(detail::kNumericNames[k]);
      return z(k, st.numeric[k].median);
    };
    row.push_back(numeric(0));

    Tobacco tob = st.tobacco_mode;
    if (r.tobacco) tob = *r.tobacco; else imputed.emplace_back("tobacco");
    row.push_back(tob == Tobacco::yes ? 1.0 : 0.0);
    row.push_back(tob == Tobacco::no ? 1.0 : 0.0);
    row.push_back(tob == Tobacco::former ? 1.0 : 0.0);

    const auto flags = detail::flag_fields(r);
    for (std::size_t k = 0; k < 5; ++k) {
      bool v = st.flag_modes[k];
      if (flags[k]) v = *flags[k]; else imputed.emplace_back(detail::kFlagNames[k]);
      row.push_back(v ? 1.0 : 0.0);
    }
    for (std::size_t k = 1; k < 5; ++k) row.push_back(numeric(k));

    for (std::size_t k = 0; k < n_extra; ++k) {
      if (extras[i].size() != n_extra) throw ArgumentError("encode_features: extra feature count mismatch");
      row.push_back(z(5 + k, extras[i][k]));
    }
    out.rows.push_back(std::move(row));
    out.imputed.push_back(std::move(imputed));
  }
  return out;
}

inline std::vector<std::string> feature_names(const FeatureStats& stats) {
  std::vector<std::string> names(kClinicalFeatureNames.begin(), kClinicalFeatureNames.end());
  for (std::size_t k = 5; k < stats.numeric.size(); ++k) names.push_back(stats.numeric[k].name);
  return names;
}

}  // namespace demri::clinical
