// demri command-line tool: segmentation and classification evaluation,
// leaderboard ranking, classical scar segmentation and clinical classifiers.
//
// Exit codes: 0 success, 2 completed with case-level errors, 1 fatal.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "demri/demri.hpp"

namespace fs = std::filesystem;
using namespace demri;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

// Warnings raised on a worker thread go to that thread's case buffer so the
// report lists them in case order regardless of scheduling.
thread_local std::vector<std::string>* tls_warnings = nullptr;

void install_warning_router() {
  set_warning_handler([](const std::string& msg) {
    if (tls_warnings) {
      tls_warnings->push_back(msg);
    } else {
      std::cerr << "warning: " << msg << '\n';
    }
  });
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Spacing parse_spacing(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ArgumentError("--spacing-override: cannot parse '" + part + "'");
    }
  }
  if (v.size() != 3) throw ArgumentError("--spacing-override expects sx,sy,sz");
  Spacing s{v[0], v[1], v[2]};
  require_valid(s);
  return s;
}

// ---------------------------------------------------------------------------
// eval-seg

struct EvalSegArgs {
  std::string truth, pred, out, spacing_override, id;
  unsigned jobs = 0;
};

struct CaseOutcome {
  metrics::CaseMetrics metrics;
  std::vector<std::string> warnings;
  std::optional<std::string> fatal;  // truth unreadable
};

CaseOutcome evaluate_one(const nifti::CasePair& pair, const std::optional<Spacing>& spacing) {
  CaseOutcome out;
  tls_warnings = &out.warnings;
  LabelMap truth;
  try {
    truth = nifti::read_labelmap(pair.truth_path);
    if (spacing) truth.set_spacing(*spacing);
  } catch (const Error& e) {
    out.fatal = "case " + pair.case_id + ": cannot read ground truth: " + e.what();
    tls_warnings = nullptr;
    return out;
  }
  auto worst = [&](const std::string& reason) {
    warn("case " + pair.case_id + ": " + reason + "; scored worst-possible");
    out.metrics = metrics::worst_case_metrics(truth, pair.case_id, reason);
  };
  if (pair.missing_prediction()) {
    worst("prediction missing");
  } else {
    try {
      LabelMap pred = nifti::read_labelmap(*pair.prediction_path);
      pred.set_spacing(truth.spacing());
      if (pred.extents() != truth.extents()) {
        worst("prediction extents " + to_string(pred.extents()) + " differ from truth " +
              to_string(truth.extents()));
      } else {
        out.metrics = metrics::evaluate_case(truth, pred, pair.case_id);
        if (out.metrics.consistency_violations)
          warn("case " + pair.case_id + ": " + std::to_string(out.metrics.consistency_violations) +
               " consistency violation(s) in prediction");
      }
    } catch (const Error& e) {
      worst(std::string("prediction unreadable (") + e.what() + ")");
    }
  }
  tls_warnings = nullptr;
  return out;
}

int run_eval_seg(const EvalSegArgs& a) {
  std::optional<Spacing> spacing;
  if (!a.spacing_override.empty()) spacing = parse_spacing(a.spacing_override);
  const auto pairs = nifti::discover_cases(a.truth, a.pred);

  unsigned jobs = a.jobs;
  if (jobs == 0) {
    jobs = 1;
    if (const char* env = std::getenv("DEMRI_EVAL_JOBS")) jobs = std::max(1, std::atoi(env));
  }
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(pairs.size()));

  std::vector<CaseOutcome> outcomes(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) outcomes[i] = evaluate_one(pairs[i], spacing);
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<metrics::CaseMetrics> cases;
  std::vector<std::string> warnings;
  for (auto& o : outcomes) {
    if (o.fatal) throw IoError(*o.fatal);
    cases.push_back(std::move(o.metrics));
    for (auto& w : o.warnings) {
      std::cerr << "warning: " << w << '\n';
      warnings.push_back(std::move(w));
    }
  }
  const auto submission = metrics::evaluate_submission(cases);
  const std::string id = a.id.empty() ? fs::path(a.pred).lexically_normal().filename().string() : a.id;
  const auto report = report::build_report(id.empty() ? "submission" : id, submission, cases, warnings);
  write_text(a.out, report.dump(2) + "\n");

  for (std::size_t k = 0; k < metrics::kRankedMetricCount; ++k)
    std::cout << metrics::kRankedMetrics[k].key << ' ' << format6(submission.ranked[k].mean) << " +- "
              << format6(submission.ranked[k].std) << '\n';
  std::cout << "cases " << submission.cases << ", failed " << submission.failed_cases << '\n';
  return submission.failed_cases ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// rank

int run_rank(const std::vector<std::string>& reports, const std::string& out, const std::string& json_out) {
  std::vector<ranking::SubmissionScores> scores;
  for (const auto& path : reports) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path + ": not valid JSON (" + e.what() + ")");
    }
    try {
      scores.push_back(report::read_submission_scores(j));
    } catch (const SchemaError& e) {
      throw SchemaError(path + ": " + e.what());
    }
  }
  const auto board = ranking::build_leaderboard(scores);
  std::ostringstream csv;
  ranking::write_csv(csv, board);
  write_text(out, csv.str());
  if (!json_out.empty()) write_text(json_out, ranking::to_json(board).dump(2) + "\n");
  std::cout << csv.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-classif

// Reads case_id -> label from any CSV with case_id and label columns.
std::map<std::string, bool> read_labels(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty label file");
  const auto header = clinical::detail::split_csv_line(line);
  const auto id_col = std::find(header.begin(), header.end(), "case_id") - header.begin();
  const auto label_col = std::find(header.begin(), header.end(), "label") - header.begin();
  if (id_col == static_cast<long>(header.size()) || label_col == static_cast<long>(header.size()))
    throw SchemaError(path.string() + ": needs case_id and label columns");
  std::map<std::string, bool> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (clinical::detail::trim(line).empty()) continue;
    ++row;
    const auto cells = clinical::detail::split_csv_line(line);
    if (cells.size() != header.size()) throw CellError(row, "", "wrong number of cells");
    const std::string& v = cells[static_cast<std::size_t>(label_col)];
    if (v != "0" && v != "1") throw CellError(row, "label", "expected 0 or 1, got '" + v + "'");
    if (!labels.emplace(cells[static_cast<std::size_t>(id_col)], v == "1").second)
      throw CellError(row, "case_id", "duplicate case id");
  }
  if (labels.empty()) throw SchemaError(path.string() + ": no rows");
  return labels;
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

int run_eval_classif(const std::string& truth_path, const std::string& pred_path) {
  const auto truth = read_labels(truth_path);
  const auto pred = read_labels(pred_path);
  // std::vector<bool> is not contiguous, so labels go through plain arrays.
  const std::size_t n = truth.size();
  std::unique_ptr<bool[]> t(new bool[n]), p(new bool[n]);
  std::size_t i = 0;
  for (const auto& [id, label] : truth) {
    const auto it = pred.find(id);
    if (it == pred.end()) throw ArgumentError("case '" + id + "' has no prediction");
    t[i] = label;
    p[i++] = it->second;
  }
  for (const auto& [id, label] : pred)
    if (!truth.count(id)) throw ArgumentError("prediction for unknown case '" + id + "'");
  const auto s = metrics::classification_metrics(std::span<const bool>(t.get(), n), std::span<const bool>(p.get(), n));
  std::cout << "cases " << n << " (tp " << s.tp << ", fn " << s.fn << ", tn " << s.tn << ", fp " << s.fp
            << ")\n";
  std::cout << "sensitivity " << percent(s.sensitivity) << '\n';
  std::cout << "specificity " << percent(s.specificity) << '\n';
  std::cout << "precision " << percent(s.precision) << '\n';
  std::cout << "accuracy " << percent(s.accuracy) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// segment-classical

int run_segment(const std::string& image_path, const std::string& myo_path, const std::string& out,
                std::size_t min_component) {
  const Volume3D image = nifti::read_volume(image_path);
  LabelMap anatomy = nifti::read_labelmap(myo_path);
  // A plain 0/1 mask marks the myocardium with 1.
  const auto hist = tissue_histogram(anatomy);
  if (hist[2] == 0 && hist[3] == 0 && hist[4] == 0 && hist[1] > 0) {
    for (auto& v : anatomy.values())
      if (v == Tissue::cavity) v = Tissue::myocardium;
  }
  scarseg::PipelineOptions opt;
  opt.min_component = min_component;
  const auto result = scarseg::segment_classical(image, anatomy, opt);
  nifti::write_labelmap(result.labels, out);
  const auto h = tissue_histogram(result.labels);
  std::cout << "threshold " << format6(result.threshold) << '\n';
  std::cout << "myocardium " << h[2] << " infarct " << h[3] << " pmo " << h[4] << " voxels\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / classify

std::optional<fs::path> find_segmentation(const fs::path& dir, const std::string& case_id) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const fs::path p = dir / (case_id + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

double scar_volume_of(const fs::path& seg_dir, const std::string& case_id) {
  const auto path = find_segmentation(seg_dir, case_id);
  if (!path) throw IoError("no segmentation for case '" + case_id + "' in " + seg_dir.string());
  const LabelMap m = nifti::read_labelmap(*path);
  return static_cast<double>(count_voxels(m, selectors::kInfarctPlusPmo)) * voxel_volume_cm3(m.spacing());
}

std::vector<clinical::ClinicalRecord> load_records(const std::string& path) {
  auto table = clinical::parse_clinical_table(path);
  for (const auto& issue : table.issues)
    std::cerr << "error: row " << issue.row << (issue.column.empty() ? "" : ", column " + issue.column) << ": "
              << issue.message << '\n';
  table.throw_if_issues();
  if (table.records.empty()) throw SchemaError(path + ": no records");
  return std::move(table.records);
}

struct TrainArgs {
  std::string clinical, out, seg_dir, kind = "logistic";
  double lr = 0.5, l2 = 1e-3;
  std::size_t epochs = 2000, k = 5, max_depth = 4, min_leaf = 1;
};

int run_train(const TrainArgs& a) {
  const auto records = load_records(a.clinical);
  clinical::TrainOptions opt;
  opt.kind = a.kind == "knn" ? clinical::ClassifierKind::knn
             : a.kind == "tree" ? clinical::ClassifierKind::tree
                                : clinical::ClassifierKind::logistic;
  opt.logistic = {a.lr, a.epochs, a.l2};
  opt.k = a.k;
  opt.tree = {a.max_depth, a.min_leaf};
  std::optional<std::vector<double>> volumes;
  if (!a.seg_dir.empty()) {
    volumes.emplace();
    for (const auto& r : records) volumes->push_back(scar_volume_of(a.seg_dir, r.case_id));
  }
  const auto model = volumes ? clinical::train_classifier(records, opt, std::span<const double>(*volumes))
                             : clinical::train_classifier(records, opt);
  write_text(a.out, clinical::to_json(model).dump(2) + "\n");
  std::cout << "trained " << model.kind() << (model.fused ? " (fused)" : "") << " on " << records.size()
            << " records, " << model.dimension() << " features\n";
  return kExitOk;
}

int run_classify(const std::string& clinical_path, const std::string& model_path, const std::string& seg_dir,
                 const std::string& out) {
  const auto records = load_records(clinical_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(model_path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(model_path + ": not valid JSON (" + e.what() + ")");
  }
  const auto model = clinical::model_from_json(j);
  if (model.fused && seg_dir.empty()) throw ArgumentError("model is fused; --seg-dir is required");
  if (!model.fused && !seg_dir.empty()) throw ArgumentError("model was trained without scar volume; drop --seg-dir");

  std::ostringstream csv;
  csv << "case_id,label,score\n";
  bool partial = false;
  for (const auto& r : records) {
    clinical::Prediction p;
    try {
      p = model.fused ? clinical::fused_classify(r, scar_volume_of(seg_dir, r.case_id), model)
                      : clinical::classify(r, model);
    } catch (const IoError& e) {
      std::cerr << "warning: " << e.what() << "; case skipped\n";
      partial = true;
      continue;
    }
    csv << r.case_id << ',' << p.label << ',' << format6(p.score) << '\n';
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out, csv.str());
  }
  return partial ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation, ranking, classical segmentation and classification for DE-MRI"};
  app.require_subcommand(1);
  unsigned seed = 0;
  app.add_option("--seed", seed, "Seed for stochastic steps (all current commands are deterministic)");

  EvalSegArgs eval;
  auto* eval_cmd = app.add_subcommand("eval-seg", "Score a segmentation submission against ground truth");
  eval_cmd->add_option("--truth", eval.truth, "Ground-truth label maps")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--pred", eval.pred, "Predicted label maps")->required();
  eval_cmd->add_option("--out", eval.out, "Report JSON")->required();
  eval_cmd->add_option("--spacing-override", eval.spacing_override, "sx,sy,sz in mm");
  eval_cmd->add_option("--id", eval.id, "Submission id (default: prediction directory name)");
  eval_cmd->add_option("--jobs", eval.jobs, "Parallel workers (default DEMRI_EVAL_JOBS or 1)");

  std::vector<std::string> reports;
  std::string board_out, board_json;
  auto* rank_cmd = app.add_subcommand("rank", "Build a leaderboard from evaluation reports");
  rank_cmd->add_option("--reports", reports, "Report JSON files")->required()->check(CLI::ExistingFile);
  rank_cmd->add_option("--out", board_out, "Leaderboard CSV")->required();
  rank_cmd->add_option("--json", board_json, "Also write the leaderboard as JSON");

  std::string ctruth, cpred;
  auto* classif_cmd = app.add_subcommand("eval-classif", "Score normal/pathological predictions");
  classif_cmd->add_option("--truth", ctruth, "CSV with case_id,label")->required()->check(CLI::ExistingFile);
  classif_cmd->add_option("--pred", cpred, "CSV with case_id,label")->required()->check(CLI::ExistingFile);

  std::string image, myo, seg_out;
  std::size_t min_component = 10;
  auto* seg_cmd = app.add_subcommand("segment-classical", "Mixture-model scar segmentation in a given myocardium");
  seg_cmd->add_option("--image", image, "DE-MRI volume")->required()->check(CLI::ExistingFile);
  seg_cmd->add_option("--myo", myo, "Anatomy label map or 0/1 myocardium mask")->required()->check(CLI::ExistingFile);
  seg_cmd->add_option("--out", seg_out, "Output label map")->required();
  seg_cmd->add_option("--min-component", min_component, "Smallest kept scar component in voxels");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier on labelled clinical records");
  train_cmd->add_option("--clinical", train.clinical, "Clinical CSV with label column")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Model JSON")->required();
  train_cmd->add_option("--kind", train.kind, "logistic | knn | tree")
      ->check(CLI::IsMember({"logistic", "knn", "tree"}));
  train_cmd->add_option("--seg-dir", train.seg_dir, "Segmentations; appends scar volume")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--lr", train.lr, "Logistic step size");
  train_cmd->add_option("--epochs", train.epochs, "Logistic epochs");
  train_cmd->add_option("--l2", train.l2, "Logistic L2 weight");
  train_cmd->add_option("--k", train.k, "Neighbours for knn");
  train_cmd->add_option("--max-depth", train.max_depth, "Tree depth limit");
  train_cmd->add_option("--min-leaf", train.min_leaf, "Tree leaf size limit");

  std::string clin, model, seg_dir, pred_out;
  auto* classify_cmd = app.add_subcommand("classify", "Predict normal/pathological for clinical records");
  classify_cmd->add_option("--clinical", clin, "Clinical CSV")->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--model", model, "Model JSON")->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--seg-dir", seg_dir, "Segmentations; scar volume fused")->check(CLI::ExistingDirectory);
  classify_cmd->add_option("--out", pred_out, "Predictions CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);
  install_warning_router();
  try {
    if (*eval_cmd) return run_eval_seg(eval);
    if (*rank_cmd) return run_rank(reports, board_out, board_json);
    if (*classif_cmd) return run_eval_classif(ctruth, cpred);
    if (*seg_cmd) return run_segment(image, myo, seg_out, min_component);
    if (*train_cmd) return run_train(train);
    if (*classify_cmd) return run_classify(clin, model, seg_dir, pred_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}
