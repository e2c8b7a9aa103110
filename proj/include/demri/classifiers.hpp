#pragma once

// Normal / pathological classifiers over encoded clinical features:
// logistic regression, k nearest neighbours and a Gini decision tree, plus
// the fused variant that appends the scar volume.
//
// Model file, schema "demri-classifier/1":
//
//   {
//     "schema": "demri-classifier/1",
//     "kind": "logistic" | "knn" | "tree",
//     "fused": bool,                      // scar volume appended as last feature
//     "feature_names": [string ...],
//     "stats": {
//       "numeric": [{"name", "mean", "std", "median"} ...],
//       "sex_mode": "M" | "F", "tobacco_mode": "yes" | "no" | "former",
//       "flag_modes": [bool x5]
//     },
//     "logistic": {"weights": [...], "bias": x},          // kind == logistic
//     "knn": {"k": int, "x": [[...] ...], "y": [0|1 ...]}, // kind == knn
//     "tree": {"nodes": [{"feature", "threshold", "left", "right",
//                         "label", "score"} ...]}          // kind == tree
//   }
//
// Model parameters are written at full double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "demri/clinical.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::clinical {

using Matrix = std::vector<std::vector<double>>;

namespace detail {

inline std::size_t check_training(const Matrix& X, std::span<const int> y, const char* who) {
  if (X.size() != y.size()) throw ArgumentError(std::string(who) + ": X and y differ in length");
  if (X.size() < 2) throw DegenerateTrainingError(std::string(who) + ": at least two samples required");
  const std::size_t d = X.front().size();
  for (const auto& row : X)
    if (row.size() != d) throw ArgumentError(std::string(who) + ": ragged feature matrix");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw ArgumentError(std::string(who) + ": labels must be 0 or 1");
    (v ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw DegenerateTrainingError(std::string(who) + ": both classes must be present");
  return d;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

inline double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticOptions {
  double lr = 0.5;
  std::size_t epochs = 2000;
  double l2 = 1e-3;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> loss_history;  // objective before each epoch, then final

  double score(std::span<const double> x) const {
    if (x.size() != weights.size())
      throw ArgumentError("logistic: expected " + std::to_string(weights.size()) + " features, got " +
                          std::to_string(x.size()));
    return detail::logistic(detail::dot(weights, x) + bias);
  }
  int predict(std::span<const double> x) const { return score(x) >= 0.5 ? 1 : 0; }
};

// Mean log-loss plus (l2 / 2) * |w|^2; the bias is not penalised.
inline double logistic_objective(const Matrix& X, std::span<const int> y, std::span<const double> w, double b,
                                 double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double t = detail::dot(w, X[i]) + b;
    loss += y[i] ? detail::softplus(-t) : detail::softplus(t);
  }
  return loss / static_cast<double>(X.size()) + 0.5 * l2 * detail::dot(w, w);
}

// Step size below which full-batch descent on the log-loss cannot increase
// the objective: 1 / L, where L = lambda_max(G) / 4 and G is the second
// moment matrix of the rows with a bias column appended. lambda_max comes
// from power iteration, padded slightly and capped by trace(G), which
// always bounds it.
inline double logistic_stability_bound(const Matrix& X) {
  if (X.empty()) return 0.0;
  const std::size_t d = X.front().size() + 1;
  std::vector<double> g(d * d, 0.0);
  for (const auto& row : X) {
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = a + 1 < d ? row[a] : 1.0;
      for (std::size_t b = 0; b < d; ++b) g[a * d + b] += xa * (b + 1 < d ? row[b] : 1.0);
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += g[a * d + a];
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d))), w(d);
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    for (std::size_t a = 0; a < d; ++a) w[a] = std::inner_product(v.begin(), v.end(), g.begin() + a * d, 0.0);
    const double norm = std::sqrt(detail::dot(w, w));
    if (norm == 0.0) break;
    const double next = detail::dot(v, w);
    for (std::size_t a = 0; a < d; ++a) v[a] = w[a] / norm;
    const bool done = std::abs(next - lambda) <= 1e-12 * next;
    lambda = next;
    if (done) break;
  }
  const double n = static_cast<double>(X.size());
  const double lmax = std::min(trace, lambda * 1.01) / n;
  return lmax > 0.0 ? 4.0 / lmax : std::numeric_limits<double>::infinity();
}

// Full-batch proximal gradient descent: a gradient step on the log-loss
// followed by the exact shrinkage of the L2 term, stable for any l2.
inline LogisticModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticOptions& opt = {}) {
  const std::size_t d = detail::check_training(X, y, "train_logistic");
  if (!(opt.lr > 0.0) || opt.l2 < 0.0) throw ArgumentError("train_logistic: lr must be > 0 and l2 >= 0");
  if (opt.lr > logistic_stability_bound(X))
    warn("train_logistic: learning rate exceeds the stability bound; loss may oscillate");

  LogisticModel model;
  model.weights.assign(d, 0.0);
  const double n = static_cast<double>(X.size());
  std::vector<double> grad(d);
  model.loss_history.reserve(opt.epochs + 1);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    model.loss_history.push_back(logistic_objective(X, y, model.weights, model.bias, opt.l2));
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double r = detail::logistic(detail::dot(model.weights, X[i]) + model.bias) - y[i];
      for (std::size_t k = 0; k < d; ++k) grad[k] += r * X[i][k];
      grad_b += r;
    }
    const double shrink = 1.0 / (1.0 + opt.lr * opt.l2);
    for (std::size_t k = 0; k < d; ++k) model.weights[k] = (model.weights[k] - opt.lr * grad[k] / n) * shrink;
    model.bias -= opt.lr * grad_b / n;
  }
  model.loss_history.push_back(logistic_objective(X, y, model.weights, model.bias, opt.l2));
  return model;
}

// ---------------------------------------------------------------------------
// k nearest neighbours

// Majority label among the k nearest training points (Euclidean); equal
// distances resolve to the lower sample index. A split vote goes to the
// label of the nearest neighbour.
inline int knn_classify(const Matrix& train_X, std::span<const int> train_y, std::span<const double> x,
                        std::size_t k) {
  if (train_X.empty()) throw ArgumentError("knn_classify: empty training set");
  if (train_X.size() != train_y.size()) throw ArgumentError("knn_classify: X and y differ in length");
  if (k == 0 || k > train_X.size()) throw ArgumentError("knn_classify: k must be in [1, training size]");
  std::vector<std::pair<double, std::size_t>> d(train_X.size());
  for (std::size_t i = 0; i < train_X.size(); ++i) {
    if (train_X[i].size() != x.size()) throw ArgumentError("knn_classify: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (train_X[i][j] - x[j]) * (train_X[i][j] - x[j]);
    d[i] = {s, i};
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::pair<int, std::size_t>> votes;  // label, count
  for (std::size_t i = 0; i < k; ++i) {
    const int label = train_y[d[i].second];
    auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == label; });
    if (it == votes.end()) votes.emplace_back(label, 1); else ++it->second;
  }
  // votes[0] belongs to the nearest neighbour, so a strict maximum search
  // keeps it on split votes.
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

struct KnnModel {
  std::size_t k = 5;
  Matrix x;
  std::vector<int> y;

  int predict(std::span<const double> q) const { return knn_classify(x, y, q, k); }
  // Fraction of positive labels among the k neighbours.
  double score(std::span<const double> q) const {
    std::vector<std::pair<double, std::size_t>> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].size() != q.size()) throw ArgumentError("knn: dimension mismatch");
      double s = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) s += (x[i][j] - q[j]) * (x[i][j] - q[j]);
      d[i] = {s, i};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    double pos = 0.0;
    for (std::size_t i = 0; i < k; ++i) pos += y[d[i].second];
    return pos / static_cast<double>(k);
  }
};

inline KnnModel train_knn(const Matrix& X, std::span<const int> y, std::size_t k) {
  detail::check_training(X, y, "train_knn");
  if (k == 0 || k > X.size()) throw ArgumentError("train_knn: k must be in [1, training size]");
  if (k % 2 == 0) warn("train_knn: even k can produce split votes");
  return KnnModel{k, X, std::vector<int>(y.begin(), y.end())};
}

// ---------------------------------------------------------------------------
// Decision tree

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int label = 0;
  double score = 0.0;  // fraction of positive training samples reaching the node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t features = 0;

  const TreeNode& leaf_for(std::span<const double> x) const {
    if (x.size() != features)
      throw ArgumentError("tree: expected " + std::to_string(features) + " features, got " + std::to_string(x.size()));
    std::size_t i = 0;
    while (nodes[i].feature >= 0)
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                       ? nodes[i].left
                                       : nodes[i].right);
    return nodes[i];
  }
  int predict(std::span<const double> x) const { return leaf_for(x).label; }
  double score(std::span<const double> x) const { return leaf_for(x).score; }

  std::size_t depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
      auto [i, dpt] = stack.back();
      stack.pop_back();
      best = std::max(best, dpt);
      if (nodes[i].feature >= 0) {
        stack.emplace_back(static_cast<std::size_t>(nodes[i].left), dpt + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes[i].right), dpt + 1);
      }
    }
    return best;
  }
};

struct TreeOptions {
  std::size_t max_depth = 4;
  std::size_t min_leaf = 1;
};

namespace detail {

inline double gini(double pos, double n) {
  if (n <= 0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

inline Split best_split(const Matrix& X, std::span<const int> y, const std::vector<std::size_t>& idx,
                        std::size_t min_leaf) {
  const double n = static_cast<double>(idx.size());
  double pos_total = 0.0;
  for (std::size_t i : idx) pos_total += y[i];
  Split best;
  best.impurity = gini(pos_total, n);
  const std::size_t d = X.front().size();
  std::vector<std::size_t> order(idx);
  for (std::size_t f = 0; f < d; ++f) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return X[a][f] != X[b][f] ? X[a][f] < X[b][f] : a < b;
    });
    double pos_left = 0.0;
    for (std::size_t c = 0; c + 1 < order.size(); ++c) {
      pos_left += y[order[c]];
      const double lo = X[order[c]][f];
      const double hi = X[order[c + 1]][f];
      if (lo == hi) continue;
      const double n_left = static_cast<double>(c + 1);
      const double n_right = n - n_left;
      if (c + 1 < min_leaf || order.size() - (c + 1) < min_leaf) continue;
      const double imp = (n_left * gini(pos_left, n_left) + n_right * gini(pos_total - pos_left, n_right)) / n;
      // Strict improvement keeps the lowest feature, then lowest threshold.
      if (imp < best.impurity - 1e-12) {
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (lo + hi);
        best.impurity = imp;
      }
    }
  }
  return best;
}

inline int grow(DecisionTree& tree, const Matrix& X, std::span<const int> y, std::vector<std::size_t> idx,
                std::size_t depth, const TreeOptions& opt) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  double pos = 0.0;
  for (std::size_t i : idx) pos += y[i];
  const double n = static_cast<double>(idx.size());
  tree.nodes[id].score = pos / n;
  tree.nodes[id].label = pos > n - pos ? 1 : 0;  // even split goes to class 0
  if (depth >= opt.max_depth || pos == 0.0 || pos == n) return id;
  const Split s = best_split(X, y, idx, opt.min_leaf);
  if (s.feature < 0) return id;
  std::vector<std::size_t> left, right;
  for (std::size_t i : idx) (X[i][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(i);
  const int l = grow(tree, X, y, std::move(left), depth + 1, opt);
  const int r = grow(tree, X, y, std::move(right), depth + 1, opt);
  tree.nodes[id].feature = s.feature;
  tree.nodes[id].threshold = s.threshold;
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return id;
}

}  // namespace detail

inline DecisionTree train_tree(const Matrix& X, std::span<const int> y, const TreeOptions& opt = {}) {
  const std::size_t d = detail::check_training(X, y, "train_tree");
  if (opt.min_leaf == 0) throw ArgumentError("train_tree: min_leaf must be >= 1");
  DecisionTree tree;
  tree.features = d;
  std::vector<std::size_t> idx(X.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  detail::grow(tree, X, y, std::move(idx), 0, opt);
  return tree;
}

// ---------------------------------------------------------------------------
// Trained pipeline: encoding statistics plus one of the classifiers.

inline constexpr const char* kModelSchema = "demri-classifier/1";
inline constexpr const char* kScarVolumeFeature = "scar_volume_cm3";

struct Prediction {
  int label = 0;  // 1 = pathological
  double score = 0.0;
};

struct ClassifierModel {
  FeatureStats stats;
  bool fused = false;
  std::variant<LogisticModel, KnnModel, DecisionTree> model;

  std::string kind() const {
    switch (model.index()) {
      case 0: return "logistic";
      case 1: return "knn";
      default: return "tree";
    }
  }
  std::size_t dimension() const { return stats.dimension(); }

  Prediction predict_encoded(std::span<const double> x) const {
    if (x.size() != dimension())
      throw ArgumentError("classifier expects " + std::to_string(dimension()) + " features, got " +
                          std::to_string(x.size()));
    return std::visit([&](const auto& m) { return Prediction{m.predict(x), m.score(x)}; }, model);
  }
};

enum class ClassifierKind { logistic, knn, tree };

struct TrainOptions {
  ClassifierKind kind = ClassifierKind::logistic;
  LogisticOptions logistic;
  std::size_t k = 5;
  TreeOptions tree;
};

inline std::vector<int> labels_of(std::span<const ClinicalRecord> records) {
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& r : records) {
    if (!r.pathological) throw ArgumentError("training record '" + r.case_id + "' has no label");
    y.push_back(*r.pathological ? 1 : 0);
  }
  return y;
}

// Trains on labelled records; with `scar_volumes` the model is fused and
// takes the volume (cm^3) as its last feature.
inline ClassifierModel train_classifier(std::span<const ClinicalRecord> records, const TrainOptions& opt = {},
                                        std::optional<std::span<const double>> scar_volumes = std::nullopt) {
  const auto y = labels_of(records);
  std::vector<std::vector<double>> extras;
  const std::string extra_name = kScarVolumeFeature;
  if (scar_volumes) {
    if (scar_volumes->size() != records.size()) throw ArgumentError("train_classifier: one scar volume per record");
    for (double v : *scar_volumes) extras.push_back({v});
  }
  const auto enc = encode_features(records, std::nullopt, extras, std::span<const std::string>(&extra_name, 1));
  ClassifierModel out;
  out.stats = enc.stats;
  out.fused = scar_volumes.has_value();
  switch (opt.kind) {
    case ClassifierKind::logistic: out.model = train_logistic(enc.rows, y, opt.logistic); break;
    case ClassifierKind::knn: out.model = train_knn(enc.rows, y, opt.k); break;
    case ClassifierKind::tree: out.model = train_tree(enc.rows, y, opt.tree); break;
  }
  return out;
}

inline Prediction classify(const ClinicalRecord& record, const ClassifierModel& model) {
  if (model.fused) throw ArgumentError("classify: model expects a scar volume; use fused_classify");
  const auto enc = encode_features(std::span<const ClinicalRecord>(&record, 1), model.stats);
  return model.predict_encoded(enc.rows.front());
}

inline std::vector<double> fused_vector(const ClinicalRecord& record, double scar_volume_cm3,
                                        const ClassifierModel& model) {
  if (!model.fused || model.stats.extra_count() != 1)
    throw ArgumentError("fused_classify: model was not trained with the scar volume feature");
  const std::vector<std::vector<double>> extras{{scar_volume_cm3}};
  const auto enc = encode_features(std::span<const ClinicalRecord>(&record, 1), model.stats, extras);
  return enc.rows.front();
}

inline Prediction fused_classify(const ClinicalRecord& record, double scar_volume_cm3, const ClassifierModel& model) {
  return model.predict_encoded(fused_vector(record, scar_volume_cm3, model));
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const ClassifierModel& m) {
  using J = nlohmann::ordered_json;
  J j;
  j["schema"] = kModelSchema;
  j["kind"] = m.kind();
  j["fused"] = m.fused;
  j["feature_names"] = feature_names(m.stats);
  J numeric = J::array();
  for (const auto& s : m.stats.numeric)
    numeric.push_back({{"name", s.name}, {"mean", s.mean}, {"std", s.std}, {"median", s.median}});
  static constexpr const char* kTobacco[] = {"yes", "no", "former"};
  j["stats"] = {{"numeric", std::move(numeric)},
                {"sex_mode", m.stats.sex_mode == Sex::male ? "M" : "F"},
                {"tobacco_mode", kTobacco[static_cast<int>(m.stats.tobacco_mode)]},
                {"flag_modes", m.stats.flag_modes}};
  if (const auto* lr = std::get_if<LogisticModel>(&m.model)) {
    j["logistic"] = {{"weights", lr->weights}, {"bias", lr->bias}};
  } else if (const auto* knn = std::get_if<KnnModel>(&m.model)) {
    j["knn"] = {{"k", knn->k}, {"x", knn->x}, {"y", knn->y}};
  } else {
    const auto& tree = std::get<DecisionTree>(m.model);
    J nodes = J::array();
    for (const auto& n : tree.nodes)
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"label", n.label},
                       {"score", n.score}});
    j["tree"] = {{"features", tree.features}, {"nodes", std::move(nodes)}};
  }
  return j;
}

inline ClassifierModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string() ||
      j["schema"].get<std::string>() != kModelSchema)
    throw SchemaError(std::string("classifier model schema is not '") + kModelSchema + "'");
  ClassifierModel m;
  try {
    m.fused = j.at("fused").get<bool>();
    const auto& st = j.at("stats");
    for (const auto& s : st.at("numeric"))
      m.stats.numeric.push_back({s.at("name").get<std::string>(), s.at("mean").get<double>(),
                                 s.at("std").get<double>(), s.at("median").get<double>()});
    if (m.stats.numeric.size() < 5) throw SchemaError("classifier model has too few numeric statistics");
    m.stats.sex_mode = st.at("sex_mode").get<std::string>() == "M" ? Sex::male : Sex::female;
    const auto tob = st.at("tobacco_mode").get<std::string>();
    m.stats.tobacco_mode = tob == "yes" ? Tobacco::yes : tob == "former" ? Tobacco::former : Tobacco::no;
    m.stats.flag_modes = st.at("flag_modes").get<std::array<bool, 5>>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "logistic") {
      LogisticModel lr;
      lr.weights = j.at("logistic").at("weights").get<std::vector<double>>();
      lr.bias = j.at("logistic").at("bias").get<double>();
      m.model = std::move(lr);
    } else if (kind == "knn") {
      KnnModel knn;
      knn.k = j.at("knn").at("k").get<std::size_t>();
      knn.x = j.at("knn").at("x").get<Matrix>();
      knn.y = j.at("knn").at("y").get<std::vector<int>>();
      if (knn.k == 0 || knn.k > knn.x.size() || knn.x.size() != knn.y.size())
        throw SchemaError("knn model is inconsistent");
      m.model = std::move(knn);
    } else if (kind == "tree") {
      DecisionTree tree;
      tree.features = j.at("tree").at("features").get<std::size_t>();
      for (const auto& n : j.at("tree").at("nodes"))
        tree.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                              n.at("right").get<int>(), n.at("label").get<int>(), n.at("score").get<double>()});
      if (tree.nodes.empty()) throw SchemaError("tree model has no nodes");
      for (const auto& n : tree.nodes)
        if (n.feature >= 0 && (n.feature >= static_cast<int>(tree.features) || n.left <= 0 || n.right <= 0 ||
                               n.left >= static_cast<int>(tree.nodes.size()) ||
                               n.right >= static_cast<int>(tree.nodes.size())))
          throw SchemaError("tree model has an invalid node");
      m.model = std::move(tree);
    } else {
      throw SchemaError("unknown classifier kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed classifier model: ") + e.what());
  }
  const std::size_t expected = m.dimension();
  const std::size_t actual = std::visit(
      [](const auto& mm) -> std::size_t {
        using M = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<M, LogisticModel>) return mm.weights.size();
        else if constexpr (std::is_same_v<M, KnnModel>) return mm.x.empty() ? 0 : mm.x.front().size();
        else return mm.features;
      },
      m.model);
  if (expected != actual) throw SchemaError("classifier model dimension does not match its statistics");
  if (m.fused != (m.stats.extra_count() == 1)) throw SchemaError("classifier model fused flag is inconsistent");
  return m;
}

}  // namespace demri::clinical
