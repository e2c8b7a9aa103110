#pragma once

// Forward-only reference versions of the segmentation losses, class
// weighting, squeeze-and-excitation gating and activation functions. They
// evaluate probability maps; nothing here computes gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::neural {

// Inside log(); keeps the cross entropy finite when p = 0 on a target pixel.
inline constexpr double kLogEpsilon = 1e-12;

// Per-pixel class scores, L classes over N pixels, pixel-major storage so
// each pixel's distribution is contiguous. Used for predictions (soft) and
// targets (one-hot).
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  ProbabilityMap(std::size_t classes, std::size_t pixels, double fill = 0.0)
      : classes_(classes), pixels_(pixels), data_(classes * pixels, fill) {
    if (classes == 0) throw ArgumentError("probability map needs at least one class");
  }
  ProbabilityMap(std::size_t classes, std::size_t pixels, std::vector<double> data)
      : classes_(classes), pixels_(pixels), data_(std::move(data)) {
    if (classes == 0) throw ArgumentError("probability map needs at least one class");
    if (data_.size() != classes * pixels) throw ArgumentError("probability map size mismatch");
  }

  // One-hot encoding of integer labels in [0, classes).
  static ProbabilityMap one_hot(std::span<const int> labels, std::size_t classes) {
    ProbabilityMap out(classes, labels.size(), 0.0);
    for (std::size_t n = 0; n < labels.size(); ++n) {
      if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes)
        throw ArgumentError("label " + std::to_string(labels[n]) + " outside class range");
      out(static_cast<std::size_t>(labels[n]), n) = 1.0;
    }
    return out;
  }

  std::size_t classes() const noexcept { return classes_; }
  std::size_t pixels() const noexcept { return pixels_; }

  double& operator()(std::size_t l, std::size_t n) { return data_[n * classes_ + l]; }
  double operator()(std::size_t l, std::size_t n) const { return data_[n * classes_ + l]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const ProbabilityMap& o) const noexcept {
    return classes_ == o.classes_ && pixels_ == o.pixels_;
  }

  // Every entry in [0, 1] and every pixel summing to 1 within tol.
  bool is_simplex(double tol = 1e-6) const {
    for (std::size_t n = 0; n < pixels_; ++n) {
      double sum = 0.0;
      for (std::size_t l = 0; l < classes_; ++l) {
        const double v = (*this)(l, n);
        if (v < -tol || v > 1.0 + tol) return false;
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
  }

  friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;

 private:
  std::size_t classes_ = 0;
  std::size_t pixels_ = 0;
  std::vector<double> data_;
};

enum class WeightMode {
  inverse_count,          // 1 / count, for weighted cross entropy
  inverse_count_squared,  // 1 / count^2, for generalized Dice
  uniform,
};

struct ClassWeights {
  std::vector<double> w;
  WeightMode mode = WeightMode::uniform;
  std::vector<std::size_t> absent_classes;  // zero-instance classes, weight 0

  static ClassWeights uniform(std::size_t classes, double value = 1.0) {
    return {std::vector<double>(classes, value), WeightMode::uniform, {}};
  }
};

inline ClassWeights class_weights_from_counts(std::span<const double> counts, WeightMode mode) {
  if (counts.empty()) throw ArgumentError("class_weights: no classes");
  ClassWeights out{std::vector<double>(counts.size(), 0.0), mode, {}};
  double total = 0.0;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const double c = counts[l];
    if (c < 0.0 || !std::isfinite(c)) throw ArgumentError("class_weights: invalid count");
    total += c;
    if (mode == WeightMode::uniform) {
      out.w[l] = 1.0;
    } else if (c == 0.0) {
      out.absent_classes.push_back(l);
      warn("class_weights: class " + std::to_string(l) + " has no instances; weight set to 0");
    } else {
      out.w[l] = mode == WeightMode::inverse_count ? 1.0 / c : 1.0 / (c * c);
    }
  }
  if (total <= 0.0) throw ArgumentError("class_weights: at least one pixel required");
  return out;
}

// Counts come from summing the (one-hot) targets over all pixels.
inline ClassWeights class_weights(const ProbabilityMap& targets, WeightMode mode) {
  if (targets.pixels() == 0) throw ArgumentError("class_weights: at least one pixel required");
  std::vector<double> counts(targets.classes(), 0.0);
  for (std::size_t n = 0; n < targets.pixels(); ++n)
    for (std::size_t l = 0; l < targets.classes(); ++l) counts[l] += targets(l, n);
  return class_weights_from_counts(counts, mode);
}

namespace detail {

inline void check_shapes(const ProbabilityMap& p, const ProbabilityMap& r, const ClassWeights& w,
                         const char* what) {
  if (!p.same_shape(r)) throw ArgumentError(std::string(what) + ": prediction/target shape mismatch");
  if (w.w.size() != p.classes()) throw ArgumentError(std::string(what) + ": weight count != classes");
}

}  // namespace detail

// -(1/N) sum_l w_l sum_n r_ln ln(p_ln), N = pixels in the evaluated map.
inline double weighted_cross_entropy(const ProbabilityMap& p, const ProbabilityMap& r, const ClassWeights& w) {
  detail::check_shapes(p, r, w, "weighted_cross_entropy");
  if (p.pixels() == 0) throw ArgumentError("weighted_cross_entropy: empty map");
  double sum = 0.0;
  for (std::size_t l = 0; l < p.classes(); ++l) {
    double per_class = 0.0;
    for (std::size_t n = 0; n < p.pixels(); ++n) {
      const double target = r(l, n);
      if (target == 0.0) continue;
      per_class += target * std::log(std::max(p(l, n), kLogEpsilon));
    }
    sum += w.w[l] * per_class;
  }
  const double loss = -sum / static_cast<double>(p.pixels());
  return loss == 0.0 ? 0.0 : loss;  // no negative zero
}

// 1 - 2 sum_l w_l sum_n r p / sum_l w_l sum_n (r + p). A zero denominator
// (nothing to overlap, or all weights zero) is defined as zero loss.
inline double generalized_dice_loss(const ProbabilityMap& p, const ProbabilityMap& r, const ClassWeights& w) {
  detail::check_shapes(p, r, w, "generalized_dice_loss");
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < p.classes(); ++l) {
    double inter = 0.0, total = 0.0;
    for (std::size_t n = 0; n < p.pixels(); ++n) {
      inter += r(l, n) * p(l, n);
      total += r(l, n) + p(l, n);
    }
    num += w.w[l] * inter;
    den += w.w[l] * total;
  }
  if (den == 0.0) {
    warn("generalized_dice_loss: zero denominator; loss defined as 0");
    return 0.0;
  }
  return std::clamp(1.0 - 2.0 * num / den, 0.0, 1.0);
}

// mix * CE + (1 - mix) * GD.
inline double combo_loss(const ProbabilityMap& p, const ProbabilityMap& r, const ClassWeights& w_ce,
                         const ClassWeights& w_dice, double mix) {
  if (!(mix >= 0.0 && mix <= 1.0)) throw ArgumentError("combo_loss: mix must lie in [0, 1]");
  const double ce = mix > 0.0 ? weighted_cross_entropy(p, r, w_ce) : 0.0;
  const double gd = mix < 1.0 ? generalized_dice_loss(p, r, w_dice) : 0.0;
  return mix * ce + (1.0 - mix) * gd;
}

// ---------------------------------------------------------------------------
// Activations

enum class ActivationKind { sigmoid, relu, leaky_relu, elu, swish };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activation(ActivationKind kind, double x, double alpha = 0.01) {
  switch (kind) {
    case ActivationKind::sigmoid: return sigmoid(x);
    case ActivationKind::relu: return x > 0.0 ? x : 0.0;
    case ActivationKind::leaky_relu:
      if (!(alpha > 0.0)) throw ArgumentError("leaky_relu: alpha must be positive");
      return x > 0.0 ? x : alpha * x;
    case ActivationKind::elu:
      if (!(alpha > 0.0)) throw ArgumentError("elu: alpha must be positive");
      return x > 0.0 ? x : alpha * std::expm1(x);
    case ActivationKind::swish: return x * sigmoid(x);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Squeeze-and-excitation gating

// W1 is (C/r x C), W2 is (C x C/r), both row-major.
class SEWeights {
 public:
  SEWeights(std::size_t channels, std::size_t reduction, std::vector<double> w1, std::vector<double> w2)
      : channels_(channels), reduction_(reduction), w1_(std::move(w1)), w2_(std::move(w2)) {
    if (channels == 0 || reduction == 0 || channels % reduction != 0)
      throw ArgumentError("SEWeights: reduction rate must divide the channel count");
    if (w1_.size() != hidden() * channels_ || w2_.size() != channels_ * hidden())
      throw ArgumentError("SEWeights: matrix sizes do not match C and r");
  }

  static SEWeights zeros(std::size_t channels, std::size_t reduction) {
    const std::size_t h = reduction ? channels / reduction : 0;
    return SEWeights(channels, reduction, std::vector<double>(h * channels, 0.0),
                     std::vector<double>(channels * h, 0.0));
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t hidden() const noexcept { return channels_ / reduction_; }
  double w1(std::size_t row, std::size_t col) const { return w1_[row * channels_ + col]; }
  double w2(std::size_t row, std::size_t col) const { return w2_[row * hidden() + col]; }

 private:
  std::size_t channels_;
  std::size_t reduction_;
  std::vector<double> w1_;
  std::vector<double> w2_;
};

// sigmoid(W2 relu(W1 z)), one gate per channel.
inline std::vector<double> se_excitation(std::span<const double> z, const SEWeights& weights) {
  if (z.size() != weights.channels()) throw ArgumentError("se_excitation: descriptor length != C");
  std::vector<double> hidden(weights.hidden(), 0.0);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) acc += weights.w1(i, c) * z[c];
    hidden[i] = activation(ActivationKind::relu, acc);
  }
  std::vector<double> gate(z.size(), 0.0);
  for (std::size_t c = 0; c < gate.size(); ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hidden.size(); ++i) acc += weights.w2(c, i) * hidden[i];
    gate[c] = sigmoid(acc);
  }
  return gate;
}

}  // namespace demri::neural
