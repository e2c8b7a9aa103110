#pragma once

// Classical scar segmentation inside a known myocardium: a Rayleigh
// (normal myocardium) + Gaussian (enhanced scar) intensity mixture fitted by
// EM, a Bayes threshold, marker-based watershed refinement, and
// post-processing of scattered components and misplaced PMO.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "demri/components.hpp"
#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"
#include "demri/preprocess.hpp"

namespace demri::scarseg {

inline constexpr std::size_t kMinSamples = 20;
inline constexpr double kCollapsedSigma = 1e-9;
inline constexpr double kMonotoneTolerance = 1e-9;

// (1 - pi) Rayleigh(sigma_r) + pi Normal(mu_g, sigma_g). The Gaussian is the
// scar component.
struct RayleighGaussianMixture {
  double pi = 0.1;
  double sigma_r = 1.0;
  double mu_g = 0.0;
  double sigma_g = 1.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();

  // Fit diagnostics.
  std::size_t iterations = 0;
  bool converged = false;
  bool near_degenerate = false;  // one component lost (almost) all its mass
  std::vector<double> log_likelihood_history;

  double rayleigh_mode() const noexcept { return sigma_r; }
};

inline double log_rayleigh(double x, double sigma) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(x) - 2.0 * std::log(sigma) - x * x / (2.0 * sigma * sigma);
}

inline double log_gaussian(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma) - 0.5 * d * d;
}

namespace detail {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double component_log_weight(double w) {
  return w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
}

// Total log-likelihood; fills the scar responsibilities when asked.
inline double e_step(std::span<const double> x, const RayleighGaussianMixture& m, std::vector<double>* gamma_g) {
  const double lw_r = component_log_weight(1.0 - m.pi);
  const double lw_g = component_log_weight(m.pi);
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = lw_r + log_rayleigh(x[i], m.sigma_r);
    const double b = lw_g + log_gaussian(x[i], m.mu_g, m.sigma_g);
    const double total = log_add(a, b);
    ll += total;
    if (gamma_g) (*gamma_g)[i] = std::exp(b - total);
  }
  return ll;
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Initial guess: Rayleigh scale from the samples below the median
// (sigma^2 = mean(x^2) / 2), Gaussian moments from the samples above the 90th
// percentile, pi = 0.1.
inline RayleighGaussianMixture initial_mixture(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = detail::quantile_sorted(sorted, 0.5);
  const double p90 = detail::quantile_sorted(sorted, 0.9);

  double sq = 0.0;
  std::size_t n_low = 0;
  for (double v : sorted) {
    if (v > median) break;
    sq += v * v;
    ++n_low;
  }
  double sum = 0.0;
  std::size_t n_high = 0;
  for (double v : sorted)
    if (v >= p90) {
      sum += v;
      ++n_high;
    }
  const double mu = sum / static_cast<double>(n_high);
  double ss = 0.0;
  for (double v : sorted)
    if (v >= p90) ss += (v - mu) * (v - mu);

  RayleighGaussianMixture m;
  m.pi = 0.1;
  m.sigma_r = std::sqrt(sq / (2.0 * static_cast<double>(std::max<std::size_t>(n_low, 1))));
  m.mu_g = mu;
  m.sigma_g = std::sqrt(ss / static_cast<double>(n_high));
  if (!(m.sigma_r > kCollapsedSigma) || !(m.sigma_g > kCollapsedSigma))
    throw DegenerateFitError("mixture initialisation collapsed: intensities are (nearly) constant");
  return m;
}

struct EmOptions {
  std::size_t max_iter = 500;
  double tol = 1e-6;  // on |delta log-likelihood|
};

// EM for the Rayleigh + Gaussian mixture. Samples must be non-negative.
inline RayleighGaussianMixture fit_mixture_em(std::span<const double> x, EmOptions opts = {}) {
  if (x.size() < kMinSamples)
    throw InsufficientDataError("mixture fit needs at least " + std::to_string(kMinSamples) + " samples, got " +
                                std::to_string(x.size()));
  for (double v : x)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("mixture fit: samples must be finite and >= 0");

  RayleighGaussianMixture m = initial_mixture(x);
  const auto n = static_cast<double>(x.size());
  std::vector<double> gamma(x.size(), 0.0);
  m.log_likelihood = detail::e_step(x, m, &gamma);
  m.log_likelihood_history.push_back(m.log_likelihood);

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    double w_g = 0.0, w_r = 0.0, sx_g = 0.0, sxx_r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g = gamma[i], r = 1.0 - g;
      w_g += g;
      w_r += r;
      sx_g += g * x[i];
      sxx_r += r * x[i] * x[i];
    }
    // One component has (numerically) vanished: the data is explained by a
    // single family and further updates would divide by zero.
    if (w_g < 1e-9 * n || w_r < 1e-9 * n) {
      m.near_degenerate = true;
      warn("mixture fit: a component vanished after " + std::to_string(it) + " iterations");
      break;
    }
    RayleighGaussianMixture next = m;
    next.pi = w_g / n;
    next.sigma_r = std::sqrt(sxx_r / (2.0 * w_r));
    next.mu_g = sx_g / w_g;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += gamma[i] * (x[i] - next.mu_g) * (x[i] - next.mu_g);
    next.sigma_g = std::sqrt(ss / w_g);
    if (!(next.sigma_r > kCollapsedSigma) || !(next.sigma_g > kCollapsedSigma))
      throw DegenerateFitError("mixture fit: component standard deviation collapsed");

    next.log_likelihood = detail::e_step(x, next, &gamma);
    next.iterations = it + 1;
    next.log_likelihood_history.push_back(next.log_likelihood);
    const double delta = next.log_likelihood - m.log_likelihood;
    m = std::move(next);
    if (std::abs(delta) < opts.tol) {
      m.converged = true;
      break;
    }
  }
  if (m.pi > 0.99 || m.pi < 0.01) m.near_degenerate = true;
  return m;
}

// Log-likelihood never decreases by more than `tol` between iterations.
inline bool log_likelihood_monotone(const RayleighGaussianMixture& m, double tol = kMonotoneTolerance) {
  const auto& h = m.log_likelihood_history;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] < h[i - 1] - tol * std::max(1.0, std::abs(h[i - 1]))) return false;
  return true;
}

// log P(scar | x) - log P(normal | x).
inline double scar_log_odds(const RayleighGaussianMixture& m, double x) {
  const double g = detail::component_log_weight(m.pi) + log_gaussian(x, m.mu_g, m.sigma_g);
  const double r = detail::component_log_weight(1.0 - m.pi) + log_rayleigh(x, m.sigma_r);
  if (g == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (r == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
  return g - r;
}

inline double scar_posterior(const RayleighGaussianMixture& m, double x) {
  const double lo = scar_log_odds(m, x);
  if (lo == std::numeric_limits<double>::infinity()) return 1.0;
  if (lo == -std::numeric_limits<double>::infinity()) return 0.0;
  return 1.0 / (1.0 + std::exp(-lo));
}

inline constexpr double kNoScar = std::numeric_limits<double>::infinity();

// Smallest t >= Rayleigh mode with P(scar | t) >= 0.5, or kNoScar.
inline double scar_threshold(const RayleighGaussianMixture& m) {
  if (!(m.pi > 0.0)) return kNoScar;
  const double lo = m.rayleigh_mode();
  if (scar_log_odds(m, lo) >= 0.0) return lo;
  const double hi = std::max(m.mu_g + 10.0 * m.sigma_g, lo + 10.0 * m.sigma_r);
  if (!(hi > lo)) return kNoScar;
  constexpr int kSteps = 200000;
  const double step = (hi - lo) / kSteps;
  double below = lo;
  for (int k = 1; k <= kSteps; ++k) {
    const double t = lo + step * k;
    if (scar_log_odds(m, t) >= 0.0) {
      double above = t;
      for (int it = 0; it < 100 && above - below > 1e-12 * std::max(1.0, above); ++it) {
        const double mid = 0.5 * (below + above);
        (scar_log_odds(m, mid) >= 0.0 ? above : below) = mid;
      }
      return above;
    }
    below = t;
  }
  return kNoScar;
}

// ---------------------------------------------------------------------------
// Watershed

struct WatershedMarkers {
  double scar_above = kNoScar;  // voxels brighter than this seed the scar
  double normal_below = 0.0;    // voxels darker than this seed normal tissue
};

inline WatershedMarkers markers_from(const RayleighGaussianMixture& m) {
  return {scar_threshold(m), m.rayleigh_mode()};
}

// Per-slice marker-based watershed on negated intensity inside the
// myocardium mask, 8-connected. Bright voxels are flooded first; ties are
// broken by linear voxel index, then in favour of scar. Returns the scar
// mask.
inline Mask3D watershed_refine(const Volume3D& v, const Mask3D& myo, const WatershedMarkers& markers) {
  require_same_extents(v.extents(), myo.extents(), "watershed_refine");
  if (count_set(myo) == 0) throw ArgumentError("watershed_refine: myocardium mask is empty");
  constexpr std::uint8_t kUnset = 0, kScar = 1, kNormal = 2;
  Mask3D scar(v.extents(), v.spacing(), std::uint8_t{0});
  const std::size_t nx = v.nx(), ny = v.ny();

  using Entry = std::tuple<double, std::size_t, std::uint8_t>;  // elevation, index, label
  for (std::size_t z = 0; z < v.nz(); ++z) {
    std::vector<std::uint8_t> label(nx * ny, kUnset);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    auto inside = [&](std::size_t x, std::size_t y) { return myo(x, y, z) != 0; };
    auto push_neighbors = [&](std::size_t x, std::size_t y, std::uint8_t lab) {
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const long qx = static_cast<long>(x) + dx, qy = static_cast<long>(y) + dy;
          if (qx < 0 || qy < 0 || qx >= static_cast<long>(nx) || qy >= static_cast<long>(ny)) continue;
          const auto ux = static_cast<std::size_t>(qx), uy = static_cast<std::size_t>(qy);
          if (!inside(ux, uy) || label[uy * nx + ux] != kUnset) continue;
          queue.emplace(-v(ux, uy, z), uy * nx + ux, lab);
        }
    };
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        if (!inside(x, y)) continue;
        const double value = v(x, y, z);
        if (value > markers.scar_above) {
          label[y * nx + x] = kScar;
        } else if (value < markers.normal_below) {
          label[y * nx + x] = kNormal;
        }
      }
    for (std::size_t i = 0; i < nx * ny; ++i)
      if (label[i] != kUnset) push_neighbors(i % nx, i / nx, label[i]);
    while (!queue.empty()) {
      const auto [elevation, i, lab] = queue.top();
      queue.pop();
      if (label[i] != kUnset) continue;
      label[i] = lab;
      push_neighbors(i % nx, i / nx, lab);
    }
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) scar(x, y, z) = label[y * nx + x] == kScar ? 1 : 0;
  }
  return scar;
}

// ---------------------------------------------------------------------------
// Post-processing

// Scar (infarct + PMO) components, 26-connected, smaller than min_voxels are
// relabelled normal myocardium.
inline LabelMap remove_small_components(const LabelMap& m, std::size_t min_voxels) {
  if (min_voxels < 1) throw ArgumentError("remove_small_components: min_voxels must be >= 1");
  LabelMap out = m;
  const auto comps = label_components(m, selectors::kInfarctPlusPmo, Connectivity::full26);
  for (const auto& members : comps.members)
    if (members.size() < min_voxels)
      for (std::size_t i : members) out[i] = Tissue::myocardium;
  return out;
}

namespace detail {

inline Plane<std::uint8_t> morph_2d(const Plane<std::uint8_t>& in, bool dilate) {
  Plane<std::uint8_t> out(in.nx(), in.ny(), std::uint8_t{0});
  for (std::size_t y = 0; y < in.ny(); ++y)
    for (std::size_t x = 0; x < in.nx(); ++x) {
      bool any = false, all = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const long qx = static_cast<long>(x) + dx, qy = static_cast<long>(y) + dy;
          const bool set = qx >= 0 && qy >= 0 && qx < static_cast<long>(in.nx()) && qy < static_cast<long>(in.ny()) &&
                           in(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy)) != 0;
          any = any || set;
          all = all && set;
        }
      out(x, y) = (dilate ? any : all) ? 1 : 0;
    }
  return out;
}

}  // namespace detail

// 3x3 closing of a slice mask.
inline Plane<std::uint8_t> close_2d(const Plane<std::uint8_t>& in) {
  return detail::morph_2d(detail::morph_2d(in, true), false);
}

// Voxels on the outer (epicardial) contour of the closed myocardium: inside
// the closed wall with a 4-neighbour that is outside it and not cavity, or on
// the grid border.
inline Mask3D outer_contour(const LabelMap& m) {
  Mask3D out(m.extents(), m.spacing(), std::uint8_t{0});
  const Mask3D wall = region_mask(m, selectors::kMyocardiumTotal);
  for (std::size_t z = 0; z < m.nz(); ++z) {
    const Plane<std::uint8_t> closed = close_2d(wall.slice(z));
    for (std::size_t y = 0; y < m.ny(); ++y)
      for (std::size_t x = 0; x < m.nx(); ++x) {
        if (!closed(x, y)) continue;
        bool contour = false;
        const std::array<std::array<long, 2>, 4> steps = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& [dx, dy] : steps) {
          const long qx = static_cast<long>(x) + dx, qy = static_cast<long>(y) + dy;
          if (qx < 0 || qy < 0 || qx >= static_cast<long>(m.nx()) || qy >= static_cast<long>(m.ny())) {
            contour = true;
            continue;
          }
          const auto ux = static_cast<std::size_t>(qx), uy = static_cast<std::size_t>(qy);
          if (!closed(ux, uy) && m(ux, uy, z) != Tissue::cavity) contour = true;
        }
        out(x, y, z) = contour ? 1 : 0;
      }
  }
  return out;
}

// PMO must sit inside the infarct: PMO voxels on the outer myocardial
// contour become infarct, then PMO components (26-connected) with no
// face-adjacent infarct or cavity voxel become infarct.
inline LabelMap pmo_contact_filter(const LabelMap& m) {
  LabelMap out = m;
  if (count_voxels(m, selectors::kPmo) == 0) return out;
  const Mask3D contour = outer_contour(m);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] == Tissue::pmo && contour[i]) out[i] = Tissue::infarct;
  const TissueSelector anchor{Tissue::infarct, Tissue::cavity};
  const auto comps = label_components(out, selectors::kPmo, Connectivity::full26);
  for (const auto& members : comps.members)
    if (!component_touches(out, members, anchor))
      for (std::size_t i : members) out[i] = Tissue::infarct;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions {
  std::size_t min_component = 10;
  EmOptions em;
};

struct PipelineResult {
  LabelMap labels;
  std::optional<RayleighGaussianMixture> mixture;  // empty when the fit failed
  double threshold = kNoScar;
  std::vector<std::size_t> degenerate_slices;
};

// Per-slice Z-score followed by adding back mean/sigma, i.e. x / sigma per
// slice: inter-slice gain is equalised while raw zero stays at zero, which
// the Rayleigh component needs. Negative values are clamped to zero.
inline Volume3D normalize_for_mixture(const Volume3D& v, std::vector<std::size_t>* degenerate = nullptr) {
  auto z = preprocess::zscore_slice(v);
  Volume3D out = std::move(z.volume);
  const std::size_t n = v.extents().slice_voxels();
  for (std::size_t k = 0; k < v.nz(); ++k) {
    auto raw = v.values().subspan(k * n, n);
    double mean = 0.0;
    for (double x : raw) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : raw) ss += (x - mean) * (x - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    auto dst = out.values().subspan(k * n, n);
    if (!(sigma > preprocess::kDegenerateSigma)) continue;  // already zeroed
    for (double& x : dst) x = std::max(0.0, x + mean / sigma);
  }
  if (degenerate) *degenerate = std::move(z.degenerate_slices);
  return out;
}

// Segments scar inside the MYOCARDIUM_TOTAL region of `anatomy`. Cavity and
// background labels are carried over; the wall is relabelled normal
// myocardium or infarct.
inline PipelineResult segment_classical(const Volume3D& image, const LabelMap& anatomy,
                                        const PipelineOptions& opts = {}) {
  require_same_extents(image.extents(), anatomy.extents(), "segment_classical");
  PipelineResult result;
  const Volume3D norm = normalize_for_mixture(image, &result.degenerate_slices);
  const Mask3D myo = region_mask(anatomy, selectors::kMyocardiumTotal);

  LabelMap labels = anatomy;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (myo[i]) labels[i] = Tissue::myocardium;

  std::vector<double> samples;
  for (std::size_t i = 0; i < norm.size(); ++i)
    if (myo[i]) samples.push_back(norm[i]);
  if (samples.empty()) {
    warn("segment_classical: no myocardium; nothing to segment");
    result.labels = std::move(labels);
    return result;
  }
  try {
    result.mixture = fit_mixture_em(samples, opts.em);
  } catch (const Error& e) {
    warn(std::string("segment_classical: mixture fit failed (") + e.what() + "); no scar labelled");
    result.labels = std::move(labels);
    return result;
  }
  const WatershedMarkers markers = markers_from(*result.mixture);
  result.threshold = markers.scar_above;
  const Mask3D scar = watershed_refine(norm, myo, markers);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (scar[i]) labels[i] = Tissue::infarct;
  labels = remove_small_components(labels, opts.min_component);
  result.labels = pmo_contact_filter(labels);
  return result;
}

}  // namespace demri::scarseg
