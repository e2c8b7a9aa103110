#pragma once

// Mix-up augmentation, the foreground-affine mix-up variant for short-axis
// slices, and lossless quarter-turn rotation / flip.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>

#include "demri/core.hpp"
#include "demri/errors.hpp"
#include "demri/neuralref.hpp"

namespace demri::augment {

using neural::ProbabilityMap;
using Image = Plane<double>;
using BinaryMask = Plane<std::uint8_t>;
using Matrix3 = std::array<std::array<double, 3>, 3>;

inline constexpr double kDefaultBetaAlpha = 0.2;

// lambda ~ Beta(alpha, alpha).
template <class Rng>
double sample_lambda(Rng& rng, double alpha = kDefaultBetaAlpha) {
  if (!(alpha > 0.0)) throw ArgumentError("sample_lambda: alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double a = gamma(rng);
  const double b = gamma(rng);
  if (a + b == 0.0) return 0.5;
  return a / (a + b);
}

struct MixedSample {
  Image x;
  ProbabilityMap y;
};

namespace detail {

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("mix-up: lambda must lie in [0, 1]");
}

inline void check_pair(const Image& xi, const Image& xj, const ProbabilityMap& yi, const ProbabilityMap& yj) {
  if (!xi.same_shape(xj)) throw ArgumentError("mix-up: image shapes differ");
  if (!yi.same_shape(yj)) throw ArgumentError("mix-up: label shapes differ");
  if (yi.pixels() != xi.size()) throw ArgumentError("mix-up: label pixel count != image pixel count");
}

}  // namespace detail

// x = lambda xi + (1 - lambda) xj, y likewise.
inline MixedSample mixup(const Image& xi, const Image& xj, const ProbabilityMap& yi, const ProbabilityMap& yj,
                         double lambda) {
  detail::check_lambda(lambda);
  detail::check_pair(xi, xj, yi, yj);
  Image x(xi.nx(), xi.ny(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    x.values()[k] = lambda * xi.values()[k] + (1.0 - lambda) * xj.values()[k];
  ProbabilityMap y(yi.classes(), yi.pixels(), 0.0);
  for (std::size_t k = 0; k < y.values().size(); ++k)
    y.values()[k] = lambda * yi.values()[k] + (1.0 - lambda) * yj.values()[k];
  return {std::move(x), std::move(y)};
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Geometry of the foreground-affine mix-up. The matrix maps slice-j pixel
// coordinates onto slice i: it scales about the origin by s = li / lj and
// then translates so that centroid j lands on centroid i.
struct AffineMixupParams {
  Point2 centroid_i;
  Point2 centroid_j;
  double spread_i = 0.0;  // mean foreground pixel distance to the centroid
  double spread_j = 0.0;
  double scale = 1.0;
  Matrix3 transform{};
};

inline Matrix3 foreground_transform(Point2 ci, Point2 cj, double scale) {
  return {{{scale, 0.0, ci.x - scale * cj.x}, {0.0, scale, ci.y - scale * cj.y}, {0.0, 0.0, 1.0}}};
}

struct ForegroundStats {
  Point2 centroid;
  double spread = 0.0;
  std::size_t pixels = 0;
};

inline ForegroundStats foreground_stats(const BinaryMask& mask) {
  ForegroundStats s;
  for (std::size_t y = 0; y < mask.ny(); ++y)
    for (std::size_t x = 0; x < mask.nx(); ++x)
      if (mask(x, y)) {
        s.centroid.x += static_cast<double>(x);
        s.centroid.y += static_cast<double>(y);
        ++s.pixels;
      }
  if (s.pixels == 0) throw DegenerateForegroundError("foreground mask is empty");
  s.centroid.x /= static_cast<double>(s.pixels);
  s.centroid.y /= static_cast<double>(s.pixels);
  for (std::size_t y = 0; y < mask.ny(); ++y)
    for (std::size_t x = 0; x < mask.nx(); ++x)
      if (mask(x, y)) s.spread += std::hypot(static_cast<double>(x) - s.centroid.x, static_cast<double>(y) - s.centroid.y);
  s.spread /= static_cast<double>(s.pixels);
  return s;
}

inline AffineMixupParams foreground_affine(const BinaryMask& mask_i, const BinaryMask& mask_j) {
  const ForegroundStats si = foreground_stats(mask_i);
  const ForegroundStats sj = foreground_stats(mask_j);
  AffineMixupParams p;
  p.centroid_i = si.centroid;
  p.centroid_j = sj.centroid;
  p.spread_i = si.spread;
  p.spread_j = sj.spread;
  if (si.spread == 0.0 && sj.spread == 0.0) {
    p.scale = 1.0;  // two single-pixel foregrounds: pure translation
  } else if (sj.spread == 0.0 || si.spread == 0.0) {
    throw DegenerateForegroundError("foreground spread is zero in only one slice; scale undefined");
  } else {
    p.scale = si.spread / sj.spread;
  }
  p.transform = foreground_transform(p.centroid_i, p.centroid_j, p.scale);
  return p;
}

// Foreground for the affine fit: left-ventricular cavity plus myocardium.
inline BinaryMask foreground_mask(const Plane<Tissue>& labels) {
  BinaryMask out(labels.nx(), labels.ny(), std::uint8_t{0});
  const TissueSelector fg = selectors::kCavity | selectors::kMyocardiumTotal;
  for (std::size_t k = 0; k < labels.size(); ++k) out.values()[k] = fg.contains(labels.values()[k]) ? 1 : 0;
  return out;
}

namespace detail {

// Inverse of [[s,0,tx],[0,s,ty],[0,0,1]] applied to an output position.
inline Point2 inverse_map(const Matrix3& t, double x, double y) {
  const double s = t[0][0];
  return {(x - t[0][2]) / s, (y - t[1][2]) / s};
}

// Bilinear with zero outside the grid.
inline double sample_zero_padded(const Image& img, double fx, double fy) {
  const double x0 = std::floor(fx), y0 = std::floor(fy);
  const double tx = fx - x0, ty = fy - y0;
  auto at = [&](double x, double y) -> double {
    if (x < 0.0 || y < 0.0 || x >= static_cast<double>(img.nx()) || y >= static_cast<double>(img.ny())) return 0.0;
    return img(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  };
  double v = 0.0;
  if (tx != 1.0 && ty != 1.0) v += (1.0 - tx) * (1.0 - ty) * at(x0, y0);
  if (tx != 0.0) v += tx * (1.0 - ty) * at(x0 + 1.0, y0);
  if (ty != 0.0) v += (1.0 - tx) * ty * at(x0, y0 + 1.0);
  if (tx != 0.0 && ty != 0.0) v += tx * ty * at(x0 + 1.0, y0 + 1.0);
  return v;
}

}  // namespace detail

// Resamples an image through T (bilinear, zero outside).
inline Image warp_image(const Image& img, const Matrix3& t) {
  Image out(img.nx(), img.ny(), 0.0);
  for (std::size_t y = 0; y < img.ny(); ++y)
    for (std::size_t x = 0; x < img.nx(); ++x) {
      const Point2 src = detail::inverse_map(t, static_cast<double>(x), static_cast<double>(y));
      out(x, y) = detail::sample_zero_padded(img, src.x, src.y);
    }
  return out;
}

// Resamples per-pixel class distributions through T (nearest neighbour);
// pixels mapped from outside the grid become class 0.
inline ProbabilityMap warp_labels(const ProbabilityMap& y, std::size_t nx, std::size_t ny, const Matrix3& t) {
  if (y.pixels() != nx * ny) throw ArgumentError("warp_labels: pixel count != nx * ny");
  ProbabilityMap out(y.classes(), y.pixels(), 0.0);
  for (std::size_t py = 0; py < ny; ++py)
    for (std::size_t px = 0; px < nx; ++px) {
      const Point2 src = detail::inverse_map(t, static_cast<double>(px), static_cast<double>(py));
      const double sx = std::round(src.x), sy = std::round(src.y);
      const std::size_t dst = py * nx + px;
      if (sx < 0.0 || sy < 0.0 || sx >= static_cast<double>(nx) || sy >= static_cast<double>(ny)) {
        out(0, dst) = 1.0;
        continue;
      }
      const std::size_t from = static_cast<std::size_t>(sy) * nx + static_cast<std::size_t>(sx);
      for (std::size_t l = 0; l < y.classes(); ++l) out(l, dst) = y(l, from);
    }
  return out;
}

// x = lambda xi + (1 - lambda) T xj, with the same blend for the labels.
inline MixedSample affine_mixup(const Image& xi, const Image& xj, const ProbabilityMap& yi,
                                const ProbabilityMap& yj, const BinaryMask& mask_i, const BinaryMask& mask_j,
                                double lambda) {
  detail::check_lambda(lambda);
  detail::check_pair(xi, xj, yi, yj);
  if (!mask_i.same_shape(mask_j) || mask_i.nx() != xi.nx() || mask_i.ny() != xi.ny())
    throw ArgumentError("affine_mixup: mask shape differs from image shape");
  const AffineMixupParams params = foreground_affine(mask_i, mask_j);
  const Image warped_x = warp_image(xj, params.transform);
  const ProbabilityMap warped_y = warp_labels(yj, xj.nx(), xj.ny(), params.transform);
  return mixup(xi, warped_x, yi, warped_y, lambda);
}

// ---------------------------------------------------------------------------
// Rotation and flips

enum class FlipAxis { x, y };

// One clockwise quarter turn as displayed (rows = y): [[1,2],[3,4]] becomes
// [[3,1],[4,2]].
template <class T>
Plane<T> rotate_quarter(const Plane<T>& p) {
  const std::size_t h = p.ny();
  Plane<T> out(p.ny(), p.nx());  // width becomes old height
  for (std::size_t y = 0; y < out.ny(); ++y)
    for (std::size_t x = 0; x < out.nx(); ++x) out(x, y) = p(y, h - 1 - x);
  return out;
}

template <class T>
Plane<T> flip(const Plane<T>& p, FlipAxis axis) {
  Plane<T> out(p.nx(), p.ny());
  for (std::size_t y = 0; y < p.ny(); ++y)
    for (std::size_t x = 0; x < p.nx(); ++x)
      out(x, y) = axis == FlipAxis::x ? p(p.nx() - 1 - x, y) : p(x, p.ny() - 1 - y);
  return out;
}

template <class T>
Plane<T> rotate_flip(const Plane<T>& p, int quarter_turns, std::optional<FlipAxis> axis = std::nullopt) {
  if (quarter_turns < 0 || quarter_turns > 3) throw ArgumentError("rotate_flip: k must be in {0,1,2,3}");
  Plane<T> out = p;
  for (int k = 0; k < quarter_turns; ++k) out = rotate_quarter(out);
  if (axis) out = flip(out, *axis);
  return out;
}

// Applies the same in-plane rotation/flip to every slice. Odd quarter turns
// swap the in-plane extents and spacings.
template <class T>
Grid3<T> rotate_flip(const Grid3<T>& g, int quarter_turns, std::optional<FlipAxis> axis = std::nullopt) {
  if (quarter_turns < 0 || quarter_turns > 3) throw ArgumentError("rotate_flip: k must be in {0,1,2,3}");
  const bool swap = quarter_turns % 2 == 1;
  Spacing s = g.spacing();
  if (swap) std::swap(s.x, s.y);
  const Extents e = swap ? Extents{g.ny(), g.nx(), g.nz()} : g.extents();
  Grid3<T> out(e, s);
  for (std::size_t z = 0; z < g.nz(); ++z) out.set_slice(z, rotate_flip(g.slice(z), quarter_turns, axis));
  return out;
}

}  // namespace demri::augment
