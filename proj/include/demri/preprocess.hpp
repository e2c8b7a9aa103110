#pragma once

// Image preprocessing: per-slice Z-score normalisation, centre crop/pad,
// in-plane bilinear resampling, and epicardium-centroid slice alignment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::preprocess {

inline constexpr double kDegenerateSigma = 1e-12;

struct ZScoreResult {
  Volume3D volume;
  std::vector<std::size_t> degenerate_slices;  // constant slices, zeroed
};

// z = (x - mean) / sigma per slice, population sigma.
inline ZScoreResult zscore_slice(const Volume3D& v) {
  ZScoreResult out{v, {}};
  const std::size_t n = v.extents().slice_voxels();
  auto dst = out.volume.values();
  for (std::size_t z = 0; z < v.nz(); ++z) {
    auto slice = dst.subspan(z * n, n);
    double mean = 0.0;
    for (double x : slice) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : slice) ss += (x - mean) * (x - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    if (!(sigma > kDegenerateSigma)) {
      std::fill(slice.begin(), slice.end(), 0.0);
      out.degenerate_slices.push_back(z);
      warn("zscore: slice " + std::to_string(z) + " is constant; output set to zero");
      continue;
    }
    for (double& x : slice) x = (x - mean) / sigma;
  }
  return out;
}

namespace detail {

// Source index offset for a centred window: crop keeps floor(excess/2) on the
// low side, padding adds floor(deficit/2) on the low side.
inline long centred_offset(std::size_t old_extent, std::size_t new_extent) {
  if (new_extent <= old_extent) return static_cast<long>((old_extent - new_extent) / 2);
  return -static_cast<long>((new_extent - old_extent) / 2);
}

}  // namespace detail

// target_h counts rows (y), target_w columns (x). Grids smaller than the
// target are zero-padded symmetrically.
template <class T>
Grid3<T> center_crop(const Grid3<T>& v, long target_h, long target_w, T fill = T{}) {
  if (target_h <= 0 || target_w <= 0) throw ArgumentError("center_crop: target size must be positive");
  const auto nx = static_cast<std::size_t>(target_w);
  const auto ny = static_cast<std::size_t>(target_h);
  const long ox = detail::centred_offset(v.nx(), nx);
  const long oy = detail::centred_offset(v.ny(), ny);
  Grid3<T> out({nx, ny, v.nz()}, v.spacing(), fill);
  for (std::size_t z = 0; z < v.nz(); ++z)
    for (std::size_t y = 0; y < ny; ++y) {
      const long sy = static_cast<long>(y) + oy;
      if (sy < 0 || sy >= static_cast<long>(v.ny())) continue;
      for (std::size_t x = 0; x < nx; ++x) {
        const long sx = static_cast<long>(x) + ox;
        if (sx < 0 || sx >= static_cast<long>(v.nx())) continue;
        out(x, y, z) = v(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), z);
      }
    }
  return out;
}

// Bilinear sample of a plane at continuous pixel coordinates, clamped to the
// edge. Pixel (i, j) has its centre at coordinate (i, j).
inline double sample_bilinear(const Plane<double>& p, double fx, double fy) {
  fx = std::clamp(fx, 0.0, static_cast<double>(p.nx() - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(p.ny() - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(fx));
  const auto y0 = static_cast<std::size_t>(std::floor(fy));
  const std::size_t x1 = std::min(x0 + 1, p.nx() - 1);
  const std::size_t y1 = std::min(y0 + 1, p.ny() - 1);
  const double tx = fx - static_cast<double>(x0);
  const double ty = fy - static_cast<double>(y0);
  const double top = (1.0 - tx) * p(x0, y0) + tx * p(x1, y0);
  const double bottom = (1.0 - tx) * p(x0, y1) + tx * p(x1, y1);
  return (1.0 - ty) * top + ty * bottom;
}

// New extent = round(old * old_spacing / new_spacing). Output pixel centres
// sit at physical (i + 0.5) * new_spacing, the same half-pixel convention as
// common image resizers, with edge clamping.
inline Volume3D resample_inplane(const Volume3D& v, double new_sx, double new_sy) {
  if (!(new_sx > 0.0) || !(new_sy > 0.0) || !std::isfinite(new_sx) || !std::isfinite(new_sy))
    throw ArgumentError("resample_inplane: target spacing must be positive");
  const Spacing& s = v.spacing();
  const auto nx = static_cast<std::size_t>(
      std::max(1.0, std::round(static_cast<double>(v.nx()) * s.x / new_sx)));
  const auto ny = static_cast<std::size_t>(
      std::max(1.0, std::round(static_cast<double>(v.ny()) * s.y / new_sy)));
  Volume3D out({nx, ny, v.nz()}, {new_sx, new_sy, s.z}, 0.0);
  for (std::size_t z = 0; z < v.nz(); ++z) {
    const Plane<double> src = v.slice(z);
    for (std::size_t y = 0; y < ny; ++y) {
      const double fy = (static_cast<double>(y) + 0.5) * new_sy / s.y - 0.5;
      for (std::size_t x = 0; x < nx; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) * new_sx / s.x - 0.5;
        out(x, y, z) = sample_bilinear(src, fx, fy);
      }
    }
  }
  return out;
}

struct Shift2D {
  long dx = 0;
  long dy = 0;
  friend bool operator==(const Shift2D&, const Shift2D&) = default;
};

// Centroid (x, y) of the MYOCARDIUM_TOTAL voxels of slice z.
inline std::optional<std::array<double, 2>> myocardium_centroid(const LabelMap& m, std::size_t z) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < m.ny(); ++y)
    for (std::size_t x = 0; x < m.nx(); ++x)
      if (selectors::kMyocardiumTotal.contains(m(x, y, z))) {
        sx += static_cast<double>(x);
        sy += static_cast<double>(y);
        ++n;
      }
  if (n == 0) return std::nullopt;
  return std::array<double, 2>{sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

// Integer shift per slice that moves its myocardium centroid onto the mean of
// the slice centroids. Slices without myocardium get a zero shift.
inline std::vector<Shift2D> alignment_shifts(const LabelMap& m) {
  std::vector<std::optional<std::array<double, 2>>> centroids(m.nz());
  double rx = 0.0, ry = 0.0;
  std::size_t counted = 0;
  for (std::size_t z = 0; z < m.nz(); ++z) {
    centroids[z] = myocardium_centroid(m, z);
    if (centroids[z]) {
      rx += (*centroids[z])[0];
      ry += (*centroids[z])[1];
      ++counted;
    }
  }
  std::vector<Shift2D> shifts(m.nz());
  if (counted == 0) return shifts;
  rx /= static_cast<double>(counted);
  ry /= static_cast<double>(counted);
  for (std::size_t z = 0; z < m.nz(); ++z) {
    if (!centroids[z]) continue;
    shifts[z] = {std::lround(rx - (*centroids[z])[0]), std::lround(ry - (*centroids[z])[1])};
  }
  return shifts;
}

template <class T>
Grid3<T> translate_slices(const Grid3<T>& g, const std::vector<Shift2D>& shifts, T fill = T{}) {
  Grid3<T> out(g.extents(), g.spacing(), fill);
  const auto nx = static_cast<long>(g.nx());
  const auto ny = static_cast<long>(g.ny());
  for (std::size_t z = 0; z < g.nz(); ++z) {
    const Shift2D s = shifts.at(z);
    for (long y = 0; y < ny; ++y) {
      const long ty = y + s.dy;
      if (ty < 0 || ty >= ny) continue;
      for (long x = 0; x < nx; ++x) {
        const long tx = x + s.dx;
        if (tx < 0 || tx >= nx) continue;
        out(static_cast<std::size_t>(tx), static_cast<std::size_t>(ty), z) =
            g(static_cast<std::size_t>(x), static_cast<std::size_t>(y), z);
      }
    }
  }
  return out;
}

struct AlignedStack {
  Volume3D volume;
  LabelMap labels;
  std::vector<Shift2D> shifts;
};

inline AlignedStack align_slices(const Volume3D& v, const LabelMap& m) {
  require_same_extents(v.extents(), m.extents(), "align_slices");
  auto shifts = alignment_shifts(m);
  return {translate_slices(v, shifts, 0.0), translate_slices(m, shifts, Tissue::background),
          std::move(shifts)};
}

}  // namespace demri::preprocess
