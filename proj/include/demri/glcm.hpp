#pragma once

// Grey-level co-occurrence texture features of the myocardium.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::clinical {

// In-plane displacement in (row, column) = (y, x).
struct GlcmOffset {
  int drow = 0;
  int dcol = 0;
};

// 0°, 45°, 90°, 135° at distance 1.
inline constexpr std::array<GlcmOffset, 4> kDefaultOffsets = {
    GlcmOffset{0, 1}, GlcmOffset{-1, 1}, GlcmOffset{-1, 0}, GlcmOffset{-1, -1}};

inline constexpr std::array<const char*, 4> kGlcmFeatureNames = {"contrast", "homogeneity", "energy",
                                                                 "correlation"};

// levels × levels, row-major, entries sum to 1 (all zero when the region
// has no pair at this offset).
struct Glcm {
  std::size_t levels = 0;
  std::vector<double> p;

  double operator()(std::size_t i, std::size_t j) const { return p[i * levels + j]; }
};

struct GlcmFeatures {
  double contrast = 0.0;
  double homogeneity = 0.0;
  double energy = 0.0;  // angular second moment, sum of squared entries
  double correlation = 0.0;
};

// Equal-width bins over the region's min-max; a constant region maps to bin 0.
inline Grid3<int> quantize_region(const Volume3D& v, const LabelMap& m, TissueSelector region, std::size_t levels) {
  require_same_extents(v.extents(), m.extents(), "quantize_region");
  if (levels < 2) throw ArgumentError("glcm: levels must be >= 2");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!region.contains(m[i])) continue;
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
    ++n;
  }
  if (n == 0) throw ArgumentError("glcm: region is empty");
  Grid3<int> q(v.extents(), v.spacing(), -1);
  const double width = (hi - lo) / static_cast<double>(levels);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!region.contains(m[i])) continue;
    int bin = 0;
    if (width > 0.0) bin = static_cast<int>(std::floor((v[i] - lo) / width));
    q[i] = std::clamp(bin, 0, static_cast<int>(levels) - 1);
  }
  return q;
}

// Symmetric normalized co-occurrence of quantized levels; -1 marks voxels
// outside the region. Pairs stay within a slice.
inline Glcm cooccurrence(const Grid3<int>& q, std::size_t levels, GlcmOffset off) {
  Glcm g{levels, std::vector<double>(levels * levels, 0.0)};
  double total = 0.0;
  const auto nx = static_cast<long long>(q.nx());
  const auto ny = static_cast<long long>(q.ny());
  for (std::size_t z = 0; z < q.nz(); ++z)
    for (long long y = 0; y < ny; ++y)
      for (long long x = 0; x < nx; ++x) {
        const long long y2 = y + off.drow;
        const long long x2 = x + off.dcol;
        if (y2 < 0 || y2 >= ny || x2 < 0 || x2 >= nx) continue;
        const int a = q(static_cast<std::size_t>(x), static_cast<std::size_t>(y), z);
        const int b = q(static_cast<std::size_t>(x2), static_cast<std::size_t>(y2), z);
        if (a < 0 || b < 0) continue;
        g.p[static_cast<std::size_t>(a) * levels + static_cast<std::size_t>(b)] += 1.0;
        g.p[static_cast<std::size_t>(b) * levels + static_cast<std::size_t>(a)] += 1.0;
        total += 2.0;
      }
  if (total > 0.0)
    for (double& e : g.p) e /= total;
  return g;
}

inline GlcmFeatures glcm_statistics(const Glcm& g) {
  GlcmFeatures f;
  const std::size_t L = g.levels;
  double mu_i = 0.0, mu_j = 0.0;
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j) {
      const double p = g(i, j);
      const double d = static_cast<double>(i) - static_cast<double>(j);
      f.contrast += p * d * d;
      f.homogeneity += p / (1.0 + d * d);
      f.energy += p * p;
      mu_i += p * static_cast<double>(i);
      mu_j += p * static_cast<double>(j);
    }
  double var_i = 0.0, var_j = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j) {
      const double p = g(i, j);
      const double di = static_cast<double>(i) - mu_i;
      const double dj = static_cast<double>(j) - mu_j;
      var_i += p * di * di;
      var_j += p * dj * dj;
      cov += p * di * dj;
    }
  // Single-level texture is perfectly correlated by convention.
  f.correlation = (var_i > 1e-15 && var_j > 1e-15) ? cov / std::sqrt(var_i * var_j) : 1.0;
  return f;
}

// Four statistics per offset, concatenated in offset order:
// contrast, homogeneity, energy, correlation.
inline std::vector<double> glcm_features(const Volume3D& v, const LabelMap& m, std::size_t levels = 8,
                                         std::span<const GlcmOffset> offsets = kDefaultOffsets) {
  const auto q = quantize_region(v, m, selectors::kMyocardiumTotal, levels);
  std::vector<double> out;
  out.reserve(offsets.size() * 4);
  for (const auto& off : offsets) {
    const auto g = cooccurrence(q, levels, off);
    bool any = false;
    for (double e : g.p) any = any || e > 0.0;
    if (!any) warn("glcm_features: no voxel pair at offset (" + std::to_string(off.drow) + "," +
                   std::to_string(off.dcol) + ")");
    const auto f = glcm_statistics(g);
    out.insert(out.end(), {f.contrast, f.homogeneity, f.energy, f.correlation});
  }
  return out;
}

}  // namespace demri::clinical
