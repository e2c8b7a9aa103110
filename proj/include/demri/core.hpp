#pragma once

// Shared geometric and tissue model: voxel grids with physical spacing,
// tissue label maps, and tissue selectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "demri/errors.hpp"

namespace demri {

// Centre-to-centre slice distance used only when no header supplies one.
inline constexpr double kDefaultSliceSpacingMm = 10.0;

struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = kDefaultSliceSpacingMm;

  bool valid() const noexcept { return x > 0.0 && y > 0.0 && z > 0.0; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct Extents {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t voxels() const noexcept { return nx * ny * nz; }
  std::size_t slice_voxels() const noexcept { return nx * ny; }
  bool valid() const noexcept { return nx >= 1 && ny >= 1 && nz >= 1; }
  friend bool operator==(const Extents&, const Extents&) = default;
};

inline std::string to_string(const Extents& e) {
  return std::to_string(e.nx) + "x" + std::to_string(e.ny) + "x" + std::to_string(e.nz);
}

inline void require_valid(const Spacing& s) {
  if (!s.valid() || !std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z))
    throw GeometryError("spacing components must be finite and strictly positive");
}

// Row-major 2D image: pixel (x, y) lives at y * nx + x, so y is the
// displayed row and x the column.
template <class T>
class Plane {
 public:
  Plane() = default;
  Plane(std::size_t nx, std::size_t ny, T fill = T{}) : nx_(nx), ny_(ny), data_(nx * ny, fill) {
    if (nx == 0 || ny == 0) throw GeometryError("plane extents must be >= 1");
  }
  Plane(std::size_t nx, std::size_t ny, std::vector<T> data)
      : nx_(nx), ny_(ny), data_(std::move(data)) {
    if (nx == 0 || ny == 0) throw GeometryError("plane extents must be >= 1");
    if (data_.size() != nx * ny) throw GeometryError("plane data size does not match extents");
  }

  // Builds from rows as written in source: {{row0...}, {row1...}}.
  static Plane from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t ny = rows.size();
    const std::size_t nx = ny ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(nx * ny);
    for (const auto& row : rows) {
      if (row.size() != nx) throw GeometryError("ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Plane(nx, ny, std::move(data));
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * nx_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return data_[y * nx_ + x]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const Plane& other) const noexcept {
    return nx_ == other.nx_ && ny_ == other.ny_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<T> data_;
};

// Axis-aligned voxel grid with physical spacing in mm. Voxel (x, y, z) is
// stored at x + nx * (y + ny * z); z is the slice index from base to apex.
template <class T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;
  Grid3(Extents extents, Spacing spacing, T fill = T{})
      : extents_(extents), spacing_(spacing), data_(extents.voxels(), fill) {
    validate();
  }
  Grid3(Extents extents, Spacing spacing, std::vector<T> data)
      : extents_(extents), spacing_(spacing), data_(std::move(data)) {
    validate();
    if (data_.size() != extents_.voxels())
      throw GeometryError("grid data size " + std::to_string(data_.size()) +
                          " does not match extents " + to_string(extents_));
  }

  const Extents& extents() const noexcept { return extents_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(Spacing spacing) {
    require_valid(spacing);
    spacing_ = spacing;
  }
  std::size_t nx() const noexcept { return extents_.nx; }
  std::size_t ny() const noexcept { return extents_.ny; }
  std::size_t nz() const noexcept { return extents_.nz; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + extents_.nx * (y + extents_.ny * z);
  }
  std::array<std::size_t, 3> coords(std::size_t i) const noexcept {
    const std::size_t per_slice = extents_.slice_voxels();
    return {i % extents_.nx, (i % per_slice) / extents_.nx, i / per_slice};
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  Plane<T> slice(std::size_t z) const {
    const std::size_t n = extents_.slice_voxels();
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(z * n);
    return Plane<T>(extents_.nx, extents_.ny, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(n)));
  }
  void set_slice(std::size_t z, const Plane<T>& plane) {
    if (plane.nx() != extents_.nx || plane.ny() != extents_.ny)
      throw GeometryError("slice shape does not match grid");
    std::copy(plane.values().begin(), plane.values().end(),
              data_.begin() + static_cast<std::ptrdiff_t>(z * extents_.slice_voxels()));
  }

  bool same_geometry(const auto& other) const noexcept {
    return extents_ == other.extents() && spacing_ == other.spacing();
  }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  void validate() const {
    if (!extents_.valid()) throw GeometryError("grid extents must be >= 1 on every axis");
    require_valid(spacing_);
  }

  Extents extents_;
  Spacing spacing_;
  std::vector<T> data_;
};

enum class Tissue : std::uint8_t {
  background = 0,
  cavity = 1,
  myocardium = 2,
  infarct = 3,
  pmo = 4,
};

inline constexpr int kTissueCount = 5;

inline constexpr bool is_valid_tissue_code(long long code) noexcept {
  return code >= 0 && code < kTissueCount;
}

using Volume3D = Grid3<double>;
using LabelMap = Grid3<Tissue>;
// Binary mask: 0 or 1 per voxel.
using Mask3D = Grid3<std::uint8_t>;

// Non-empty set of tissue codes.
class TissueSelector {
 public:
  constexpr TissueSelector(std::initializer_list<Tissue> tissues) {
    for (Tissue t : tissues) bits_ |= bit(t);
    if (bits_ == 0) throw ArgumentError("tissue selector must not be empty");
  }

  constexpr bool contains(Tissue t) const noexcept { return (bits_ & bit(t)) != 0; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }
  constexpr bool disjoint(TissueSelector other) const noexcept { return (bits_ & other.bits_) == 0; }

  friend constexpr TissueSelector operator|(TissueSelector a, TissueSelector b) noexcept {
    TissueSelector out = a;
    out.bits_ |= b.bits_;
    return out;
  }
  friend constexpr bool operator==(TissueSelector, TissueSelector) = default;

 private:
  static constexpr std::uint8_t bit(Tissue t) noexcept {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
  }
  std::uint8_t bits_ = 0;
};

namespace selectors {
inline constexpr TissueSelector kCavity{Tissue::cavity};
// Myocardium metrics include the scar: the wall encloses infarct and PMO.
inline constexpr TissueSelector kMyocardiumTotal{Tissue::myocardium, Tissue::infarct, Tissue::pmo};
// Infarct metrics include PMO.
inline constexpr TissueSelector kInfarctPlusPmo{Tissue::infarct, Tissue::pmo};
inline constexpr TissueSelector kPmo{Tissue::pmo};
}  // namespace selectors

// Converts raw integer codes to a label map; throws InvalidLabelError on the
// first out-of-range code.
template <class Int>
LabelMap labelmap_from_codes(Extents extents, Spacing spacing, std::span<const Int> codes) {
  std::vector<Tissue> labels(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto code = static_cast<long long>(codes[i]);
    if (!is_valid_tissue_code(code)) throw InvalidLabelError(code, i);
    labels[i] = static_cast<Tissue>(code);
  }
  return LabelMap(extents, spacing, std::move(labels));
}

inline LabelMap labelmap_from_codes(Extents extents, Spacing spacing, std::initializer_list<int> codes) {
  return labelmap_from_codes<int>(extents, spacing, std::span<const int>(codes.begin(), codes.size()));
}

inline Mask3D region_mask(const LabelMap& m, TissueSelector sel) {
  Mask3D out(m.extents(), m.spacing(), std::uint8_t{0});
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sel.contains(src[i]) ? 1 : 0;
  return out;
}

inline std::size_t count_voxels(const LabelMap& m, TissueSelector sel) {
  return static_cast<std::size_t>(
      std::count_if(m.values().begin(), m.values().end(), [sel](Tissue t) { return sel.contains(t); }));
}

inline std::size_t count_set(const Mask3D& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](std::uint8_t v) { return v != 0; }));
}

inline std::array<std::size_t, kTissueCount> tissue_histogram(const LabelMap& m) {
  std::array<std::size_t, kTissueCount> counts{};
  for (Tissue t : m.values()) ++counts[static_cast<std::size_t>(t)];
  return counts;
}

inline double voxel_volume_cm3(const Spacing& spacing) {
  require_valid(spacing);
  return spacing.x * spacing.y * spacing.z / 1000.0;
}

struct TissuePresence {
  bool case_present = false;
  std::vector<bool> per_slice;
};

inline TissuePresence tissue_presence(const LabelMap& m, TissueSelector sel) {
  TissuePresence out;
  out.per_slice.assign(m.nz(), false);
  const std::size_t per_slice = m.extents().slice_voxels();
  auto labels = m.values();
  for (std::size_t z = 0; z < m.nz(); ++z) {
    auto first = labels.begin() + static_cast<std::ptrdiff_t>(z * per_slice);
    out.per_slice[z] = std::any_of(first, first + static_cast<std::ptrdiff_t>(per_slice),
                                   [sel](Tissue t) { return sel.contains(t); });
  }
  out.case_present = std::find(out.per_slice.begin(), out.per_slice.end(), true) != out.per_slice.end();
  return out;
}

inline void require_same_extents(const Extents& a, const Extents& b, const char* what) {
  if (!(a == b))
    throw GeometryError(std::string(what) + ": extent mismatch " + to_string(a) + " vs " + to_string(b));
}

}  // namespace demri
