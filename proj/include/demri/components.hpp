#pragma once

// 3D connected-component labelling and neighbourhood helpers.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "demri/core.hpp"

namespace demri {

enum class Connectivity { face6 = 6, full26 = 26 };

struct Components {
  static constexpr std::int32_t kNone = -1;
  std::vector<std::int32_t> label;                // per voxel; kNone outside the set
  std::vector<std::vector<std::size_t>> members;  // voxel indices per component, ascending

  std::size_t count() const noexcept { return members.size(); }
};

// Calls fn(neighbour_index) for each in-grid neighbour of voxel i.
template <class Fn>
void for_each_neighbor(const Extents& e, std::size_t i, Connectivity c, Fn&& fn) {
  const std::size_t per_slice = e.slice_voxels();
  const auto x = static_cast<long>(i % e.nx);
  const auto y = static_cast<long>((i % per_slice) / e.nx);
  const auto z = static_cast<long>(i / per_slice);
  const auto nx = static_cast<long>(e.nx), ny = static_cast<long>(e.ny), nz = static_cast<long>(e.nz);
  for (long dz = -1; dz <= 1; ++dz)
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        const int manhattan = (dx != 0) + (dy != 0) + (dz != 0);
        if (manhattan == 0) continue;
        if (c == Connectivity::face6 && manhattan != 1) continue;
        const long qx = x + dx, qy = y + dy, qz = z + dz;
        if (qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz) continue;
        fn(static_cast<std::size_t>(qx + nx * (qy + ny * qz)));
      }
}

// Number of face neighbours (of the 6) that exist inside the grid.
inline int face_neighbors_in_grid(const Extents& e, std::size_t i) {
  int n = 0;
  for_each_neighbor(e, i, Connectivity::face6, [&](std::size_t) { ++n; });
  return n;
}

// Components of the voxel set {i : in_set(i)}. Components are numbered in
// order of their lowest voxel index, so labelling is deterministic.
template <class Pred>
Components connected_components(const Extents& e, Pred&& in_set, Connectivity c) {
  Components out;
  out.label.assign(e.voxels(), Components::kNone);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < e.voxels(); ++seed) {
    if (out.label[seed] != Components::kNone || !in_set(seed)) continue;
    const auto id = static_cast<std::int32_t>(out.members.size());
    out.members.emplace_back();
    auto& members = out.members.back();
    out.label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      members.push_back(i);
      for_each_neighbor(e, i, c, [&](std::size_t j) {
        if (out.label[j] == Components::kNone && in_set(j)) {
          out.label[j] = id;
          stack.push_back(j);
        }
      });
    }
    std::sort(members.begin(), members.end());
  }
  return out;
}

inline Components label_components(const LabelMap& m, TissueSelector sel, Connectivity c) {
  auto labels = m.values();
  return connected_components(m.extents(), [&](std::size_t i) { return sel.contains(labels[i]); }, c);
}

// True when any voxel of the component has a face neighbour whose tissue is
// in `sel`.
inline bool component_touches(const LabelMap& m, const std::vector<std::size_t>& members, TissueSelector sel) {
  auto labels = m.values();
  for (std::size_t i : members) {
    bool hit = false;
    for_each_neighbor(m.extents(), i, Connectivity::face6, [&](std::size_t j) {
      if (sel.contains(labels[j])) hit = true;
    });
    if (hit) return true;
  }
  return false;
}

}  // namespace demri
