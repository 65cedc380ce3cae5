#pragma once

// Structured grid of square four-node plane-stress elements.
//
// Numbering follows the usual educational topology-optimization layout:
// nodes and elements are column-major with the row index counted from the
// top edge, so node (ix, iy) has id ix*(nely+1) + iy and element (ex, ey)
// has id ex*nely + ey. Each node owns two DOFs, 2*id (x) and 2*id+1 (y),
// with y pointing up physically.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace topo {

struct GridMesh {
  int nelx = 0;
  int nely = 0;
  double h = 1.0;
  double thickness = 1.0;

  GridMesh() = default;
  GridMesh(int nelx_, int nely_, double h_ = 1.0, double thickness_ = 1.0)
      : nelx(nelx_), nely(nely_), h(h_), thickness(thickness_) {
    if (nelx < 1 || nely < 1)
      throw std::invalid_argument("GridMesh: element counts must be >= 1");
    if (!(h > 0.0))
      throw std::invalid_argument("GridMesh: element size must be positive");
    if (!(thickness > 0.0))
      throw std::invalid_argument("GridMesh: thickness must be positive");
  }

  int num_elements() const { return nelx * nely; }
  int num_nodes() const { return (nelx + 1) * (nely + 1); }
  int num_dofs() const { return 2 * num_nodes(); }

  int node_id(int ix, int iy) const { return ix * (nely + 1) + iy; }
  int element_id(int ex, int ey) const { return ex * nely + ey; }
  int element_col(int e) const { return e / nely; }
  int element_row(int e) const { return e % nely; }

  /// Element center; y is the row coordinate measured from the top edge.
  std::array<double, 2> element_center(int e) const {
    return {(element_col(e) + 0.5) * h, (element_row(e) + 0.5) * h};
  }

  void check_element(int e) const {
    if (e < 0 || e >= num_elements())
      throw std::out_of_range("element index " + std::to_string(e) + " outside [0, " +
                              std::to_string(num_elements()) + ")");
  }
};

struct SupportSet {
  std::vector<int> fixed;  // sorted, unique
};

struct LoadSet {
  std::map<int, double> forces;  // DOF -> force
};

struct PassiveSet {
  std::vector<int> solid;
  std::vector<int> void_;
};

/// Global DOFs of element e, corners counter-clockwise from bottom-left:
/// (BL.x, BL.y, BR.x, BR.y, TR.x, TR.y, TL.x, TL.y).
inline std::array<int, 8> element_dof_map(const GridMesh& mesh, int e) {
  mesh.check_element(e);
  const int ex = mesh.element_col(e);
  const int ey = mesh.element_row(e);
  const int tl = mesh.node_id(ex, ey);
  const int bl = tl + 1;
  const int tr = mesh.node_id(ex + 1, ey);
  const int br = tr + 1;
  return {2 * bl, 2 * bl + 1, 2 * br, 2 * br + 1, 2 * tr, 2 * tr + 1, 2 * tl, 2 * tl + 1};
}

struct Neighbor {
  int element;
  double distance;
};

/// All elements whose center lies strictly closer than rmin to the center of e,
/// including e itself. Ordered by element index.
inline std::vector<Neighbor> neighbor_elements(const GridMesh& mesh, int e, double rmin) {
  mesh.check_element(e);
  if (!(rmin > 0.0)) throw std::invalid_argument("neighbor_elements: rmin must be positive");
  const int ex = mesh.element_col(e);
  const int ey = mesh.element_row(e);
  const int reach = static_cast<int>(std::ceil(rmin / mesh.h));
  std::vector<Neighbor> out;
  for (int ix = std::max(ex - reach, 0); ix <= std::min(ex + reach, mesh.nelx - 1); ++ix) {
    for (int iy = std::max(ey - reach, 0); iy <= std::min(ey + reach, mesh.nely - 1); ++iy) {
      const double d = mesh.h * std::hypot(double(ix - ex), double(iy - ey));
      if (d < rmin) out.push_back({mesh.element_id(ix, iy), d});
    }
  }
  return out;
}

inline SupportSet make_supports(const GridMesh& mesh, std::vector<int> dofs) {
  std::sort(dofs.begin(), dofs.end());
  dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
  for (int d : dofs)
    if (d < 0 || d >= mesh.num_dofs())
      throw std::out_of_range("support DOF " + std::to_string(d) + " out of range");
  return SupportSet{std::move(dofs)};
}

/// Checks index ranges and the cross-set constraints between supports, loads
/// and passive elements.
inline void validate(const GridMesh& mesh, const SupportSet& supports, const LoadSet& loads,
                     const PassiveSet& passive) {
  const std::set<int> fixed(supports.fixed.begin(), supports.fixed.end());
  if (fixed.size() != supports.fixed.size())
    throw std::invalid_argument("support set contains duplicate DOFs");
  for (int d : fixed)
    if (d < 0 || d >= mesh.num_dofs())
      throw std::out_of_range("support DOF " + std::to_string(d) + " out of range");
  for (const auto& [d, f] : loads.forces) {
    if (d < 0 || d >= mesh.num_dofs())
      throw std::out_of_range("load DOF " + std::to_string(d) + " out of range");
    if (fixed.count(d))
      throw std::invalid_argument("load applied to fixed DOF " + std::to_string(d));
    if (!std::isfinite(f)) throw std::invalid_argument("non-finite load");
  }
  std::set<int> solid;
  for (int e : passive.solid) {
    mesh.check_element(e);
    solid.insert(e);
  }
  for (int e : passive.void_) {
    mesh.check_element(e);
    if (solid.count(e))
      throw std::invalid_argument("element " + std::to_string(e) + " is both passive solid and void");
  }
}

}  // namespace topo
