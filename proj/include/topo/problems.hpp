#pragma once

// Benchmark problem definitions.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/fea.hpp"
#include "topo/mesh.hpp"

namespace topo {

enum class Objective { Compliance, InverseBucklingKS, Volume };
enum class ConstraintKind { Volume, Buckling, Compliance };

/// Volume: mean physical density <= bound. Buckling: K-S aggregated load
/// factor >= bound. Compliance: compliance <= bound.
struct Constraint {
  ConstraintKind kind;
  double bound;
};

struct ProblemSpec {
  std::string name;
  GridMesh mesh;
  SupportSet supports;
  LoadSet loads;
  PassiveSet passive;
  Material material;
  double rmin = 1.5;  // physical length
  Objective objective = Objective::Compliance;
  std::vector<Constraint> constraints;
  int modes = 0;
  double ks_rho = 0.0;
  double initial_density = 0.5;

  bool needs_buckling() const {
    if (objective == Objective::InverseBucklingKS) return true;
    return std::any_of(constraints.begin(), constraints.end(),
                       [](const Constraint& c) { return c.kind == ConstraintKind::Buckling; });
  }
};

enum class ColumnVariant { MaxBuckling, MinVolume };

namespace detail {

// Spreads `total` (signed, along `component`) over the horizontal edges of
// elements [first, first+count) lying on node row `node_row`, element-consistently.
inline void add_row_edge_load(LoadSet& loads, const GridMesh& mesh, int node_row, int first, int count, double total,
                              int component) {
  const double per_node = total / count / 2.0;
  for (int ex = first; ex < first + count; ++ex) {
    loads.forces[2 * mesh.node_id(ex, node_row) + component] += per_node;
    loads.forces[2 * mesh.node_id(ex + 1, node_row) + component] += per_node;
  }
}

}  // namespace detail

/// Throws if the problem is malformed: index ranges, loads, constraint bounds,
/// and a solid-design solve to confirm rigid-body modes are restrained.
inline void validate(const ProblemSpec& p) {
  validate(p.mesh, p.supports, p.loads, p.passive);
  if (p.loads.forces.empty() ||
      std::all_of(p.loads.forces.begin(), p.loads.forces.end(), [](const auto& kv) { return kv.second == 0.0; }))
    throw std::invalid_argument(p.name + ": no nonzero load");
  if (!(p.material.e0 > p.material.emin && p.material.emin > 0.0))
    throw std::invalid_argument(p.name + ": need E0 > Emin > 0");
  if (!(p.material.penal >= 1.0)) throw std::invalid_argument(p.name + ": penalization must be >= 1");
  if (!(p.rmin > 0.0)) throw std::invalid_argument(p.name + ": rmin must be positive");
  for (const auto& c : p.constraints)
    if (!(c.bound > 0.0)) throw std::invalid_argument(p.name + ": constraint bounds must be positive");
  if (p.needs_buckling() && (p.modes < 1 || !(p.ks_rho > 0.0)))
    throw std::invalid_argument(p.name + ": buckling needs modes >= 1 and ks_rho > 0");
  if (!(p.initial_density > 0.0 && p.initial_density <= 1.0))
    throw std::invalid_argument(p.name + ": initial density must be in (0, 1]");
  const Vector solid = Vector::Constant(p.mesh.num_elements(), p.material.e0);
  (void)assemble_and_solve(p.mesh, solid, p.loads, p.supports, p.material.nu);
}

/// Compliance of the fully solid design.
inline double solid_compliance(const ProblemSpec& p) {
  const Vector solid = Vector::Constant(p.mesh.num_elements(), p.material.e0);
  const Vector u = assemble_and_solve(p.mesh, solid, p.loads, p.supports, p.material.nu);
  const FeModel model(p.mesh, p.supports, p.material.nu);
  return model.load_vector(p.loads).dot(u);
}

/// Half MBB beam: symmetry on the left edge, roller at the bottom-right
/// corner, unit downward load at the top-left corner.
inline ProblemSpec mbb(int nelx, int nely, double volfrac, double rmin_in_h) {
  if (nelx < 1 || nely < 1) throw std::invalid_argument("mbb: dimensions must be positive");
  if (!(volfrac > 0.0 && volfrac <= 1.0)) throw std::invalid_argument("mbb: volfrac must be in (0, 1]");
  ProblemSpec p;
  p.name = "mbb";
  p.mesh = GridMesh(nelx, nely, 1.0, 1.0);
  std::vector<int> fixed;
  for (int iy = 0; iy <= nely; ++iy) fixed.push_back(2 * p.mesh.node_id(0, iy));
  fixed.push_back(2 * p.mesh.node_id(nelx, nely) + 1);
  p.supports = make_supports(p.mesh, fixed);
  p.loads.forces[2 * p.mesh.node_id(0, 0) + 1] = -1.0;
  p.material = Material{1.0, 1e-9, 0.3, 3.0};
  p.rmin = rmin_in_h * p.mesh.h;
  p.objective = Objective::Compliance;
  p.constraints = {{ConstraintKind::Volume, volfrac}};
  p.initial_density = volfrac;
  return p;
}

/// Column of width 1 and height 2 clamped at the base, compressed by a load of
/// 1e-3 spread over 8 top elements at native resolution (120 x 240) with an
/// 8 x 4 solid patch under the load. `scale` divides the mesh; filter radius,
/// load width and patch keep their physical size.
inline ProblemSpec compressed_column(int scale, double rmin_in_h, ColumnVariant variant) {
  if (scale != 1 && scale != 2 && scale != 4)
    throw std::invalid_argument("compressed_column: scale must be 1, 2 or 4");
  if (!(rmin_in_h > 0.0)) throw std::invalid_argument("compressed_column: rmin must be positive");
  const int nelx = 120 / scale, nely = 240 / scale;
  ProblemSpec p;
  p.name = "column";
  p.mesh = GridMesh(nelx, nely, 1.0 / nelx, 1.0);
  std::vector<int> fixed;
  for (int ix = 0; ix <= nelx; ++ix) {
    const int n = p.mesh.node_id(ix, nely);
    fixed.push_back(2 * n);
    fixed.push_back(2 * n + 1);
  }
  p.supports = make_supports(p.mesh, fixed);

  const int load_w = 8 / scale, patch_h = 4 / scale;
  const int first = nelx / 2 - load_w / 2;
  detail::add_row_edge_load(p.loads, p.mesh, 0, first, load_w, -1e-3, 1);
  for (int ex = first; ex < first + load_w; ++ex)
    for (int ey = 0; ey < patch_h; ++ey) p.passive.solid.push_back(p.mesh.element_id(ex, ey));

  p.material = Material{1.0, 1e-6, 0.3, 3.0};
  // Radius in native element lengths, kept physically fixed across scales.
  p.rmin = rmin_in_h / 120.0;
  p.ks_rho = 160.0;
  if (variant == ColumnVariant::MaxBuckling) {
    p.objective = Objective::InverseBucklingKS;
    p.constraints = {{ConstraintKind::Volume, 0.35}};
    p.modes = 30;
    p.initial_density = 0.35;
  } else {
    p.objective = Objective::Volume;
    p.modes = 20;
    p.initial_density = 1.0;
    p.constraints = {{ConstraintKind::Buckling, 15.0}, {ConstraintKind::Compliance, 2.0 * solid_compliance(p)}};
  }
  return p;
}

/// Linear-compliance cantilever, 4 x 1 domain clamped on the left with a
/// downward load at mid-height of the right edge. Optional stability
/// constraint on the K-S aggregated buckling load factor.
inline ProblemSpec cantilever_linear(int nelx, bool stability = true, double load = 2e5) {
  if (nelx != 80 && nelx != 160 && nelx != 320 && nelx != 640)
    throw std::invalid_argument("cantilever: mesh must be 80x20, 160x40, 320x80 or 640x160");
  if (!(load > 0.0)) throw std::invalid_argument("cantilever: load must be positive");
  const int nely = nelx / 4;
  ProblemSpec p;
  p.name = "cantilever";
  p.mesh = GridMesh(nelx, nely, 4.0 / nelx, 0.1);
  std::vector<int> fixed;
  for (int iy = 0; iy <= nely; ++iy) {
    fixed.push_back(2 * p.mesh.node_id(0, iy));
    fixed.push_back(2 * p.mesh.node_id(0, iy) + 1);
  }
  p.supports = make_supports(p.mesh, fixed);
  // Consistent load over the 4 right-edge elements around mid-height.
  const int first = nely / 2 - 2;
  const double per_node = -load / 4.0 / 2.0;
  for (int ey = first; ey < first + 4; ++ey) {
    p.loads.forces[2 * p.mesh.node_id(nelx, ey) + 1] += per_node;
    p.loads.forces[2 * p.mesh.node_id(nelx, ey + 1) + 1] += per_node;
  }
  p.material = Material{3e9, 3.0, 0.4, 3.0};
  p.rmin = 0.075;
  p.objective = Objective::Compliance;
  p.constraints = {{ConstraintKind::Volume, 0.4}};
  if (stability) {
    p.constraints.push_back({ConstraintKind::Buckling, 2.0});
    p.modes = 6;
    p.ks_rho = 50.0;
  }
  p.initial_density = 0.4;
  return p;
}

}  // namespace topo
