#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "topo/topo.hpp"

namespace topo::testing {

// Fixed-free column: base clamped, uniform compressive load on the top edge.
inline ProblemSpec cantilever_column(int nx, int ny, double total_load = 1e-3) {
  ProblemSpec p;
  p.name = "euler";
  p.mesh = GridMesh(nx, ny, 1.0, 1.0);
  std::vector<int> fixed;
  for (int ix = 0; ix <= nx; ++ix) {
    const int n = p.mesh.node_id(ix, ny);
    fixed.push_back(2 * n);
    fixed.push_back(2 * n + 1);
  }
  p.supports = make_supports(p.mesh, fixed);
  for (int ix = 0; ix < nx; ++ix) {
    p.loads.forces[2 * p.mesh.node_id(ix, 0) + 1] -= total_load / nx / 2;
    p.loads.forces[2 * p.mesh.node_id(ix + 1, 0) + 1] -= total_load / nx / 2;
  }
  p.material = Material{1.0, 1e-6, 0.3, 3.0};
  p.rmin = 1.5;
  p.objective = Objective::InverseBucklingKS;
  p.constraints = {{ConstraintKind::Volume, 0.5}};
  p.modes = 4;
  p.ks_rho = 50.0;
  return p;
}

// Critical load of a fixed-free strut with rectangular section.
inline double euler_fixed_free(double e, double width, double thickness, double length) {
  const double inertia = thickness * width * width * width / 12.0;
  return std::numbers::pi * std::numbers::pi * e * inertia / (4.0 * length * length);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Smooth nonuniform design in (lo, hi) for gradient checks.
inline Vector wavy_design(int n, double lo = 0.3, double hi = 0.8) {
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * (0.5 + 0.5 * std::sin(1.7 * i + 0.3));
  return x;
}

}  // namespace topo::testing
