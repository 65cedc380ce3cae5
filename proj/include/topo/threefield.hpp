#pragma once

// Design -> filtered -> physical density pipeline and its derivatives.

#include <Eigen/Sparse>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "topo/mesh.hpp"

namespace topo {

using Vector = Eigen::VectorXd;

/// Row-normalized linear-hat density filter.
struct FilterOperator {
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights;

  int size() const { return static_cast<int>(weights.rows()); }
};

inline FilterOperator build_filter(const GridMesh& mesh, double rmin) {
  if (!(rmin > 0.0)) throw std::invalid_argument("build_filter: rmin must be positive");
  const int n = mesh.num_elements();
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < n; ++e) {
    const auto nb = neighbor_elements(mesh, e, rmin);
    double sum = 0.0;
    for (const auto& [i, d] : nb) sum += rmin - d;
    for (const auto& [i, d] : nb) trip.emplace_back(e, i, (rmin - d) / sum);
  }
  FilterOperator f;
  f.weights.resize(n, n);
  f.weights.setFromTriplets(trip.begin(), trip.end());
  f.weights.makeCompressed();
  return f;
}

inline Vector apply_filter(const FilterOperator& w, const Vector& x) {
  if (x.size() != w.size()) throw std::invalid_argument("apply_filter: length mismatch");
  return w.weights * x;
}

inline Vector apply_filter_transpose(const FilterOperator& w, const Vector& g) {
  if (g.size() != w.size()) throw std::invalid_argument("apply_filter_transpose: length mismatch");
  return w.weights.transpose() * g;
}

struct ProjectionParams {
  double beta = 1.0;
  double eta = 0.5;
};

namespace detail {
// Below this sharpness the tanh projection is replaced by its beta -> 0 limit.
inline constexpr double kBetaLinearLimit = 1e-9;
}  // namespace detail

inline double project(double xt, double beta, double eta = 0.5) {
  if (beta < detail::kBetaLinearLimit) return xt;
  const double a = std::tanh(beta * eta);
  return (a + std::tanh(beta * (xt - eta))) / (a + std::tanh(beta * (1.0 - eta)));
}

inline double project_derivative(double xt, double beta, double eta = 0.5) {
  if (beta < detail::kBetaLinearLimit) return 1.0;
  const double s = 1.0 / std::cosh(beta * (xt - eta));
  return beta * s * s / (std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta)));
}

struct SimpValue {
  double young;
  double derivative;
};

inline SimpValue simp_young(double xp, double e0, double emin, double penal = 3.0) {
  return {emin + std::pow(xp, penal) * (e0 - emin),
          penal * std::pow(xp, penal - 1.0) * (e0 - emin)};
}

/// Mean of 4 x (1 - x); zero only for a fully binary field.
inline double gray_level(const Vector& xphys) {
  if (xphys.size() == 0) return 0.0;
  double s = 0.0;
  for (double v : xphys) s += v * (1.0 - v);
  return 4.0 * s / static_cast<double>(xphys.size());
}

/// The three element-wise fields plus the projection slope needed for the
/// chain rule. Passive elements are pinned in `physical`.
struct DesignField {
  Vector design;
  Vector filtered;
  Vector physical;
  Vector slope;  // d physical / d filtered, zero on passive elements
};

inline DesignField evaluate_design(const FilterOperator& w, const Vector& x, const ProjectionParams& proj,
                                   const PassiveSet& passive) {
  DesignField f;
  f.design = x;
  f.filtered = apply_filter(w, x);
  const auto n = f.filtered.size();
  f.physical.resize(n);
  f.slope.resize(n);
  for (Eigen::Index e = 0; e < n; ++e) {
    f.physical[e] = project(f.filtered[e], proj.beta, proj.eta);
    f.slope[e] = project_derivative(f.filtered[e], proj.beta, proj.eta);
  }
  for (int e : passive.solid) {
    f.physical[e] = 1.0;
    f.slope[e] = 0.0;
  }
  for (int e : passive.void_) {
    f.physical[e] = 0.0;
    f.slope[e] = 0.0;
  }
  return f;
}

/// df/dx = W^T (df/dxphys .* dxphys/dxfilt), passive entries zeroed.
inline Vector chain_to_design(const Vector& df_dphys, const FilterOperator& w, const Vector& slope,
                              const PassiveSet& passive) {
  if (df_dphys.size() != slope.size() || slope.size() != w.size())
    throw std::invalid_argument("chain_to_design: length mismatch");
  Vector g = apply_filter_transpose(w, df_dphys.cwiseProduct(slope));
  for (int e : passive.solid) g[e] = 0.0;
  for (int e : passive.void_) g[e] = 0.0;
  return g;
}

}  // namespace topo
