#pragma once

// Plane-stress Q4 analysis: stiffness and stress-stiffness assembly on the
// free DOFs, linear solves, compliance, linear buckling and sensitivities.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/eigensolver.hpp"
#include "topo/linear_solver.hpp"
#include "topo/mesh.hpp"
#include "topo/threefield.hpp"

namespace topo {

using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Vector8d = Eigen::Matrix<double, 8, 1>;
using StressMap = Eigen::Matrix<double, 3, 8>;

struct Material {
  double e0 = 1.0;
  double emin = 1e-9;
  double nu = 0.3;
  double penal = 3.0;
};

namespace detail {

inline constexpr std::array<double, 4> kCornerXi{-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kCornerEta{-1.0, -1.0, 1.0, 1.0};

// Shape-function gradients in physical coordinates at (xi, eta).
inline Eigen::Matrix<double, 2, 4> shape_gradients(double xi, double eta, double h) {
  Eigen::Matrix<double, 2, 4> g;
  for (int i = 0; i < 4; ++i) {
    g(0, i) = 0.25 * kCornerXi[i] * (1.0 + kCornerEta[i] * eta) * 2.0 / h;
    g(1, i) = 0.25 * kCornerEta[i] * (1.0 + kCornerXi[i] * xi) * 2.0 / h;
  }
  return g;
}

inline Eigen::Matrix<double, 3, 8> strain_matrix(double xi, double eta, double h) {
  const auto g = shape_gradients(xi, eta, h);
  Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
  for (int i = 0; i < 4; ++i) {
    b(0, 2 * i) = g(0, i);
    b(1, 2 * i + 1) = g(1, i);
    b(2, 2 * i) = g(1, i);
    b(2, 2 * i + 1) = g(0, i);
  }
  return b;
}

inline Eigen::Matrix3d plane_stress_matrix(double nu) {
  Eigen::Matrix3d d;
  d << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu);
  return d / (1.0 - nu * nu);
}

inline constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

}  // namespace detail

/// Unit-modulus Q4 stiffness, 2x2 Gauss quadrature, DOF order as element_dof_map.
inline Matrix8d element_stiffness(double nu, double h = 1.0, double thickness = 1.0) {
  if (!(nu >= 0.0 && nu < 0.5)) throw std::invalid_argument("element_stiffness: Poisson ratio must be in [0, 0.5)");
  const Eigen::Matrix3d d = detail::plane_stress_matrix(nu);
  const double det_j = 0.25 * h * h;
  Matrix8d k = Matrix8d::Zero();
  for (double xi : {-detail::kGauss, detail::kGauss})
    for (double eta : {-detail::kGauss, detail::kGauss}) {
      const auto b = detail::strain_matrix(xi, eta, h);
      k += b.transpose() * d * b * (det_j * thickness);
    }
  return k;
}

/// Geometric-stiffness building blocks: for centroid stresses (sx, sy, txy),
/// the element stress stiffness is sx*xx + sy*yy + txy*xy.
struct GeometricBasis {
  Matrix8d xx;
  Matrix8d yy;
  Matrix8d xy;
  StressMap stress;  // unit-modulus centroid stress per element displacement

  Matrix8d combine(const Eigen::Vector3d& s) const { return s[0] * xx + s[1] * yy + s[2] * xy; }
};

inline GeometricBasis geometric_basis(double nu, double h = 1.0, double thickness = 1.0) {
  GeometricBasis g;
  g.xx.setZero();
  g.yy.setZero();
  g.xy.setZero();
  const double det_j = 0.25 * h * h;
  for (double xi : {-detail::kGauss, detail::kGauss})
    for (double eta : {-detail::kGauss, detail::kGauss}) {
      const auto sg = detail::shape_gradients(xi, eta, h);
      // Rows: du/dx, du/dy, dv/dx, dv/dy.
      Eigen::Matrix<double, 4, 8> gm = Eigen::Matrix<double, 4, 8>::Zero();
      for (int i = 0; i < 4; ++i) {
        gm(0, 2 * i) = sg(0, i);
        gm(1, 2 * i) = sg(1, i);
        gm(2, 2 * i + 1) = sg(0, i);
        gm(3, 2 * i + 1) = sg(1, i);
      }
      const double w = det_j * thickness;
      g.xx += w * (gm.row(0).transpose() * gm.row(0) + gm.row(2).transpose() * gm.row(2));
      g.yy += w * (gm.row(1).transpose() * gm.row(1) + gm.row(3).transpose() * gm.row(3));
      const Matrix8d c = gm.row(0).transpose() * gm.row(1) + gm.row(2).transpose() * gm.row(3);
      g.xy += w * (c + c.transpose());
    }
  g.stress = detail::plane_stress_matrix(nu) * detail::strain_matrix(0.0, 0.0, h);
  return g;
}

/// Assembly of element contributions onto the free (unsupported) DOFs.
/// The sparsity pattern and element-to-slot map are built once.
class FeModel {
 public:
  FeModel(const GridMesh& mesh, const SupportSet& supports, double nu)
      : mesh_(mesh), ke_(element_stiffness(nu, mesh.h, mesh.thickness)),
        geo_(geometric_basis(nu, mesh.h, mesh.thickness)) {
    const int ndof = mesh.num_dofs();
    reduced_.assign(ndof, 0);
    for (int d : supports.fixed) {
      if (d < 0 || d >= ndof) throw std::out_of_range("support DOF out of range");
      reduced_[d] = -1;
    }
    nfree_ = 0;
    for (int d = 0; d < ndof; ++d)
      if (reduced_[d] >= 0) {
        reduced_[d] = nfree_++;
        free_.push_back(d);
      }
    if (nfree_ == 0) throw std::invalid_argument("all DOFs are fixed");

    const int ne = mesh.num_elements();
    edofs_.resize(ne);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(ne) * 64);
    for (int e = 0; e < ne; ++e) {
      edofs_[e] = element_dof_map(mesh, e);
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
          const int ra = reduced_[edofs_[e][a]], rb = reduced_[edofs_[e][b]];
          if (ra >= 0 && rb >= 0) trip.emplace_back(ra, rb, 1.0);
        }
    }
    pattern_.resize(nfree_, nfree_);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    slots_.assign(static_cast<size_t>(ne) * 64, -1);
    const auto* outer = pattern_.outerIndexPtr();
    const auto* inner = pattern_.innerIndexPtr();
    for (int e = 0; e < ne; ++e)
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
          const int ra = reduced_[edofs_[e][a]], rb = reduced_[edofs_[e][b]];
          if (ra < 0 || rb < 0) continue;
          // column rb, row ra
          const auto* first = inner + outer[rb];
          const auto* last = inner + outer[rb + 1];
          const auto* it = std::lower_bound(first, last, ra);
          slots_[static_cast<size_t>(e) * 64 + a * 8 + b] = static_cast<int>(it - inner);
        }
  }

  const GridMesh& mesh() const { return mesh_; }
  const Matrix8d& unit_stiffness() const { return ke_; }
  const GeometricBasis& geometric() const { return geo_; }
  int num_free() const { return nfree_; }
  const std::array<int, 8>& element_dofs(int e) const { return edofs_[e]; }
  /// Reduced index of a global DOF, -1 if fixed.
  int reduced_index(int dof) const { return reduced_[dof]; }

  SparseMatrix assemble_stiffness(const Vector& young) const {
    check_length(young);
    SparseMatrix k = pattern_;
    double* val = k.valuePtr();
    std::fill(val, val + k.nonZeros(), 0.0);
    for (int e = 0; e < mesh_.num_elements(); ++e) add_element(val, e, young[e] * ke_);
    return k;
  }

  /// Stress stiffness from centroid stresses of the full displacement field.
  SparseMatrix assemble_stress_stiffness(const Vector& young, const Vector& u) const {
    check_length(young);
    SparseMatrix k = pattern_;
    double* val = k.valuePtr();
    std::fill(val, val + k.nonZeros(), 0.0);
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const Eigen::Vector3d s = young[e] * (geo_.stress * element_vector(u, e));
      add_element(val, e, geo_.combine(s));
    }
    return k;
  }

  Vector reduce(const Vector& full) const {
    Vector r(nfree_);
    for (int i = 0; i < nfree_; ++i) r[i] = full[free_[i]];
    return r;
  }

  Vector expand(const Vector& reduced) const {
    Vector f = Vector::Zero(mesh_.num_dofs());
    for (int i = 0; i < nfree_; ++i) f[free_[i]] = reduced[i];
    return f;
  }

  Vector load_vector(const LoadSet& loads) const {
    Vector f = Vector::Zero(mesh_.num_dofs());
    for (const auto& [d, v] : loads.forces) {
      if (d < 0 || d >= mesh_.num_dofs()) throw std::out_of_range("load DOF out of range");
      if (reduced_[d] < 0) throw std::invalid_argument("load applied to fixed DOF " + std::to_string(d));
      f[d] += v;
    }
    return f;
  }

  Vector8d element_vector(const Vector& full, int e) const {
    Vector8d v;
    for (int a = 0; a < 8; ++a) v[a] = full[edofs_[e][a]];
    return v;
  }

 private:
  void check_length(const Vector& young) const {
    if (young.size() != mesh_.num_elements()) throw std::invalid_argument("per-element field has wrong length");
  }

  void add_element(double* val, int e, const Matrix8d& m) const {
    const int* s = &slots_[static_cast<size_t>(e) * 64];
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        if (s[a * 8 + b] >= 0) val[s[a * 8 + b]] += m(a, b);
  }

  GridMesh mesh_;
  Matrix8d ke_;
  GeometricBasis geo_;
  std::vector<int> reduced_;
  std::vector<int> free_;
  int nfree_ = 0;
  std::vector<std::array<int, 8>> edofs_;
  SparseMatrix pattern_;
  std::vector<int> slots_;
};

/// Per-element modulus from the physical field.
inline Vector young_field(const Vector& xphys, const Material& mat) {
  Vector e(xphys.size());
  for (Eigen::Index i = 0; i < xphys.size(); ++i) e[i] = simp_young(xphys[i], mat.e0, mat.emin, mat.penal).young;
  return e;
}

inline Vector young_derivative(const Vector& xphys, const Material& mat) {
  Vector e(xphys.size());
  for (Eigen::Index i = 0; i < xphys.size(); ++i)
    e[i] = simp_young(xphys[i], mat.e0, mat.emin, mat.penal).derivative;
  return e;
}

/// One-shot static solve returning the full displacement vector.
inline Vector assemble_and_solve(const GridMesh& mesh, const Vector& young, const LoadSet& loads,
                                 const SupportSet& supports, double nu = 0.3,
                                 LinearSolver::Kind kind = LinearSolver::Kind::Cholesky) {
  for (double v : young)
    if (!(v > 0.0)) throw std::invalid_argument("assemble_and_solve: moduli must be positive");
  const FeModel model(mesh, supports, nu);
  const SparseMatrix k = model.assemble_stiffness(young);
  LinearSolver solver(kind);
  solver.factorize(k);
  return model.expand(solver.solve(model.reduce(model.load_vector(loads))));
}

struct ComplianceResult {
  double value = 0.0;
  Vector sensitivity;  // dC / d xphys
};

inline ComplianceResult compliance_and_sensitivity(const FeModel& model, const Vector& u, const Vector& f,
                                                   const Vector& xphys, const Material& mat) {
  ComplianceResult r;
  r.value = f.dot(u);
  const int ne = model.mesh().num_elements();
  r.sensitivity.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const Vector8d ue = model.element_vector(u, e);
    r.sensitivity[e] = -simp_young(xphys[e], mat.e0, mat.emin, mat.penal).derivative *
                       ue.dot(model.unit_stiffness() * ue);
  }
  return r;
}

struct BucklingSensitivity {
  Matrix dlambda;         // modes x elements, d lambda_i / d xphys_e
  bool repeated = false;  // some differentiated eigenvalue is not simple
};

/// Eigenvalue derivatives including the dependence of Ks on the
/// displacement state (adjoint term). `u` is the full displacement vector.
inline BucklingSensitivity buckling_sensitivity(const BucklingResult& eig, const FeModel& model,
                                                const LinearSolver& solver, const Vector& u, const Vector& xphys,
                                                const Material& mat, bool include_adjoint = true) {
  const int ne = model.mesh().num_elements();
  const auto m = static_cast<Eigen::Index>(eig.values.size());
  BucklingSensitivity out;
  out.dlambda = Matrix::Zero(m, ne);
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    if (std::abs(eig.values[i + 1] - eig.values[i]) <= 1e-6 * std::abs(eig.values[i])) out.repeated = true;

  const Vector young = young_field(xphys, mat);
  const Vector dyoung = young_derivative(xphys, mat);
  const auto& ke = model.unit_stiffness();
  const auto& geo = model.geometric();

  std::vector<Vector8d> ue(ne);
  std::vector<Matrix8d> stress_mat(ne);  // Ks_e / E_e at the current state
  for (int e = 0; e < ne; ++e) {
    ue[e] = model.element_vector(u, e);
    stress_mat[e] = geo.combine(geo.stress * ue[e]);
  }

  std::vector<Vector> phis(m);
  Matrix adj_rhs = Matrix::Zero(model.num_free(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    phis[i] = model.expand(eig.vectors.col(i));
    if (!include_adjoint) continue;
    Vector v = Vector::Zero(model.mesh().num_dofs());
    for (int e = 0; e < ne; ++e) {
      const Vector8d pe = model.element_vector(phis[i], e);
      const Eigen::Vector3d a(pe.dot(geo.xx * pe), pe.dot(geo.yy * pe), pe.dot(geo.xy * pe));
      const Vector8d ve = young[e] * (geo.stress.transpose() * a);
      const auto& dofs = model.element_dofs(e);
      for (int k = 0; k < 8; ++k) v[dofs[k]] += ve[k];
    }
    adj_rhs.col(i) = model.reduce(v);
  }
  Matrix adj;
  if (include_adjoint && m > 0) adj = solver.solve(adj_rhs);

  for (Eigen::Index i = 0; i < m; ++i) {
    const double lam = eig.values[i];
    const Vector w = include_adjoint ? model.expand(adj.col(i)) : Vector();
    for (int e = 0; e < ne; ++e) {
      const Vector8d pe = model.element_vector(phis[i], e);
      const double dk = dyoung[e] * pe.dot(ke * pe);
      double dks = dyoung[e] * pe.dot(stress_mat[e] * pe);
      if (include_adjoint) dks -= dyoung[e] * model.element_vector(w, e).dot(ke * ue[e]);
      out.dlambda(i, e) = lam * (dk + lam * dks);
    }
  }
  return out;
}

struct KsResult {
  double value = 0.0;
  std::vector<double> weights;
};

/// Kreisselmeier-Steinhauser smooth maximum, max-shifted.
inline KsResult ks_aggregate(std::span<const double> values, double rho) {
  if (values.empty()) throw std::invalid_argument("ks_aggregate: no values");
  if (!(rho > 0.0)) throw std::invalid_argument("ks_aggregate: rho must be positive");
  const double vmax = *std::max_element(values.begin(), values.end());
  KsResult r;
  r.weights.resize(values.size());
  double sum = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    r.weights[i] = std::exp(rho * (values[i] - vmax));
    sum += r.weights[i];
  }
  for (double& w : r.weights) w /= sum;
  r.value = vmax + std::log(sum) / rho;
  return r;
}

}  // namespace topo
