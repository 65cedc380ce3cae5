#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <stdexcept>
#include <string>

namespace topo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Factorized (or iterative) solver for the reduced stiffness matrix.
class LinearSolver {
 public:
  enum class Kind { Cholesky, ConjugateGradient };

  explicit LinearSolver(Kind kind = Kind::Cholesky) : kind_(kind) {}

  Kind kind() const { return kind_; }

  void factorize(const SparseMatrix& k) {
    if (kind_ == Kind::Cholesky) {
      if (!analyzed_ || k.rows() != rows_) {
        ldlt_.analyzePattern(k);
        analyzed_ = true;
        rows_ = k.rows();
      }
      ldlt_.factorize(k);
      if (ldlt_.info() != Eigen::Success)
        throw std::runtime_error("stiffness factorization failed: matrix is not positive definite");
      const auto& d = ldlt_.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      const double dmin = d.minCoeff();
      if (!(dmin > kPivotRatio * dmax))
        throw std::runtime_error(
            "stiffness matrix is singular or ill-conditioned (pivot ratio " + std::to_string(dmin / dmax) +
            "); check that supports restrain all rigid-body modes");
    } else {
      cg_.setTolerance(1e-12);
      cg_.setMaxIterations(std::max<Eigen::Index>(10 * k.rows(), 1000));
      cg_.compute(k);
      if (cg_.info() != Eigen::Success) throw std::runtime_error("conjugate-gradient preconditioner setup failed");
    }
  }

  Vector solve(const Vector& b) const {
    if (kind_ == Kind::Cholesky) return ldlt_.solve(b);
    Vector x = cg_.solve(b);
    if (cg_.info() != Eigen::Success)
      throw std::runtime_error("conjugate-gradient solve did not converge (error " + std::to_string(cg_.error()) + ")");
    return x;
  }

  Matrix solve(const Matrix& b) const {
    if (kind_ == Kind::Cholesky) return ldlt_.solve(b);
    Matrix x(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve(Vector(b.col(j)));
    return x;
  }

 private:
  static constexpr double kPivotRatio = 1e-14;
  Kind kind_;
  bool analyzed_ = false;
  Eigen::Index rows_ = 0;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
};

}  // namespace topo
