#pragma once

// Linear buckling eigenproblem (K + lambda Ks) phi = 0 for symmetric positive
// definite K and indefinite Ks. Both solvers work on the shifted-inverse form
// (-Ks) phi = mu K phi, mu = 1/lambda, reusing the factorization of K, and
// return the smallest positive load factors with K-orthonormal vectors.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/linear_solver.hpp"

namespace topo {

enum class EigenMethod { Lanczos, SubspaceIteration };

struct EigenOptions {
  double tolerance = 1e-6;  // ||(K + lambda Ks) phi|| <= tolerance * ||K phi||
  int max_iterations = 300;  // restart cycles (Lanczos) or block iterations (subspace)
  EigenMethod method = EigenMethod::Lanczos;
};

struct BucklingResult {
  std::vector<double> values;  // ascending positive load factors
  Matrix vectors;              // reduced, K-orthonormal, one column per value
  bool incomplete = false;     // fewer positive load factors exist than requested
  int iterations = 0;
};

namespace detail {

inline void fill_random_columns(Matrix& x, Eigen::Index from, std::uint32_t seed) {
  std::mt19937 gen(seed);
  for (Eigen::Index j = from; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = double(gen()) / 4294967296.0 - 0.5;
}

inline bool pair_converged(const Vector& kphi, const Vector& neg_ks_phi, double mu, double tol) {
  const Vector r = kphi - neg_ks_phi / mu;
  return r.norm() <= tol * kphi.norm();
}

// Thick-restart Lanczos in the K inner product. The operator K^{-1}(-Ks) is
// self-adjoint there, so a K-orthonormal basis V gives the projected matrix
// V'(-Ks)V directly. All Ritz residuals of a Lanczos basis are parallel, so
// restarting with the kept Ritz vectors and expanding from one of them keeps
// the Krylov structure.
inline BucklingResult lanczos_buckling(const SparseMatrix& k, const SparseMatrix& ks, const LinearSolver& solver,
                                       int modes, const EigenOptions& opt) {
  using Index = Eigen::Index;
  const Index n = k.rows();
  const Index kmax = std::min<Index>(n, std::max<Index>(2 * modes + 20, modes + 50));
  const Index keep = std::min<Index>(kmax - std::min<Index>(kmax, 10), modes + std::max(4, modes / 2));
  Matrix v(n, kmax), kv(n, kmax), sv(n, kmax);  // basis, K*basis, -Ks*basis
  Index dim = 0;
  std::mt19937 gen(0x1a2c05u);
  const auto random_vector = [&] {
    Vector r(n);
    for (Index i = 0; i < n; ++i) r[i] = double(gen()) / 4294967296.0 - 0.5;
    return r;
  };
  const auto append = [&](Vector w) {
    if (dim >= kmax) return false;
    double removed = 0.0;
    for (int pass = 0; pass < 2 && dim > 0; ++pass) {
      const Vector c = kv.leftCols(dim).transpose() * w;
      w -= v.leftCols(dim) * c;
      removed += c.squaredNorm();
    }
    Vector kw = k * w;
    const double nn = w.dot(kw);
    if (!(nn > 1e-20 * (nn + removed))) return false;
    const double s = 1.0 / std::sqrt(nn);
    v.col(dim) = w * s;
    kv.col(dim) = kw * s;
    sv.col(dim) = -(ks * v.col(dim));
    ++dim;
    return true;
  };

  append(random_vector());

  BucklingResult res;
  Index source = dim - 1;
  Index last_check = dim;
  int cycles = 0;
  int stalled = 0;
  while (true) {
    // Expand until the basis is full or a convergence check is due.
    while (dim < kmax && !(dim >= modes + 2 && dim - last_check >= 10)) {
      Vector w = solver.solve(Vector(sv.col(source)));
      if (!append(std::move(w))) {
        int tries = 0;
        while (!append(random_vector()) && ++tries < 5) {
        }
        if (tries >= 5) break;
      }
      source = dim - 1;
    }
    last_check = dim;

    Matrix h = v.leftCols(dim).transpose() * sv.leftCols(dim);
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Vector& theta = es.eigenvalues();  // ascending
    Index npos = 0;
    while (npos < dim && theta[dim - 1 - npos] > 0.0) ++npos;
    const Index want = std::min<Index>(modes, npos);

    Matrix s(dim, want);
    for (Index j = 0; j < want; ++j) s.col(j) = es.eigenvectors().col(dim - 1 - j);
    const Matrix kphi = kv.leftCols(dim) * s;
    const Matrix sphi = sv.leftCols(dim) * s;
    Index first_bad = -1;
    for (Index j = 0; j < want && first_bad < 0; ++j)
      if (!pair_converged(kphi.col(j), sphi.col(j), theta[dim - 1 - j], opt.tolerance)) first_bad = j;

    const bool exhausted = dim >= n;
    if (first_bad < 0 && (want == modes || exhausted || (want > 0 && stalled >= 3))) {
      res.values.resize(want);
      res.vectors = v.leftCols(dim) * s;
      for (Index j = 0; j < want; ++j) res.values[j] = 1.0 / theta[dim - 1 - j];
      res.incomplete = want < modes;
      res.iterations = cycles + 1;
      return res;
    }
    if (exhausted) throw std::runtime_error("buckling eigensolver: full space reached without convergence");
    stalled = (first_bad < 0 && want < modes) ? stalled + 1 : 0;

    if (dim >= kmax) {
      if (++cycles > opt.max_iterations)
        throw std::runtime_error("buckling eigensolver did not converge in " + std::to_string(opt.max_iterations) +
                                 " restart cycles");
      // Keep the largest-mu Ritz vectors, least converged one last.
      const Index p = std::min<Index>(keep, dim);
      Matrix sp(dim, p);
      for (Index j = 0; j < p; ++j) sp.col(j) = es.eigenvectors().col(dim - 1 - j);
      if (first_bad >= 0 && first_bad < p) sp.col(first_bad).swap(sp.col(p - 1));
      const Matrix nv = v.leftCols(dim) * sp;
      const Matrix nkv = kv.leftCols(dim) * sp;
      const Matrix nsv = sv.leftCols(dim) * sp;
      v.leftCols(p) = nv;
      kv.leftCols(p) = nkv;
      sv.leftCols(p) = nsv;
      dim = p;
      source = p - 1;
      last_check = dim;
    }
  }
}

// Block subspace iteration with Rayleigh-Ritz on every step. The block grows
// when negative mu of larger magnitude crowd out the wanted positive ones.
inline BucklingResult subspace_buckling(const SparseMatrix& k, const SparseMatrix& ks, const LinearSolver& solver,
                                        int modes, const Matrix* warm, const EigenOptions& opt) {
  using Index = Eigen::Index;
  const Index n = k.rows();
  const auto base_block = [&](Index extra) { return std::min<Index>(n, modes + std::max(4, modes / 2) + extra); };
  Index q = base_block(0);
  Matrix x(n, q);
  Index seeded = 0;
  if (warm && warm->rows() == n && warm->cols() > 0) {
    seeded = std::min(q, warm->cols());
    x.leftCols(seeded) = warm->leftCols(seeded);
  }
  fill_random_columns(x, seeded, 0x5eedu);

  BucklingResult res;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Matrix y = -(ks * x);
    const Matrix xb = solver.solve(y);
    Matrix br = xb.transpose() * y;  // = xb' K xb
    br = 0.5 * (br + br.transpose()).eval();
    Matrix ar = xb.transpose() * (-(ks * xb));
    ar = 0.5 * (ar + ar.transpose()).eval();

    // K-orthonormal basis of span(xb), dropping numerically dependent directions.
    Eigen::SelfAdjointEigenSolver<Matrix> bes(br);
    const Vector& bd = bes.eigenvalues();
    const double bmax = bd.cwiseAbs().maxCoeff();
    std::vector<Index> kept;
    for (Index j = 0; j < bd.size(); ++j)
      if (bd[j] > 1e-13 * bmax) kept.push_back(j);
    Matrix t(q, static_cast<Index>(kept.size()));
    for (size_t j = 0; j < kept.size(); ++j) t.col(j) = bes.eigenvectors().col(kept[j]) / std::sqrt(bd[kept[j]]);
    const Matrix arr = t.transpose() * ar * t;
    Eigen::SelfAdjointEigenSolver<Matrix> aes(0.5 * (arr + arr.transpose()));
    const Matrix ritz = xb * (t * aes.eigenvectors());
    const Vector& mu = aes.eigenvalues();  // ascending

    const Index r = mu.size();
    Matrix xn(n, q);
    for (Index j = 0; j < r; ++j) xn.col(j) = ritz.col(r - 1 - j);
    if (r < q) fill_random_columns(xn, r, 0x5eedu + static_cast<std::uint32_t>(it));

    Index npos = 0;
    while (npos < r && mu[r - 1 - npos] > 0.0) ++npos;
    const Index want = std::min<Index>(modes, npos);
    const double mu_cut = want > 0 ? mu[r - want] : 0.0;
    Index neg_dominant = 0;
    for (Index j = 0; j < r; ++j)
      if (mu[j] < 0.0 && -mu[j] >= mu_cut) ++neg_dominant;

    bool converged = want > 0;
    for (Index j = 0; j < want && converged; ++j) {
      const Vector phi = xn.col(j);
      converged = pair_converged(k * phi, -(ks * phi), mu[r - 1 - j], opt.tolerance);
    }

    const bool too_few = converged && want < modes && q < n;
    if (converged && !too_few) {
      res.values.resize(want);
      res.vectors = xn.leftCols(want);
      for (Index j = 0; j < want; ++j) res.values[j] = 1.0 / mu[r - 1 - j];
      res.incomplete = want < modes;
      res.iterations = it;
      return res;
    }
    Index grown = base_block(neg_dominant);
    if (too_few) grown = std::max(grown, q + std::max<Index>(modes - want, 4));
    grown = std::min(grown, n);
    if (grown > q) {
      Matrix wider(n, grown);
      wider.leftCols(q) = xn;
      fill_random_columns(wider, q, 0xa11ceu + static_cast<std::uint32_t>(it));
      xn = std::move(wider);
      q = grown;
    }
    x = std::move(xn);
  }
  throw std::runtime_error("buckling eigensolver did not converge in " + std::to_string(opt.max_iterations) +
                           " subspace iterations");
}

}  // namespace detail

/// Smallest `modes` positive load factors of (K + lambda Ks) phi = 0.
/// `solver` must hold the factorization of `k`. `warm_start` may carry the
/// vectors of a nearby previous solve; only subspace iteration uses it, Lanczos
/// always starts from the same fixed seed.
inline BucklingResult buckling_eigs(const SparseMatrix& k, const SparseMatrix& ks, const LinearSolver& solver, int modes,
                                    const Matrix* warm_start = nullptr, const EigenOptions& opt = {}) {
  if (modes < 1) throw std::invalid_argument("buckling_eigs: mode count must be >= 1");
  if (k.rows() != ks.rows() || k.cols() != ks.cols()) throw std::invalid_argument("buckling_eigs: size mismatch");
  if (opt.method == EigenMethod::SubspaceIteration)
    return detail::subspace_buckling(k, ks, solver, modes, warm_start, opt);
  return detail::lanczos_buckling(k, ks, solver, modes, opt);
}

}  // namespace topo
