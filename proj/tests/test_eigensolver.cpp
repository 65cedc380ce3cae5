#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace topo;

namespace {

struct Pencil {
  SparseMatrix k, ks;
  LinearSolver solver;

  Pencil(int nx, int ny, const Vector& xphys) {
    const auto p = topo::testing::cantilever_column(nx, ny);
    const FeModel model(p.mesh, p.supports, p.material.nu);
    const Vector young = young_field(xphys, p.material);
    k = model.assemble_stiffness(young);
    solver.factorize(k);
    const Vector u = model.expand(solver.solve(model.reduce(model.load_vector(p.loads))));
    ks = model.assemble_stress_stiffness(young, u);
  }
};

std::vector<double> dense_load_factors(const Pencil& pc, int count) {
  const Eigen::MatrixXd k(pc.k), ks(pc.ks);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(-ks, k);
  const auto& mu = ges.eigenvalues();
  std::vector<double> out;
  for (Eigen::Index i = mu.size() - 1; i >= 0 && static_cast<int>(out.size()) < count; --i)
    if (mu[i] > 0.0) out.push_back(1.0 / mu[i]);
  return out;
}

}  // namespace

TEST(Eigensolver, LanczosAndSubspaceMatchDense) {
  const Pencil pc(4, 16, topo::testing::wavy_design(64, 0.4, 1.0));
  const auto ref = dense_load_factors(pc, 6);
  for (auto method : {EigenMethod::Lanczos, EigenMethod::SubspaceIteration}) {
    EigenOptions opt;
    opt.method = method;
    opt.tolerance = 1e-9;
    const auto r = buckling_eigs(pc.k, pc.ks, pc.solver, 6, nullptr, opt);
    ASSERT_EQ(r.values.size(), 6u);
    EXPECT_FALSE(r.incomplete);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(r.values[i] / ref[i], 1.0, 1e-9) << "mode " << i;
    const Eigen::MatrixXd gram = r.vectors.transpose() * (pc.k * r.vectors);
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Eigensolver, ValuesAscendingAndResidualsSmall) {
  const Pencil pc(6, 18, Vector::Ones(108));
  const auto r = buckling_eigs(pc.k, pc.ks, pc.solver, 8);
  for (size_t i = 1; i < r.values.size(); ++i) EXPECT_LE(r.values[i - 1], r.values[i]);
  for (Eigen::Index i = 0; i < r.vectors.cols(); ++i) {
    const Vector phi = r.vectors.col(i);
    const Vector res = pc.k * phi + r.values[i] * (pc.ks * phi);
    EXPECT_LT(res.norm(), 1e-5 * (pc.k * phi).norm());
  }
}

TEST(Eigensolver, SubspaceWarmStartReproducesValues) {
  const Pencil pc(4, 16, Vector::Ones(64));
  EigenOptions opt;
  opt.method = EigenMethod::SubspaceIteration;
  const auto cold = buckling_eigs(pc.k, pc.ks, pc.solver, 4, nullptr, opt);
  const auto warm = buckling_eigs(pc.k, pc.ks, pc.solver, 4, &cold.vectors, opt);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(warm.values[i], cold.values[i], 1e-8 * cold.values[i]);
  EXPECT_LE(warm.iterations, cold.iterations);
}

TEST(Eigensolver, Deterministic) {
  const Pencil pc(4, 16, topo::testing::wavy_design(64, 0.4, 1.0));
  const auto a = buckling_eigs(pc.k, pc.ks, pc.solver, 5);
  const auto b = buckling_eigs(pc.k, pc.ks, pc.solver, 5);
  EXPECT_EQ(a.values, b.values);
}

TEST(Eigensolver, RejectsBadRequests) {
  const Pencil pc(2, 4, Vector::Ones(8));
  EXPECT_THROW(buckling_eigs(pc.k, pc.ks, pc.solver, 0), std::invalid_argument);
  SparseMatrix small(3, 3);
  EXPECT_THROW(buckling_eigs(pc.k, small, pc.solver, 1), std::invalid_argument);
}
