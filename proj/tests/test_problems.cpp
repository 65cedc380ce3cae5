#include <gtest/gtest.h>

#include "topo/problems.hpp"

using namespace topo;

TEST(Problems, ColumnNativeScale) {
  const auto p = compressed_column(1, 4.0, ColumnVariant::MaxBuckling);
  EXPECT_EQ(p.mesh.num_elements(), 28800);
  EXPECT_EQ(p.constraints.size(), 1u);
  EXPECT_EQ(p.constraints[0].kind, ConstraintKind::Volume);
  EXPECT_DOUBLE_EQ(p.constraints[0].bound, 0.35);
  EXPECT_EQ(p.modes, 30);
  EXPECT_DOUBLE_EQ(p.ks_rho, 160.0);
  EXPECT_EQ(p.passive.solid.size(), 32u);
  EXPECT_DOUBLE_EQ(p.material.emin, 1e-6);
}

TEST(Problems, ColumnDeskScale) {
  const auto p = compressed_column(4, 8.0, ColumnVariant::MaxBuckling);
  EXPECT_EQ(p.mesh.nelx, 30);
  EXPECT_EQ(p.mesh.nely, 60);
  EXPECT_EQ(p.passive.solid.size(), 2u);
  double total = 0.0;
  int loaded = 0;
  for (const auto& [dof, f] : p.loads.forces) {
    total += f;
    ++loaded;
    EXPECT_EQ(dof % 2, 1);
  }
  EXPECT_NEAR(total, -1e-3, 1e-18);
  EXPECT_EQ(loaded, 3);  // two elements, three nodes
  // radius keeps its physical size
  EXPECT_DOUBLE_EQ(p.rmin, compressed_column(1, 8.0, ColumnVariant::MaxBuckling).rmin);
  EXPECT_NO_THROW(validate(p));
}

TEST(Problems, ColumnMinVolume) {
  const auto p = compressed_column(4, 8.0, ColumnVariant::MinVolume);
  EXPECT_EQ(p.objective, Objective::Volume);
  ASSERT_EQ(p.constraints.size(), 2u);
  EXPECT_EQ(p.constraints[0].kind, ConstraintKind::Buckling);
  EXPECT_DOUBLE_EQ(p.constraints[0].bound, 15.0);
  EXPECT_EQ(p.constraints[1].kind, ConstraintKind::Compliance);
  EXPECT_NEAR(p.constraints[1].bound, 2.0 * solid_compliance(p), 1e-15);
  EXPECT_EQ(p.modes, 20);
  EXPECT_DOUBLE_EQ(p.initial_density, 1.0);
}

TEST(Problems, ColumnRejectsScale) { EXPECT_THROW(compressed_column(3, 4.0, ColumnVariant::MaxBuckling), std::invalid_argument); }

TEST(Problems, CantileverMeshes) {
  for (int nx : {80, 160, 320, 640}) {
    const auto p = cantilever_linear(nx);
    EXPECT_EQ(p.mesh.nelx, 4 * p.mesh.nely);
    EXPECT_NEAR(p.mesh.nelx * p.mesh.h, 4.0, 1e-12);
  }
  const auto p = cantilever_linear(80);
  EXPECT_DOUBLE_EQ(p.mesh.thickness, 0.1);
  EXPECT_DOUBLE_EQ(p.material.e0, 3e9);
  EXPECT_DOUBLE_EQ(p.material.nu, 0.4);
  EXPECT_DOUBLE_EQ(p.rmin, 0.075);
  ASSERT_EQ(p.constraints.size(), 2u);
  EXPECT_DOUBLE_EQ(p.constraints[1].bound, 2.0);
  EXPECT_EQ(p.modes, 6);
  EXPECT_DOUBLE_EQ(p.ks_rho, 50.0);
  double total = 0.0;
  for (const auto& [dof, f] : p.loads.forces) total += f;
  EXPECT_NEAR(total, -2e5, 1e-6);
  EXPECT_EQ(cantilever_linear(80, false).constraints.size(), 1u);
  EXPECT_THROW(cantilever_linear(100), std::invalid_argument);
}

TEST(Problems, MbbLayout) {
  const auto p = mbb(60, 20, 0.5, 4.0);
  EXPECT_EQ(p.supports.fixed.size(), 22u);
  EXPECT_DOUBLE_EQ(p.loads.forces.at(1), -1.0);
  EXPECT_DOUBLE_EQ(p.rmin, 4.0);
  EXPECT_NO_THROW(validate(p));
}

TEST(Problems, ValidateCatchesMistakes) {
  auto p = mbb(6, 2, 0.5, 1.5);
  p.constraints[0].bound = 0.0;
  EXPECT_THROW(validate(p), std::invalid_argument);
  p = mbb(6, 2, 0.5, 1.5);
  p.supports.fixed.clear();
  EXPECT_THROW(validate(p), std::runtime_error);
  p = mbb(6, 2, 0.5, 1.5);
  p.loads.forces.clear();
  EXPECT_THROW(validate(p), std::invalid_argument);
}
