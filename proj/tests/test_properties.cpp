#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"

using namespace topo;

namespace {

Vector random_design(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

TEST(Property, ProjectionSharpensWithBeta) {
  for (double xt = 0.0; xt <= 1.0; xt += 0.05) {
    double prev = project(xt, 1.0);
    for (double beta : {2.0, 4.0, 16.0, 64.0, 512.0}) {
      const double v = project(xt, beta);
      if (xt < 0.5 - 1e-12)
        EXPECT_LE(v, prev + 1e-14) << xt << " " << beta;
      else if (xt > 0.5 + 1e-12)
        EXPECT_GE(v, prev - 1e-14) << xt << " " << beta;
      prev = v;
    }
  }
}

TEST(Property, ProjectionMonotoneInDensity) {
  for (double beta : {1e-3, 1.0, 8.0, 100.0}) {
    double prev = -1.0;
    for (double xt = 0.0; xt <= 1.0 + 1e-12; xt += 0.01) {
      const double v = project(xt, beta);
      EXPECT_GE(v, prev);
      EXPECT_GE(project_derivative(xt, beta), 0.0);
      prev = v;
    }
  }
}

TEST(Property, FilterPreservesConstantsAndBounds) {
  for (double rmin : {1.0, 1.5, 2.7, 4.0}) {
    GridMesh m(13, 7);
    const auto w = build_filter(m, rmin);
    EXPECT_LT((apply_filter(w, Vector::Constant(m.num_elements(), 0.37)).array() - 0.37).abs().maxCoeff(), 1e-14);
    const Vector x = random_design(m.num_elements(), 7);
    const Vector xt = apply_filter(w, x);
    EXPECT_GE(xt.minCoeff(), x.minCoeff() - 1e-14);
    EXPECT_LE(xt.maxCoeff(), x.maxCoeff() + 1e-14);
  }
}

TEST(Property, GrayLevelBounds) {
  for (unsigned s = 0; s < 5; ++s) {
    const Vector x = random_design(50, s);
    const double g = gray_level(x);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 1.0);
  }
  EXPECT_DOUBLE_EQ(gray_level(Vector::Constant(10, 0.5)), 1.0);
}

TEST(Property, AutomaticIncreaseNonNegativeAndZeroWhenObjectiveRises) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Continuation c(AutomaticScheme{});
  double f_prev = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double f = u(rng);
    const double before = c.beta();
    c.advance(f, 0.5);
    EXPECT_GE(c.beta(), before);
    if (k > 0 && f > f_prev) EXPECT_EQ(c.beta(), before);
    EXPECT_LE(c.beta(), std::max(before * 1.2, before) + 1e-12);
    f_prev = f;
  }
}

TEST(Property, RunHistoryInvariants) {
  const ProblemSpec spec = mbb(24, 8, 0.4, 1.5);
  RunOptions opt;
  opt.max_iters = 120;
  const RunResult r = run_optimization(spec, AutomaticScheme{}, opt);
  ASSERT_FALSE(r.history.empty());
  for (size_t i = 0; i < r.history.size(); ++i) {
    const auto& h = r.history[i];
    EXPECT_EQ(h.iter, static_cast<int>(i) + 1);
    if (i > 0) {
      EXPECT_GE(h.beta, r.history[i - 1].beta);
      if (h.objective > r.history[i - 1].objective)
        EXPECT_EQ(r.history[i].beta_increase, 0.0) << "iteration " << h.iter;
    }
  }
  EXPECT_GE(r.design.design.minCoeff(), 0.0);
  EXPECT_LE(r.design.design.maxCoeff(), 1.0);
  EXPECT_GE(r.design.physical.minCoeff(), 0.0);
  EXPECT_LE(r.design.physical.maxCoeff(), 1.0);
  if (r.termination == Termination::Converged) EXPECT_LT(r.history.back().gray, 0.01);
}

TEST(Property, RunsAreDeterministic) {
  const ProblemSpec spec = mbb(16, 6, 0.5, 1.5);
  RunOptions opt;
  opt.max_iters = 40;
  const RunResult a = run_optimization(spec, AutomaticScheme{}, opt);
  const RunResult b = run_optimization(spec, AutomaticScheme{}, opt);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].objective, b.history[i].objective);
    EXPECT_EQ(a.history[i].beta, b.history[i].beta);
  }
  EXPECT_EQ(a.design.physical, b.design.physical);
}

TEST(Property, BucklingRunDeterministic) {
  const ProblemSpec spec = topo::testing::cantilever_column(6, 18);
  RunOptions opt;
  opt.max_iters = 6;
  const RunResult a = run_optimization(spec, AutomaticScheme{}, opt);
  const RunResult b = run_optimization(spec, AutomaticScheme{}, opt);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].objective, b.history[i].objective);
}
