#pragma once

// Design updates (OC, MMA), response evaluation and the optimization loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topo/continuation.hpp"
#include "topo/eigensolver.hpp"
#include "topo/fea.hpp"
#include "topo/linear_solver.hpp"
#include "topo/mma.hpp"
#include "topo/problems.hpp"
#include "topo/threefield.hpp"

namespace topo {

struct OCParams {
  double move = 0.2;
  double damping = 0.5;
  double tolerance = 1e-6;  // relative bisection width on the multiplier
  double lambda_max = 1e9;
  // Per-element move limits that shrink when an element reverses direction
  // and recover otherwise; `move` stays the ceiling.
  bool adaptive_move = true;
  double move_shrink = 0.7;
  double move_grow = 1.2;
  double move_floor = 0.01;
};

/// Per-element step memory for adaptive move limits.
struct OCState {
  Vector move;
  Vector last_step;
};

/// Optimality-criteria update for one volume constraint. `volume_of` maps a
/// candidate design to the volume measure being constrained, so the bisection
/// can act on the projected field. Entries listed in `pinned` are left as is.
inline Vector oc_update(const Vector& x, const Vector& df, const Vector& dv, double target,
                        const std::function<double(const Vector&)>& volume_of, const OCParams& p = {},
                        const std::vector<int>& pinned = {}, OCState* state = nullptr) {
  const auto n = x.size();
  if (df.size() != n || dv.size() != n) throw std::invalid_argument("oc_update: length mismatch");
  if (!(p.move > 0.0) || !(p.damping > 0.0)) throw std::invalid_argument("oc_update: bad parameters");
  const double gmax = std::max(df.cwiseAbs().maxCoeff(), 1e-300);
  const double vmax = std::max(dv.cwiseAbs().maxCoeff(), 1e-300);
  // Ratio -df/dv with both factors guarded away from zero and sign-clipped.
  Vector ratio(n);
  for (Eigen::Index e = 0; e < n; ++e) {
    const double g = std::max(-df[e], 1e-12 * gmax);
    const double v = std::max(dv[e], 1e-12 * vmax);
    ratio[e] = g / v;
  }
  std::vector<char> is_pinned(n, 0);
  for (int e : pinned) is_pinned[e] = 1;
  const bool adaptive = p.adaptive_move && state;
  if (adaptive && state->move.size() != n) {
    state->move = Vector::Constant(n, p.move);
    state->last_step = Vector::Zero(n);
  }
  const auto candidate = [&](double lmid) {
    Vector xn(n);
    for (Eigen::Index e = 0; e < n; ++e) {
      if (is_pinned[e]) {
        xn[e] = x[e];
        continue;
      }
      const double be = std::pow(ratio[e] / lmid, p.damping);
      const double mv = adaptive ? state->move[e] : p.move;
      const double lo = std::max(0.0, x[e] - mv), hi = std::min(1.0, x[e] + mv);
      xn[e] = std::clamp(x[e] * be, lo, hi);
    }
    return xn;
  };
  double l1 = 0.0, l2 = p.lambda_max;
  Vector xn = candidate(0.5 * (l1 + l2));
  while ((l2 - l1) / (l1 + l2) > p.tolerance) {
    const double lmid = 0.5 * (l1 + l2);
    xn = candidate(lmid);
    if (volume_of(xn) > target)
      l1 = lmid;
    else
      l2 = lmid;
  }
  if (adaptive) {
    for (Eigen::Index e = 0; e < n; ++e) {
      const double step = xn[e] - x[e];
      const double prod = step * state->last_step[e];
      if (prod < 0.0)
        state->move[e] = std::max(p.move_floor, state->move[e] * p.move_shrink);
      else if (prod > 0.0)
        state->move[e] = std::min(p.move, state->move[e] * p.move_grow);
      state->last_step[e] = step;
    }
  }
  return xn;
}

struct AnalysisOptions {
  LinearSolver::Kind solver = LinearSolver::Kind::Cholesky;
  EigenOptions eigen;
  bool buckling_adjoint = true;
};

struct Evaluation {
  DesignField field;
  double objective = 0.0;
  Vector objective_gradient;  // w.r.t. design variables
  Vector constraints;         // normalized, feasible when <= 0
  Matrix constraint_gradients;
  double volume = 0.0;
  double gray = 0.0;
  double compliance = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> load_factors;
  double ks_load_factor = std::numeric_limits<double>::quiet_NaN();  // 1 / KS(1/lambda)
  bool eig_incomplete = false;
  bool eig_repeated = false;
};

/// Holds the filter, finite element model and solver state of one problem.
class ProblemEvaluator {
 public:
  explicit ProblemEvaluator(const ProblemSpec& spec, AnalysisOptions opt = {})
      : spec_(spec), opt_(opt), filter_(build_filter(spec.mesh, spec.rmin)), model_(spec.mesh, spec.supports, spec.material.nu),
        solver_(opt.solver) {
    validate(spec_);
    f_ = model_.load_vector(spec_.loads);
    for (int e : spec_.passive.solid) pinned_.push_back(e);
    for (int e : spec_.passive.void_) pinned_.push_back(e);
    std::sort(pinned_.begin(), pinned_.end());
  }

  const ProblemSpec& spec() const { return spec_; }
  const FilterOperator& filter() const { return filter_; }
  const FeModel& model() const { return model_; }
  const std::vector<int>& pinned() const { return pinned_; }

  DesignField physical(const Vector& x, const ProjectionParams& proj) const {
    return evaluate_design(filter_, x, proj, spec_.passive);
  }

  double physical_volume(const Vector& x, const ProjectionParams& proj) const {
    return physical(x, proj).physical.mean();
  }

  /// Initial design: uniform, with passive elements at their fixed values.
  Vector initial_design() const {
    Vector x = Vector::Constant(spec_.mesh.num_elements(), spec_.initial_density);
    for (int e : spec_.passive.solid) x[e] = 1.0;
    for (int e : spec_.passive.void_) x[e] = 0.0;
    return x;
  }

  Evaluation evaluate(const Vector& x, const ProjectionParams& proj) {
    const int ne = spec_.mesh.num_elements();
    if (x.size() != ne) throw std::invalid_argument("evaluate: design length mismatch");
    Evaluation ev;
    ev.field = physical(x, proj);
    const Vector& xp = ev.field.physical;
    ev.volume = xp.mean();
    ev.gray = gray_level(xp);

    const bool need_compliance =
        spec_.objective == Objective::Compliance ||
        std::any_of(spec_.constraints.begin(), spec_.constraints.end(),
                    [](const Constraint& c) { return c.kind == ConstraintKind::Compliance; });
    const bool need_buckling = spec_.needs_buckling();

    Vector dcomp, dks;
    double ks_mu = 0.0;
    if (need_compliance || need_buckling) {
      const Vector young = young_field(xp, spec_.material);
      k_ = model_.assemble_stiffness(young);
      solver_.factorize(k_);
      const Vector u = model_.expand(solver_.solve(model_.reduce(f_)));
      if (need_compliance) {
        const auto c = compliance_and_sensitivity(model_, u, f_, xp, spec_.material);
        ev.compliance = c.value;
        dcomp = c.sensitivity;
      }
      if (need_buckling) {
        const SparseMatrix ks = model_.assemble_stress_stiffness(young, u);
        const BucklingResult eig =
            buckling_eigs(k_, ks, solver_, spec_.modes, warm_ ? &*warm_ : nullptr, opt_.eigen);
        if (eig.values.empty()) throw std::runtime_error("no positive buckling load factor: structure is not compressed");
        warm_ = eig.vectors;
        ev.load_factors = eig.values;
        ev.eig_incomplete = eig.incomplete;
        const auto sens = buckling_sensitivity(eig, model_, solver_, u, xp, spec_.material, opt_.buckling_adjoint);
        ev.eig_repeated = sens.repeated;
        std::vector<double> mu(eig.values.size());
        for (size_t i = 0; i < mu.size(); ++i) mu[i] = 1.0 / eig.values[i];
        const KsResult ks_res = ks_aggregate(mu, spec_.ks_rho);
        ks_mu = ks_res.value;
        ev.ks_load_factor = 1.0 / ks_mu;
        dks = Vector::Zero(ne);
        for (size_t i = 0; i < mu.size(); ++i)
          dks -= ks_res.weights[i] * mu[i] * mu[i] * sens.dlambda.row(static_cast<Eigen::Index>(i)).transpose();
      }
    }

    const auto to_design = [&](const Vector& d) { return chain_to_design(d, filter_, ev.field.slope, spec_.passive); };
    const Vector dvol = Vector::Constant(ne, 1.0 / ne);
    switch (spec_.objective) {
      case Objective::Compliance:
        ev.objective = ev.compliance;
        ev.objective_gradient = to_design(dcomp);
        break;
      case Objective::InverseBucklingKS:
        ev.objective = ks_mu;
        ev.objective_gradient = to_design(dks);
        break;
      case Objective::Volume:
        ev.objective = ev.volume;
        ev.objective_gradient = to_design(dvol);
        break;
    }

    const auto m = static_cast<Eigen::Index>(spec_.constraints.size());
    ev.constraints.resize(m);
    ev.constraint_gradients.resize(m, ne);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Constraint& c = spec_.constraints[i];
      switch (c.kind) {
        case ConstraintKind::Volume:
          ev.constraints[i] = ev.volume / c.bound - 1.0;
          ev.constraint_gradients.row(i) = to_design(dvol / c.bound).transpose();
          break;
        case ConstraintKind::Buckling:
          ev.constraints[i] = c.bound * ks_mu - 1.0;
          ev.constraint_gradients.row(i) = to_design(c.bound * dks).transpose();
          break;
        case ConstraintKind::Compliance:
          ev.constraints[i] = ev.compliance / c.bound - 1.0;
          ev.constraint_gradients.row(i) = to_design(dcomp / c.bound).transpose();
          break;
      }
    }
    return ev;
  }

 private:
  ProblemSpec spec_;
  AnalysisOptions opt_;
  FilterOperator filter_;
  FeModel model_;
  LinearSolver solver_;
  SparseMatrix k_;  // kept alive for iterative solvers that reference it
  Vector f_;
  std::vector<int> pinned_;
  std::optional<Matrix> warm_;
};

enum class OptimizerKind { Auto, OC, MMA };

inline bool oc_applicable(const ProblemSpec& p) {
  return (p.objective == Objective::Compliance || p.objective == Objective::InverseBucklingKS) &&
         p.constraints.size() == 1 && p.constraints[0].kind == ConstraintKind::Volume;
}

// Auto picks OC only for compliance under a volume limit. OC can run the
// buckling objective when asked, but it stalls gray on the column, so MMA is
// the automatic choice there.
inline OptimizerKind resolve_optimizer(OptimizerKind requested, const ProblemSpec& p) {
  if (requested == OptimizerKind::Auto)
    return oc_applicable(p) && p.objective == Objective::Compliance ? OptimizerKind::OC : OptimizerKind::MMA;
  if (requested == OptimizerKind::OC && !oc_applicable(p))
    throw std::invalid_argument("OC handles a single volume constraint with a compliance or buckling objective");
  return requested;
}

inline std::string optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::OC: return "oc";
    case OptimizerKind::MMA: return "mma";
    default: return "auto";
  }
}

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double volume = 0.0;
  double gray = 0.0;
  double beta = 0.0;           // beta used to evaluate this iteration
  double beta_increase = 0.0;  // applied after this iteration
  double change = 0.0;         // max |x_k - x_{k-1}|
  std::vector<double> constraints;
};

enum class Termination { Converged, IterationCap };

inline std::string termination_name(Termination t) { return t == Termination::Converged ? "converged" : "cap"; }

struct RunOptions {
  int max_iters = 2000;
  StopCriteria stop;
  double constraint_tolerance = 1e-4;
  double eta = 0.5;
  double beta_total_max = 512.0;
  bool absolute_numerator = false;
  OptimizerKind optimizer = OptimizerKind::Auto;
  OCParams oc;
  MMAParams mma;
  AnalysisOptions analysis;
  std::function<void(const IterationRecord&)> on_iteration;
};

struct RunResult {
  DesignField design;
  std::vector<IterationRecord> history;
  Termination termination = Termination::IterationCap;
  OptimizerKind optimizer = OptimizerKind::OC;
  double final_beta = 1.0;
  double compliance = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> load_factors;
  double ks_load_factor = std::numeric_limits<double>::quiet_NaN();
};

inline RunResult run_optimization(const ProblemSpec& spec, const SchemeConfig& scheme, const RunOptions& opt = {}) {
  if (opt.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(opt.eta > 0.0 && opt.eta < 1.0)) throw std::invalid_argument("projection threshold must be in (0, 1)");
  ProblemEvaluator ev(spec, opt.analysis);
  Continuation cont(scheme, opt.beta_total_max, opt.absolute_numerator);
  RunResult out;
  out.optimizer = resolve_optimizer(opt.optimizer, spec);

  const int ne = spec.mesh.num_elements();
  Vector x = ev.initial_design();
  Vector x_prev = x;

  // MMA works on the non-passive variables only.
  std::vector<int> active;
  {
    std::vector<char> pin(ne, 0);
    for (int e : ev.pinned()) pin[e] = 1;
    for (int e = 0; e < ne; ++e)
      if (!pin[e]) active.push_back(e);
  }
  if (active.empty()) throw std::invalid_argument("no free design variables");
  std::optional<Mma> mma;
  if (out.optimizer == OptimizerKind::MMA)
    mma.emplace(static_cast<int>(active.size()), static_cast<int>(spec.constraints.size()), opt.mma);
  double f_scale = 1.0;
  OCState oc_state;

  std::optional<double> f_prev;
  for (int k = 1;; ++k) {
    const double beta_k = cont.beta();
    Evaluation e = ev.evaluate(x, ProjectionParams{beta_k, opt.eta});
    if (!std::isfinite(e.objective)) throw std::runtime_error("objective became non-finite at iteration " + std::to_string(k));

    IterationRecord rec;
    rec.iter = k;
    rec.objective = e.objective;
    rec.volume = e.volume;
    rec.gray = e.gray;
    rec.beta = beta_k;
    rec.change = k == 1 ? 0.0 : (x - x_prev).cwiseAbs().maxCoeff();
    rec.constraints.assign(e.constraints.data(), e.constraints.data() + e.constraints.size());

    cont.advance(e.objective, e.gray);
    rec.beta_increase = cont.state().last_increase;
    out.history.push_back(rec);
    if (opt.on_iteration) opt.on_iteration(rec);

    const bool feasible = e.constraints.size() == 0 || e.constraints.maxCoeff() <= opt.constraint_tolerance;
    const bool stop = f_prev && should_stop(e.gray, relative_change(e.objective, *f_prev), feasible, opt.stop);
    if (stop || k >= opt.max_iters) {
      out.termination = stop ? Termination::Converged : Termination::IterationCap;
      out.design = e.field;
      out.final_beta = beta_k;
      out.compliance = e.compliance;
      out.load_factors = e.load_factors;
      out.ks_load_factor = e.ks_load_factor;
      return out;
    }
    f_prev = e.objective;
    x_prev = x;

    if (out.optimizer == OptimizerKind::OC) {
      const ProjectionParams next{cont.beta(), opt.eta};
      const double target = spec.constraints[0].bound;
      const Vector dv = e.constraint_gradients.row(0).transpose();
      x = oc_update(
          x, e.objective_gradient, dv, target, [&](const Vector& c) { return ev.physical_volume(c, next); }, opt.oc,
          ev.pinned(), &oc_state);
    } else {
      if (k == 1) f_scale = 1.0 / std::max(std::abs(e.objective), 1e-300);
      const auto na = static_cast<Eigen::Index>(active.size());
      Vector xa(na), dfa(na), lo = Vector::Zero(na), hi = Vector::Ones(na);
      Matrix dga(e.constraints.size(), na);
      for (Eigen::Index j = 0; j < na; ++j) {
        xa[j] = x[active[j]];
        dfa[j] = f_scale * e.objective_gradient[active[j]];
        dga.col(j) = e.constraint_gradients.col(active[j]);
      }
      const Vector xn = mma->update(xa, dfa, e.constraints, dga, lo, hi);
      for (Eigen::Index j = 0; j < na; ++j) x[active[j]] = xn[j];
    }
  }
}

}  // namespace topo
