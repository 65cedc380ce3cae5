#pragma once

// Projection-sharpness (beta) scheduling.
//
// The automatic scheme grows beta every iteration by an amount tied to how
// much the objective is still moving:
//
//   dbeta_k    = max( -(gamma/2) (f_k + f_{k-1}) / (f_k - f_{k-1}), 0 )
//   beta_{k+1} = beta_k + min(dbeta_k, cap_fraction * beta_k)
//
// and only while the gray level of the physical field exceeds epsilon. The
// stepped schemes hold beta = 1 for a number of iterations and then add a
// fixed step at a fixed interval up to a cap.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace topo {

struct AutomaticScheme {
  double gamma = 1e-4;
  double cap_fraction = 0.2;
  double epsilon = 0.01;
};

struct SteppedScheme {
  int hold_iters = 400;
  double step = 2.0;
  int interval = 25;
  double beta_cap = 25.0;
  bool freeze_on_gray = true;  // stop stepping once gray level <= epsilon
  double epsilon = 0.01;

  /// beta = 1 for 400 iterations, then +2 every 25 iterations up to 25.
  static SteppedScheme standard() { return {}; }
  /// beta = 1 for 200 iterations, then +2 every 25 iterations up to 500.
  static SteppedScheme modified() {
    SteppedScheme s;
    s.hold_iters = 200;
    s.beta_cap = 500.0;
    return s;
  }
};

struct ConstantScheme {
  double beta = 1.0;
};

using SchemeConfig = std::variant<AutomaticScheme, SteppedScheme, ConstantScheme>;

inline std::string scheme_name(const SchemeConfig& s) {
  if (std::holds_alternative<AutomaticScheme>(s)) return "automatic";
  if (std::holds_alternative<ConstantScheme>(s)) return "constant";
  const auto& st = std::get<SteppedScheme>(s);
  if (st.hold_iters == 400 && st.step == 2.0 && st.interval == 25 && st.beta_cap == 25.0) return "default";
  if (st.hold_iters == 200 && st.step == 2.0 && st.interval == 25 && st.beta_cap == 500.0) return "modified";
  return "stepped";
}

inline void validate(const SchemeConfig& s) {
  if (const auto* a = std::get_if<AutomaticScheme>(&s)) {
    if (!(a->gamma > 0.0)) throw std::invalid_argument("automatic scheme: gamma must be positive");
    if (!(a->cap_fraction > 0.0)) throw std::invalid_argument("automatic scheme: cap_fraction must be positive");
    if (!(a->epsilon >= 0.0 && a->epsilon < 1.0)) throw std::invalid_argument("automatic scheme: epsilon must be in [0, 1)");
  } else if (const auto* st = std::get_if<SteppedScheme>(&s)) {
    if (st->hold_iters < 0) throw std::invalid_argument("stepped scheme: hold_iters must be >= 0");
    if (!(st->step >= 0.0)) throw std::invalid_argument("stepped scheme: step must be >= 0");
    if (st->interval < 1) throw std::invalid_argument("stepped scheme: interval must be >= 1");
    if (!(st->beta_cap >= 1.0)) throw std::invalid_argument("stepped scheme: beta_cap must be >= 1");
  } else {
    if (!(std::get<ConstantScheme>(s).beta >= 0.0)) throw std::invalid_argument("constant scheme: beta must be >= 0");
  }
}

struct ContinuationState {
  double beta = 1.0;
  double beta_total_max = 512.0;
  std::optional<double> f_prev;
  int iter = 1;              // iteration whose results are fed to the next advance
  double last_increase = 0;  // beta_{k+1} - beta_k applied by the last advance
  bool absolute_numerator = false;
};

/// Raw increase from two consecutive objective values. An unchanged objective
/// gives +infinity, to be bounded by the caller's cap.
inline double delta_beta(double f_k, double f_km1, double gamma, bool absolute_numerator = false) {
  if (!std::isfinite(f_k) || !std::isfinite(f_km1)) throw std::invalid_argument("delta_beta: non-finite objective");
  if (f_k == f_km1) return std::numeric_limits<double>::infinity();
  const double num = absolute_numerator ? std::abs(f_k) + std::abs(f_km1) : f_k + f_km1;
  return std::max(-0.5 * gamma * num / (f_k - f_km1), 0.0);
}

inline void advance_automatic(ContinuationState& st, const AutomaticScheme& scheme, double f_k, double gray) {
  st.last_increase = 0.0;
  if (st.f_prev && gray > scheme.epsilon) {
    const double raw = delta_beta(f_k, *st.f_prev, scheme.gamma, st.absolute_numerator);
    const double next = std::min(st.beta + std::min(raw, scheme.cap_fraction * st.beta), st.beta_total_max);
    st.last_increase = std::max(next - st.beta, 0.0);
    st.beta += st.last_increase;
  }
  st.f_prev = f_k;
  ++st.iter;
}

inline void advance_stepped(ContinuationState& st, const SteppedScheme& scheme, double f_k, double gray) {
  st.last_increase = 0.0;
  const int next = st.iter + 1;
  const bool due = next > scheme.hold_iters && (next - scheme.hold_iters - 1) % scheme.interval == 0;
  const bool frozen = scheme.freeze_on_gray && gray <= scheme.epsilon;
  if (due && !frozen) {
    const double target = std::min({st.beta + scheme.step, scheme.beta_cap, st.beta_total_max});
    st.last_increase = std::max(target - st.beta, 0.0);
    st.beta += st.last_increase;
  }
  st.f_prev = f_k;
  ++st.iter;
}

/// Stateful scheduler for one optimization run.
class Continuation {
 public:
  explicit Continuation(SchemeConfig scheme, double beta_total_max = 512.0, bool absolute_numerator = false)
      : scheme_(std::move(scheme)) {
    validate(scheme_);
    if (!(beta_total_max >= 1.0)) throw std::invalid_argument("beta_total_max must be >= 1");
    state_.beta_total_max = beta_total_max;
    state_.absolute_numerator = absolute_numerator;
    if (const auto* c = std::get_if<ConstantScheme>(&scheme_)) state_.beta = std::min(c->beta, beta_total_max);
  }

  double beta() const { return state_.beta; }
  const ContinuationState& state() const { return state_; }
  const SchemeConfig& scheme() const { return scheme_; }

  /// Feed the objective and gray level of the iteration just analyzed; sets
  /// beta for the next one.
  void advance(double f_k, double gray) {
    if (const auto* a = std::get_if<AutomaticScheme>(&scheme_)) {
      advance_automatic(state_, *a, f_k, gray);
    } else if (const auto* s = std::get_if<SteppedScheme>(&scheme_)) {
      advance_stepped(state_, *s, f_k, gray);
    } else {
      state_.last_increase = 0.0;
      state_.f_prev = f_k;
      ++state_.iter;
    }
  }

 private:
  SchemeConfig scheme_;
  ContinuationState state_;
};

inline double relative_change(double f_k, double f_km1) {
  return std::abs(f_k - f_km1) / std::max(std::abs(f_k), 1e-30);
}

struct StopCriteria {
  double gray = 0.01;
  double relative_change = 1e-5;
};

inline bool should_stop(double gray, double rel_obj_change, bool constraints_satisfied, const StopCriteria& c = {}) {
  return gray < c.gray && rel_obj_change < c.relative_change && constraints_satisfied;
}

}  // namespace topo
