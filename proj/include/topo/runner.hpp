#pragma once

// Config parsing, run orchestration and output artifacts.
//
// Config files are flat `key = value` lines with dotted section keys and `#`
// comments. Lists use brackets: `schemes = [default, modified, automatic]`.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "topo/continuation.hpp"
#include "topo/optimize.hpp"
#include "topo/problems.hpp"

namespace topo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  std::string name = "mbb";
  int nelx = 60;
  int nely = 20;
  double volfrac = 0.5;
  double rmin = 4.0;  // in element lengths; native element lengths for the column
  int scale = 4;
  ColumnVariant variant = ColumnVariant::MaxBuckling;
  bool stability = true;
  double load = 2e5;
  double penal = 3.0;
};

struct RunConfig {
  ProblemConfig problem;
  std::string scheme = "automatic";
  AutomaticScheme automatic;
  SteppedScheme stepped;
  ConstantScheme constant;
  std::vector<std::string> schemes;  // comparison mode when non-empty
  RunOptions options;
  std::string out_dir = "out";
  bool write_pgm = true;
  bool write_csv = true;
  bool write_summary = true;
};

// ---------------------------------------------------------------- formatting

/// Shortest round-trip representation, locale independent.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf;
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

/// Scientific notation with `digits` significant digits, e.g. 9.10e-03.
inline std::string format_scientific(double v, int digits = 3) {
  if (!std::isfinite(v)) return format_number(v);
  std::array<char, 64> buf;
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::scientific, digits - 1);
  return std::string(buf.data(), r.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return format_number(v);
  std::array<char, 64> buf;
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
  return std::string(buf.data(), r.ptr);
}

// ------------------------------------------------------------------- parsing

namespace detail {

inline std::string trim(std::string_view s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

class KeyValues {
 public:
  void set(const std::string& key, std::string value, int line) {
    if (values_.count(key)) throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    values_[key] = std::move(value);
  }

  std::optional<std::string> take(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  void take_string(const std::string& key, std::string& out) {
    if (auto v = take(key)) out = *v;
  }

  void take_double(const std::string& key, double& out) {
    const auto v = take(key);
    if (!v) return;
    double d = 0.0;
    const auto r = std::from_chars(v->data(), v->data() + v->size(), d);
    if (r.ec != std::errc() || r.ptr != v->data() + v->size() || !std::isfinite(d))
      throw ConfigError(key + ": expected a number, got '" + *v + "'");
    out = d;
  }

  void take_int(const std::string& key, int& out) {
    const auto v = take(key);
    if (!v) return;
    int i = 0;
    const auto r = std::from_chars(v->data(), v->data() + v->size(), i);
    if (r.ec != std::errc() || r.ptr != v->data() + v->size())
      throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    out = i;
  }

  void take_bool(const std::string& key, bool& out) {
    const auto v = take(key);
    if (!v) return;
    if (*v == "true")
      out = true;
    else if (*v == "false")
      out = false;
    else
      throw ConfigError(key + ": expected true or false, got '" + *v + "'");
  }

  void take_list(const std::string& key, std::vector<std::string>& out) {
    const auto v = take(key);
    if (!v) return;
    if (v->size() < 2 || v->front() != '[' || v->back() != ']')
      throw ConfigError(key + ": expected a bracketed list, got '" + *v + "'");
    out.clear();
    std::stringstream ss(v->substr(1, v->size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(key + ": empty list entry");
      out.push_back(item);
    }
  }

  void reject_leftovers() const {
    if (!values_.empty()) throw ConfigError("unknown key '" + values_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> values_;
};

inline void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace detail

/// Canonical scheme name, accepting the short forms used in lists and on the
/// command line.
inline std::string canonical_scheme(const std::string& name) {
  if (name == "automatic" || name == "auto") return "automatic";
  if (name == "default" || name == "stepped-default") return "default";
  if (name == "modified" || name == "stepped-modified") return "modified";
  if (name == "stepped") return "stepped";
  if (name == "constant") return "constant";
  throw ConfigError("unknown scheme '" + name + "'");
}

inline SchemeConfig scheme_from(const RunConfig& cfg, const std::string& name) {
  const std::string s = canonical_scheme(name);
  if (s == "automatic") return cfg.automatic;
  if (s == "constant") return cfg.constant;
  if (s == "stepped") return cfg.stepped;
  SteppedScheme st = s == "default" ? SteppedScheme::standard() : SteppedScheme::modified();
  st.freeze_on_gray = cfg.stepped.freeze_on_gray;
  st.epsilon = cfg.stepped.epsilon;
  return st;
}

inline RunConfig parse_config(const std::string& text) {
  detail::KeyValues kv;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": missing key");
    if (value.empty()) throw ConfigError(key + ": missing value");
    kv.set(key, value, line);
  }

  RunConfig c;
  auto& p = c.problem;
  kv.take_string("problem", p.name);
  kv.take_string("problem.name", p.name);
  detail::check(p.name == "mbb" || p.name == "column" || p.name == "cantilever", "problem",
                "must be mbb, column or cantilever");
  kv.take_int("problem.nelx", p.nelx);
  kv.take_int("problem.nely", p.nely);
  kv.take_double("problem.volfrac", p.volfrac);
  kv.take_double("problem.rmin", p.rmin);
  kv.take_int("problem.scale", p.scale);
  std::string variant = "max-buckling";
  kv.take_string("problem.variant", variant);
  detail::check(variant == "max-buckling" || variant == "min-volume", "problem.variant",
                "must be max-buckling or min-volume");
  p.variant = variant == "min-volume" ? ColumnVariant::MinVolume : ColumnVariant::MaxBuckling;
  kv.take_bool("problem.stability", p.stability);
  kv.take_double("problem.load", p.load);
  kv.take_double("material.penal", p.penal);
  detail::check(p.nelx >= 1 && p.nely >= 1, "problem.nelx", "mesh dimensions must be >= 1");
  detail::check(p.volfrac > 0.0 && p.volfrac <= 1.0, "problem.volfrac", "must be in (0, 1]");
  detail::check(p.rmin > 0.0, "problem.rmin", "must be positive");
  detail::check(p.scale == 1 || p.scale == 2 || p.scale == 4, "problem.scale", "must be 1, 2 or 4");
  detail::check(p.load > 0.0, "problem.load", "must be positive");
  detail::check(p.penal >= 1.0, "material.penal", "must be >= 1");

  kv.take_string("scheme.type", c.scheme);
  c.scheme = canonical_scheme(c.scheme);
  if (c.scheme == "default") c.stepped = SteppedScheme::standard();
  if (c.scheme == "modified") c.stepped = SteppedScheme::modified();
  kv.take_int("scheme.hold", c.stepped.hold_iters);
  kv.take_double("scheme.step", c.stepped.step);
  kv.take_int("scheme.interval", c.stepped.interval);
  kv.take_double("scheme.cap", c.stepped.beta_cap);
  kv.take_bool("scheme.freeze_on_gray", c.stepped.freeze_on_gray);
  kv.take_double("scheme.beta", c.constant.beta);
  detail::check(c.stepped.hold_iters >= 0, "scheme.hold", "must be >= 0");
  detail::check(c.stepped.step >= 0.0, "scheme.step", "must be >= 0");
  detail::check(c.stepped.interval >= 1, "scheme.interval", "must be >= 1");
  detail::check(c.stepped.beta_cap >= 1.0, "scheme.cap", "must be >= 1");
  detail::check(c.constant.beta >= 0.0, "scheme.beta", "must be >= 0");
  kv.take_list("schemes", c.schemes);
  for (auto& s : c.schemes) s = canonical_scheme(s);
  for (size_t i = 0; i < c.schemes.size(); ++i)
    for (size_t j = 0; j < i; ++j)
      detail::check(c.schemes[i] != c.schemes[j], "schemes", "duplicate entry '" + c.schemes[i] + "'");

  auto& o = c.options;
  kv.take_double("continuation.gamma", c.automatic.gamma);
  kv.take_double("continuation.cap_fraction", c.automatic.cap_fraction);
  kv.take_double("continuation.epsilon", c.automatic.epsilon);
  kv.take_double("continuation.beta_max", o.beta_total_max);
  kv.take_bool("continuation.abs_numerator", o.absolute_numerator);
  detail::check(c.automatic.gamma > 0.0, "continuation.gamma", "must be positive");
  detail::check(c.automatic.cap_fraction > 0.0, "continuation.cap_fraction", "must be positive");
  detail::check(c.automatic.epsilon >= 0.0 && c.automatic.epsilon < 1.0, "continuation.epsilon", "must be in [0, 1)");
  detail::check(o.beta_total_max >= 1.0, "continuation.beta_max", "must be >= 1");
  c.stepped.epsilon = c.automatic.epsilon;

  kv.take_double("projection.eta", o.eta);
  detail::check(o.eta > 0.0 && o.eta < 1.0, "projection.eta", "must be in (0, 1)");

  std::string opt = "auto";
  kv.take_string("optimizer.type", opt);
  if (opt == "auto")
    o.optimizer = OptimizerKind::Auto;
  else if (opt == "oc")
    o.optimizer = OptimizerKind::OC;
  else if (opt == "mma")
    o.optimizer = OptimizerKind::MMA;
  else
    throw ConfigError("optimizer.type: must be auto, oc or mma");
  kv.take_double("optimizer.oc_move", o.oc.move);
  kv.take_double("optimizer.oc_damping", o.oc.damping);
  kv.take_bool("optimizer.oc_adaptive_move", o.oc.adaptive_move);
  kv.take_double("optimizer.mma_move", o.mma.move);
  kv.take_double("optimizer.mma_asymin", o.mma.asymin);
  detail::check(o.oc.move > 0.0 && o.oc.move <= 1.0, "optimizer.oc_move", "must be in (0, 1]");
  detail::check(o.oc.damping > 0.0 && o.oc.damping <= 1.0, "optimizer.oc_damping", "must be in (0, 1]");
  detail::check(o.mma.move > 0.0 && o.mma.move <= 1.0, "optimizer.mma_move", "must be in (0, 1]");
  detail::check(o.mma.asymin > 0.0 && o.mma.asymin <= o.mma.asyinit, "optimizer.mma_asymin",
                "must be in (0, asyinit]");

  std::string eig = "lanczos";
  kv.take_string("eigen.method", eig);
  if (eig == "lanczos")
    o.analysis.eigen.method = EigenMethod::Lanczos;
  else if (eig == "subspace")
    o.analysis.eigen.method = EigenMethod::SubspaceIteration;
  else
    throw ConfigError("eigen.method: must be lanczos or subspace");
  kv.take_double("eigen.tolerance", o.analysis.eigen.tolerance);
  detail::check(o.analysis.eigen.tolerance > 0.0, "eigen.tolerance", "must be positive");
  std::string lin = "cholesky";
  kv.take_string("solver", lin);
  if (lin == "cholesky")
    o.analysis.solver = LinearSolver::Kind::Cholesky;
  else if (lin == "cg")
    o.analysis.solver = LinearSolver::Kind::ConjugateGradient;
  else
    throw ConfigError("solver: must be cholesky or cg");

  kv.take_int("stop.max_iters", o.max_iters);
  kv.take_double("stop.gray", o.stop.gray);
  kv.take_double("stop.relative_change", o.stop.relative_change);
  kv.take_double("stop.constraint_tol", o.constraint_tolerance);
  detail::check(o.max_iters >= 1, "stop.max_iters", "must be >= 1");
  detail::check(o.stop.gray > 0.0, "stop.gray", "must be positive");
  detail::check(o.stop.relative_change > 0.0, "stop.relative_change", "must be positive");
  detail::check(o.constraint_tolerance >= 0.0, "stop.constraint_tol", "must be >= 0");

  kv.take_string("output.dir", c.out_dir);
  kv.take_bool("output.pgm", c.write_pgm);
  kv.take_bool("output.csv", c.write_csv);
  kv.take_bool("output.summary", c.write_summary);

  kv.reject_leftovers();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline ProblemSpec make_problem(const ProblemConfig& p) {
  ProblemSpec spec;
  if (p.name == "mbb")
    spec = mbb(p.nelx, p.nely, p.volfrac, p.rmin);
  else if (p.name == "column")
    spec = compressed_column(p.scale, p.rmin, p.variant);
  else
    spec = cantilever_linear(p.nelx, p.stability, p.load);
  spec.material.penal = p.penal;
  return spec;
}

// ------------------------------------------------------------------- outputs

inline std::string history_csv(const std::vector<IterationRecord>& history) {
  size_t ncon = history.empty() ? 0 : history.front().constraints.size();
  std::string s = "iter,objective,volume,gray,beta,change";
  for (size_t i = 1; i <= ncon; ++i) s += ",constraint_" + std::to_string(i);
  s += "\n";
  for (const auto& r : history) {
    s += std::to_string(r.iter) + "," + format_number(r.objective) + "," + format_number(r.volume) + "," +
         format_number(r.gray) + "," + format_number(r.beta) + "," + format_number(r.change);
    for (double g : r.constraints) s += "," + format_number(g);
    s += "\n";
  }
  return s;
}

/// Plain PGM, one pixel per element, solid black.
inline std::string density_pgm(const GridMesh& mesh, const Vector& xphys) {
  if (xphys.size() != mesh.num_elements()) throw std::invalid_argument("density_pgm: field length mismatch");
  std::string s = "P2\n" + std::to_string(mesh.nelx) + " " + std::to_string(mesh.nely) + "\n255\n";
  for (int ey = 0; ey < mesh.nely; ++ey) {
    for (int ex = 0; ex < mesh.nelx; ++ex) {
      const double v = std::clamp(xphys[mesh.element_id(ex, ey)], 0.0, 1.0);
      if (ex) s += ' ';
      s += std::to_string(static_cast<int>(std::lround(255.0 * (1.0 - v))));
    }
    s += '\n';
  }
  return s;
}

struct RunSummary {
  std::string problem;
  std::string scheme;
  std::string optimizer;
  std::string termination;  // converged, cap or error
  std::string error;
  int iterations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double gray = std::numeric_limits<double>::quiet_NaN();
  double volume = std::numeric_limits<double>::quiet_NaN();
  double load_factor = std::numeric_limits<double>::quiet_NaN();  // K-S aggregated, buckling problems only
  double lambda1 = std::numeric_limits<double>::quiet_NaN();
};

inline std::string summary_text(const RunSummary& s) {
  std::string t;
  t += "problem: " + s.problem + "\n";
  t += "scheme: " + s.scheme + "\n";
  t += "optimizer: " + s.optimizer + "\n";
  t += "termination: " + s.termination + "\n";
  if (!s.error.empty()) t += "error: " + s.error + "\n";
  t += "iterations: " + std::to_string(s.iterations) + "\n";
  t += "objective: " + format_number(s.objective) + "\n";
  if (std::isfinite(s.load_factor)) {
    t += "buckling_load_factor: " + format_number(s.load_factor) + "\n";
    t += "lambda_1: " + format_number(s.lambda1) + "\n";
  }
  t += "volume: " + format_number(s.volume) + "\n";
  t += "beta: " + format_number(s.beta) + "\n";
  t += "gray: " + format_scientific(s.gray) + "\n";
  return t;
}

/// Aligned comparison table, one row per summary in the given order.
inline std::string compare_report(const std::vector<RunSummary>& runs) {
  if (runs.size() < 2) throw std::invalid_argument("compare_report: need at least two runs");
  for (const auto& r : runs)
    if (r.problem != runs.front().problem) throw std::invalid_argument("compare_report: runs are of different problems");
  const bool buckling = std::any_of(runs.begin(), runs.end(), [](const RunSummary& r) { return std::isfinite(r.load_factor); });
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"scheme", "objective"};
  if (buckling) head.push_back("load_factor");
  head.insert(head.end(), {"iterations", "beta", "gray", "termination"});
  rows.push_back(head);
  for (const auto& r : runs) {
    std::vector<std::string> row = {r.scheme, format_fixed(r.objective, 6)};
    if (buckling) row.push_back(format_fixed(r.load_factor, 4));
    row.insert(row.end(), {std::to_string(r.iterations), format_fixed(r.beta, 2), format_scientific(r.gray),
                           r.termination});
    rows.push_back(row);
  }
  std::vector<size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  std::string t;
  for (size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (size_t j = 0; j < rows[i].size(); ++j) {
      if (j) line += "  ";
      line += rows[i][j];
      if (j + 1 < rows[i].size()) line += std::string(width[j] - rows[i][j].size(), ' ');
    }
    t += line + "\n";
    if (i == 0) {
      size_t total = 0;
      for (size_t w : width) total += w;
      t += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return t;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// --------------------------------------------------------------- orchestration

inline int exit_code(const RunSummary& s) {
  if (s.termination == "converged") return 0;
  if (s.termination == "cap") return 2;
  return 1;
}

/// One run with one scheme, writing artifacts into `dir`.
inline RunSummary run_single(const RunConfig& cfg, const std::string& scheme, const std::filesystem::path& dir) {
  RunSummary s;
  s.problem = cfg.problem.name;
  s.scheme = canonical_scheme(scheme);
  std::filesystem::create_directories(dir);
  try {
    const ProblemSpec spec = make_problem(cfg.problem);
    s.optimizer = optimizer_name(resolve_optimizer(cfg.options.optimizer, spec));
    const RunResult res = run_optimization(spec, scheme_from(cfg, s.scheme), cfg.options);
    const IterationRecord& last = res.history.back();
    s.termination = termination_name(res.termination);
    s.iterations = last.iter;
    s.objective = last.objective;
    s.beta = last.beta;
    s.gray = last.gray;
    s.volume = last.volume;
    if (!res.load_factors.empty()) {
      s.load_factor = res.ks_load_factor;
      s.lambda1 = res.load_factors.front();
    }
    if (cfg.write_csv) write_file(dir / "history.csv", history_csv(res.history));
    if (cfg.write_pgm) write_file(dir / "density_final.pgm", density_pgm(spec.mesh, res.design.physical));
  } catch (const std::exception& e) {
    s.termination = "error";
    s.error = e.what();
  }
  if (cfg.write_summary) write_file(dir / "summary.txt", summary_text(s));
  return s;
}

struct RunReport {
  std::vector<RunSummary> runs;
  std::string comparison;  // empty for a single run
  int status = 0;
};

/// Single run into `cfg.out_dir`, or, when `cfg.schemes` lists several, one
/// run per scheme in sibling directories plus `comparison.txt`.
inline RunReport run(const RunConfig& cfg) {
  RunReport rep;
  const std::filesystem::path out(cfg.out_dir);
  if (cfg.schemes.empty()) {
    rep.runs.push_back(run_single(cfg, cfg.scheme, out));
    rep.status = exit_code(rep.runs.front());
    return rep;
  }
  rep.runs.resize(cfg.schemes.size());
  std::vector<std::thread> workers;
  for (size_t i = 0; i < cfg.schemes.size(); ++i)
    workers.emplace_back([&, i] { rep.runs[i] = run_single(cfg, cfg.schemes[i], out / cfg.schemes[i]); });
  for (auto& w : workers) w.join();
  bool failed = false, capped = false;
  for (const auto& r : rep.runs) {
    failed |= exit_code(r) == 1;
    capped |= exit_code(r) == 2;
  }
  rep.status = failed ? 1 : (capped ? 2 : 0);
  if (rep.runs.size() >= 2) {
    rep.comparison = compare_report(rep.runs);
    write_file(out / "comparison.txt", rep.comparison);
  }
  return rep;
}

}  // namespace topo
