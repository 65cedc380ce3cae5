// Acceptance checks, one PASS/FAIL line per criterion. Exits 1 if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "helpers.hpp"
#include "topo/runner.hpp"

using namespace topo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v) { return format_number(v); }

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("topo_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome formulas() {
  Outcome o;
  for (double beta : {0.5, 1.0, 8.0, 64.0, 512.0}) {
    o.require(std::abs(project(0.0, beta)) <= 1e-12, "projection at 0, beta " + num(beta));
    o.require(std::abs(project(1.0, beta) - 1.0) <= 1e-12, "projection at 1, beta " + num(beta));
    o.require(std::abs(project(0.5, beta) - 0.5) <= 1e-12, "projection at eta, beta " + num(beta));
  }
  const struct {
    double x, g;
  } gray[] = {{0.0, 0.0}, {0.5, 1.0}, {0.25, 0.75}};
  for (const auto& c : gray) {
    const double g = gray_level(Vector::Constant(40, c.x));
    o.require(std::abs(g - c.g) <= 1e-12, "gray level of uniform " + num(c.x) + " is " + num(g));
  }
  const double d = delta_beta(0.99, 1.0, 1e-4);
  o.require(std::abs(d - 9.95e-3) <= 1e-12, "delta beta 1.0 -> 0.99 is " + num(d));
  o.require(delta_beta(1.01, 1.0, 1e-4) == 0.0, "delta beta after increase");
  o.require(delta_beta(2.0, 1.0, 1e-4) == 0.0, "delta beta after doubling");
  if (o.pass) o.detail = "projection identities, uniform gray levels and hand step sizes exact";
  return o;
}

Outcome gradients() {
  Outcome o;
  const auto p = mbb(8, 4, 0.5, 1.5);
  ProblemEvaluator ev(p);
  const Vector x = testing::wavy_design(32);
  double worst_c = 0.0, worst_v = 0.0;
  for (double beta : {1.0, 2.0, 8.0}) {
    const ProjectionParams proj{beta, 0.5};
    const Evaluation base = ev.evaluate(x, proj);
    const double h = 1e-6;
    for (int e = 0; e < 32; ++e) {
      Vector xp = x, xm = x;
      xp[e] += h;
      xm[e] -= h;
      const Evaluation a = ev.evaluate(xp, proj), b = ev.evaluate(xm, proj);
      const double fd = (a.objective - b.objective) / (2 * h);
      worst_c = std::max(worst_c, std::abs(fd - base.objective_gradient[e]) / std::abs(base.objective_gradient[e]));
      const double fdv = (a.constraints[0] - b.constraints[0]) / (2 * h);
      const double anv = base.constraint_gradients(0, e);
      worst_v = std::max(worst_v, std::abs(fdv - anv) / std::abs(anv));
    }
  }
  o.require(worst_c <= 1e-4, "compliance relative error " + num(worst_c));
  o.require(worst_v <= 1e-4, "volume relative error " + num(worst_v));

  const auto col = testing::cantilever_column(6, 18);
  const FeModel model(col.mesh, col.supports, col.material.nu);
  const auto lambda1 = [&](const Vector& xphys, BucklingSensitivity* sens) {
    const Vector young = young_field(xphys, col.material);
    const auto k = model.assemble_stiffness(young);
    LinearSolver solver;
    solver.factorize(k);
    const Vector u = model.expand(solver.solve(model.reduce(model.load_vector(col.loads))));
    EigenOptions eo;
    eo.tolerance = 1e-10;
    const auto eig = buckling_eigs(k, model.assemble_stress_stiffness(young, u), solver, 3, nullptr, eo);
    if (sens) *sens = buckling_sensitivity(eig, model, solver, u, xphys, col.material, true);
    return eig.values[0];
  };
  const Vector xp = testing::wavy_design(col.mesh.num_elements(), 0.5, 1.0);
  BucklingSensitivity sens;
  lambda1(xp, &sens);
  double worst_b = 0.0;
  const double h = 1e-5;
  for (int e = 0; e < col.mesh.num_elements(); ++e) {
    Vector a = xp, b = xp;
    a[e] += h;
    b[e] -= h;
    const double fd = (lambda1(a, nullptr) - lambda1(b, nullptr)) / (2 * h);
    worst_b = std::max(worst_b, std::abs(fd - sens.dlambda(0, e)) / std::abs(sens.dlambda(0, e)));
  }
  o.require(worst_b <= 1e-3, "buckling relative error " + num(worst_b));
  o.detail = "compliance " + format_scientific(worst_c) + ", volume " + format_scientific(worst_v) + ", buckling " +
             format_scientific(worst_b) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome euler() {
  Outcome o;
  const auto p = testing::cantilever_column(6, 60);
  const FeModel model(p.mesh, p.supports, p.material.nu);
  const Vector young = Vector::Constant(p.mesh.num_elements(), p.material.e0);
  const auto k = model.assemble_stiffness(young);
  LinearSolver solver;
  solver.factorize(k);
  const Vector u = model.expand(solver.solve(model.reduce(model.load_vector(p.loads))));
  const auto eig = buckling_eigs(k, model.assemble_stress_stiffness(young, u), solver, 1);
  const double ratio = eig.values[0] * 1e-3 / testing::euler_fixed_free(p.material.e0, 6.0, 1.0, 60.0);
  o.require(std::abs(ratio - 1.0) <= 0.05, "ratio to closed form " + num(ratio));
  if (o.pass) o.detail = "critical load / closed form = " + format_fixed(ratio, 4);
  return o;
}

struct MbbRuns {
  RunSummary automatic, stepped;
  std::vector<std::string> histories;
};

std::vector<std::vector<double>> csv_rows(const std::string& csv) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::istringstream cells(line);
    std::string c;
    while (std::getline(cells, c, ',')) r.push_back(std::stod(c));
    rows.push_back(r);
  }
  return rows;
}

RunConfig mbb_config(const std::string& scheme, int cap, const fs::path& dir) {
  RunConfig c = parse_config("problem = mbb\nproblem.nelx = 60\nproblem.nely = 20\nproblem.volfrac = 0.5\n"
                             "problem.rmin = 4\n");
  c.scheme = scheme;
  c.options.max_iters = cap;
  c.out_dir = dir.string();
  return c;
}

Outcome continuation_behaviour() {
  Outcome o;
  const auto a = run(mbb_config("automatic", 2000, scratch() / "mbb_automatic_1")).runs.front();
  const auto d = run(mbb_config("default", 800, scratch() / "mbb_default")).runs.front();
  o.require(a.termination == "converged", "automatic terminated by " + a.termination + " " + a.error);
  o.require(a.gray <= 0.01, "automatic final gray " + num(a.gray));
  o.require(a.beta > 25.0 || a.iterations < d.iterations, "automatic neither beyond beta 25 nor faster");
  o.require(d.termination == "cap", "default terminated by " + d.termination + " " + d.error);
  o.require(d.gray > 0.01, "default final gray " + num(d.gray));
  for (const char* name : {"mbb_automatic_1", "mbb_default"}) {
    const auto rows = csv_rows(read(scratch() / name / "history.csv"));
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][4] < rows[i - 1][4]) {
        o.require(false, std::string(name) + " beta fell at iteration " + num(rows[i][0]));
        break;
      }
    }
  }
  // beta after a rising iteration must equal beta at that iteration
  const auto rows = csv_rows(read(scratch() / "mbb_automatic_1" / "history.csv"));
  int rises = 0, violations = 0;
  for (size_t i = 1; i + 1 < rows.size(); ++i)
    if (rows[i][1] > rows[i - 1][1]) {
      ++rises;
      if (rows[i + 1][4] != rows[i][4]) ++violations;
    }
  o.require(violations == 0, num(violations) + " of " + num(rises) + " rising iterations increased beta");
  o.detail = "automatic: " + num(a.iterations) + " iterations, beta " + format_fixed(a.beta, 2) + ", gray " +
             format_scientific(a.gray) + "; default: " + num(d.iterations) + " iterations, gray " +
             format_scientific(d.gray) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome column_buckling() {
  Outcome o;
  RunConfig c = parse_config("problem = column\nproblem.scale = 4\nproblem.rmin = 8\nproblem.variant = max-buckling\n"
                             "scheme.type = automatic\nstop.max_iters = 2000\n");
  c.out_dir = (scratch() / "column").string();
  const auto s = run(c).runs.front();
  o.require(s.termination == "converged", "terminated by " + s.termination + " " + s.error);
  o.require(s.gray <= 0.01, "final gray " + num(s.gray));
  const auto rows = csv_rows(read(scratch() / "column" / "history.csv"));
  if (rows.size() >= 2) {
    const double f = rows.back()[1], fp = rows[rows.size() - 2][1];
    const double rel = std::abs(f - fp) / std::abs(fp);
    o.require(rel < 1e-5, "final relative change " + num(rel));
    o.require(rows.back()[6] <= 1e-4, "volume constraint " + num(rows.back()[6]));
  }
  o.require(s.load_factor >= 0.95 * s.lambda1, "aggregated " + num(s.load_factor) + " below 0.95 of " + num(s.lambda1));
  o.detail = num(s.iterations) + " iterations with " + s.optimizer + ", aggregated load factor " +
             format_fixed(s.load_factor, 3) + ", lambda_1 " + format_fixed(s.lambda1, 3) + ", gray " +
             format_scientific(s.gray) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path first = scratch() / "mbb_automatic_1", second = scratch() / "mbb_automatic_2";
  if (!fs::exists(first / "history.csv")) run(mbb_config("automatic", 2000, first));
  run(mbb_config("automatic", 2000, second));
  for (const char* f : {"history.csv", "density_final.pgm"}) {
    const std::string a = read(first / f), b = read(second / f);
    o.require(!a.empty() && a == b, std::string(f) + " differs");
  }
  if (o.pass) o.detail = "history.csv and density_final.pgm byte-identical";
  return o;
}

int cli(const fs::path& dir, const std::string& text, const std::string& extra) {
  fs::create_directories(dir);
  write_file(dir / "run.cfg", text);
  const std::string cmd = std::string("\"") + TOPO_CLI_PATH + "\" run --config \"" + (dir / "run.cfg").string() +
                          "\" --out \"" + (dir / "out").string() + "\" " + extra + " > \"" +
                          (dir / "log.txt").string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome headless() {
  Outcome o;
  const fs::path cwd = fs::current_path();
  std::vector<fs::path> before;
  for (const auto& e : fs::directory_iterator(cwd)) before.push_back(e.path());
  const fs::path dir = scratch() / "cli";
  const std::string small = "problem.nelx = 40\nproblem.nely = 20\nproblem.rmin = 2\n";
  const int converged = cli(dir / "converged", small, "");
  const int capped = cli(dir / "capped", small, "--max-iters 5");
  const int bad = cli(dir / "bad", "problem.volfrac = 2\n", "");
  const int missing = cli(dir / "missing", small, "--scheme nonexistent");
  o.require(converged == 0, "converged run exit " + num(converged));
  o.require(capped == 2, "capped run exit " + num(capped));
  o.require(bad == 1, "bad config exit " + num(bad));
  o.require(missing == 1, "unknown scheme exit " + num(missing));
  std::vector<fs::path> after;
  for (const auto& e : fs::directory_iterator(cwd)) after.push_back(e.path());
  o.require(after.size() == before.size(), "files appeared in the working directory");
  const int props = std::system(("\"" + std::string(UNIT_TESTS_PATH) +
                                 "\" --gtest_filter='Property.*:Cli.*' --gtest_brief=1 > \"" +
                                 (dir / "properties.txt").string() + "\" 2>&1")
                                    .c_str());
  o.require(WIFEXITED(props) && WEXITSTATUS(props) == 0, "property suite failed");
  if (o.pass) o.detail = "exit codes 0/2/1/1, property suite green, artifacts confined to " + scratch().string();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"formula unit suite", formulas},
      {"gradient suite", gradients},
      {"physics oracle", euler},
      {"continuation behaviour", continuation_behaviour},
      {"column buckling", column_buckling},
      {"determinism", determinism},
      {"headless properties and exit codes", headless},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << " ("
              << format_fixed(secs, 1) << " s): " << o.detail << std::endl;
  }
  fs::remove_all(scratch());
  return failed == 0 ? 0 : 1;
}
