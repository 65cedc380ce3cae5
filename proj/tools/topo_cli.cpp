#include <CLI11.hpp>

#include <iostream>

#include "topo/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Density-based topology optimization with beta continuation"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run an optimization from a config file");
  std::string config_path, out_dir, scheme;
  int max_iters = 0;
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--max-iters", max_iters, "Iteration cap (overrides stop.max_iters)")->check(CLI::PositiveNumber);
  run->add_option("--scheme", scheme, "Continuation scheme: automatic, default, modified, stepped or constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    topo::RunConfig cfg = topo::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (max_iters > 0) cfg.options.max_iters = max_iters;
    if (!scheme.empty()) {
      cfg.scheme = topo::canonical_scheme(scheme);
      cfg.schemes.clear();
    }
    if (cfg.schemes.empty())
      cfg.options.on_iteration = [](const topo::IterationRecord& r) {
        if (r.iter % 50 == 0)
          std::cerr << "iter " << r.iter << "  f " << topo::format_number(r.objective) << "  gray "
                    << topo::format_scientific(r.gray) << "  beta " << topo::format_fixed(r.beta, 3) << "\n";
      };
    const topo::RunReport rep = topo::run(cfg);
    for (const auto& s : rep.runs) {
      if (s.termination == "error") std::cerr << "error (" << s.scheme << "): " << s.error << "\n";
    }
    if (rep.comparison.empty())
      std::cout << topo::summary_text(rep.runs.front());
    else
      std::cout << rep.comparison;
    return rep.status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
