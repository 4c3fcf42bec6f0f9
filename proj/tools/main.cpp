#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"

int main(int argc, char** argv) {
  using namespace pks::cli;
  CLI::App app{"Minimizing-movement solver and diagnostics for the critical-mass Keller-Segel system"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume_dir, sizes;
  int threads = 1, instances = 0, n = 0;
  double L = 0.0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "key = value configuration file");
    if (config_required) opt->required();
    opt->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--threads", threads, "worker threads; reductions are serial and results do "
                                          "not depend on this value")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* sim = app.add_subcommand("simulate", "run the scheme and write diagnostics");
  add_common(sim, true);
  sim->add_option("--resume", resume_dir, "checkpoint directory to resume from")
      ->check(CLI::ExistingDirectory);
  CLI::App* val = app.add_subcommand("validate", "evaluate the inequality checks over a family");
  add_common(val, true);
  CLI::App* ot = app.add_subcommand("ot-selftest", "compare entropic and exact transport");
  add_common(ot, false);
  ot->add_option("--sizes", sizes, "comma-separated instance sizes");
  ot->add_option("--instances", instances, "instances per size")->check(CLI::PositiveNumber);
  CLI::App* ss = app.add_subcommand("steady-state", "dump the steady-state grid and its functionals");
  add_common(ss, false);
  ss->add_option("--n", n, "grid cells per side");
  ss->add_option("--L", L, "box half-width");

  CLI11_PARSE(app, argc, argv);

  try {
    KeyValueConfig kv;
    if (!config_path.empty()) kv = KeyValueConfig::load(config_path);
    if (!sizes.empty()) kv.set("selftest.sizes", sizes);
    if (instances > 0) kv.set("selftest.instances", std::to_string(instances));
    if (n > 0) kv.set("grid.n", std::to_string(n));
    if (L > 0.0) kv.set("grid.L", csv_number(L));
    const RunConfig rc = parse_run_config(kv);
    const std::string out = out_dir.empty() ? rc.output_dir : out_dir;
    if (*sim) return cmd_simulate(rc, out, resume_dir, std::cout);
    if (*val) return cmd_validate(rc, out, std::cout);
    if (*ot) return cmd_ot_selftest(rc, out, std::cout);
    return cmd_steady_state(rc, out, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
