#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "pks/constants.hpp"
#include "pks/functionals.hpp"

namespace pks::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExactSelftestCap = 1024;

std::string bool_str(bool b) { return b ? "true" : "false"; }

void write_key_values(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream os(path);
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  if (!os) throw std::runtime_error("cannot write " + path);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

SchemeConfig scheme_from(const RunConfig& rc, const Density& rho0) {
  SchemeConfig cfg = schedule(rc.lambda, rho0, rc.c_rho0);
  cfg.max_steps = rc.max_steps;
  cfg.l1_target = rc.l1_target;
  cfg.debias = rc.debias;
  cfg.sinkhorn_epsilon = rc.ot.sinkhorn_epsilon;
  cfg.inner_tol = rc.inner_tol;
  cfg.marginal_tol = rc.inner_marginal_tol;
  cfg.max_outer = rc.max_outer;
  cfg.max_inner = rc.max_inner;
  if (rc.tau > 0.0) cfg.tau = rc.tau;
  refresh_schedule(cfg);
  return cfg;
}

std::vector<std::pair<std::string, std::string>> schedule_record(const SchemeConfig& c) {
  return {{"tau", csv_number(c.tau)},
          {"tau_star", csv_number(c.tau_star)},
          {"lambda", csv_number(c.lambda)},
          {"mass", csv_number(c.mass)},
          {"c_rho0", csv_number(c.c_rho0)},
          {"h0", csv_number(c.h0)},
          {"f0", csv_number(c.f0)},
          {"q0", csv_number(c.q0)},
          {"big_lambda", csv_number(c.big_lambda)},
          {"A", csv_number(c.A)},
          {"gamma2", csv_number(c.gamma2)},
          {"log_c_ccd", csv_number(c.log_c_ccd)},
          {"log_z", csv_number(c.log_z)},
          {"log_c3", csv_number(c.log_c3)},
          {"log_z_tilde", csv_number(c.log_z_tilde)},
          {"z_tilde_c3", csv_number(c.z_tilde_c3)},
          {"f_bar0", csv_number(c.f_bar0)},
          {"f_bar1", csv_number(c.f_bar1)},
          {"f_bar2", csv_number(c.f_bar2)},
          {"log_eps_1", csv_number(c.log_eps_k(1))},
          {"sinkhorn_epsilon", csv_number(c.sinkhorn_epsilon)},
          {"debias", bool_str(c.debias)}};
}

struct FamilyMember {
  std::string name;
  Density rho;
};

std::vector<FamilyMember> family_of(const RunConfig& rc) {
  const GridSpec g = rc.grid();
  const double crit = 8.0 * std::numbers::pi;
  const double sl = std::sqrt(rc.lambda);
  std::vector<FamilyMember> fam;
  for (double a : rc.translates) {
    InitialData d;
    d.offset = {a * sl, 0.0};
    fam.push_back({"translate(" + csv_number(a) + ")", make_initial(d, g, rc.lambda, crit)});
  }
  for (double s : rc.mixtures) {
    InitialData d;
    d.kind = InitialData::Kind::Mixture;
    d.offset = {0.0, 0.0};
    d.separation = s * sl;
    fam.push_back({"mixture(" + csv_number(s) + ")", make_initial(d, g, rc.lambda, crit)});
  }
  for (double r : rc.bumps) {
    InitialData d;
    d.kind = InitialData::Kind::Bump;
    d.offset = {0.0, 0.0};
    d.radius = r * sl;
    fam.push_back({"bump(" + csv_number(r) + ")", make_initial(d, g, rc.lambda, crit)});
  }
  if (rc.subcritical) {
    InitialData d;
    d.offset = {0.0, 0.0};
    fam.push_back({"subcritical", make_initial(d, g, rc.lambda, 0.5 * crit)});
  }
  return fam;
}

}  // namespace

std::string inequality_title(const std::string& check) {
  static const std::map<std::string, std::string> titles = {
      {"log_hls", "logarithmic HLS inequality"},
      {"gns", "sharp GNS inequality"},
      {"talagrand", "Talagrand transport inequality"},
      {"thick_tails", "thick-tails lower bound"},
      {"localization", "localization moment bound"},
      {"neg_entropy", "negative-entropy bound"},
      {"ccf", "concentration control for the free energy"},
      {"ccd", "concentration control for the dissipation"},
      {"ccd_entropy", "concentration control for the dissipation (entropy form)"},
      {"h_dissipation", "one-step dissipation inequality"},
      {"f_monotonicity", "near-monotone free energy bound"},
      {"step_size", "one-step transport bound W2^2 <= 2 tau (F[prev] - F[next])"},
      {"step_threshold", "step-size threshold tau < tau*"},
  };
  const auto it = titles.find(check);
  return it == titles.end() ? check : it->second;
}

std::vector<std::string> diagnostics_header() {
  return {"k",
          "tau",
          "eps_k",
          "mass",
          "free_energy_before",
          "free_energy_after",
          "free_energy_prev_eps",
          "entropy_after",
          "interaction_after",
          "h_before",
          "h_after",
          "h_tail_after",
          "dissipation_after",
          "grad_quarter_after",
          "l32_power_after",
          "w2_step",
          "w2_bound",
          "el_residual",
          "h_dissipation_slack",
          "f_monotonicity_slack",
          "step_size_slack",
          "budget",
          "l1_to_steady",
          "lp_1.5",
          "lp_2",
          "lp_3",
          "outer_iterations",
          "inner_iterations",
          "symmetric_iterations",
          "marginal_residual",
          "symmetric_residual",
          "objective_prev",
          "objective"};
}

std::vector<std::string> diagnostics_row(const StepRecord& r) {
  auto num = [](double v) { return csv_number(v); };
  return {std::to_string(r.k),
          num(r.tau),
          num(r.eps_k),
          num(r.after.mass),
          num(r.before.free_energy),
          num(r.after.free_energy),
          num(r.free_energy_prev_eps),
          num(r.after.entropy),
          num(r.after.interaction),
          num(r.h_before),
          num(r.h_after),
          num(r.after.h_lambda_tail),
          num(r.after.dissipation),
          num(r.after.grad_quarter),
          num(r.after.l32_power),
          num(r.w2_step),
          num(r.w2_bound),
          num(r.el_residual),
          num(r.h_dissipation_slack),
          num(r.f_monotonicity_slack),
          num(r.step_size_slack),
          num(r.budget),
          num(r.l1_to_steady),
          num(r.lp_snapshot.at(1.5)),
          num(r.lp_snapshot.at(2.0)),
          num(r.lp_snapshot.at(3.0)),
          std::to_string(r.solver.outer_iterations),
          std::to_string(r.solver.inner_iterations),
          std::to_string(r.solver.symmetric_iterations),
          num(r.solver.marginal_residual),
          num(r.solver.symmetric_residual),
          num(r.solver.objective_prev),
          num(r.solver.objective)};
}

std::vector<std::string> check_header() {
  return {"density", "check", "lhs", "rhs", "slack", "tol", "pass", "skipped", "status"};
}

std::vector<std::string> check_row(const std::string& density, const InequalityReport& r) {
  std::string status = r.status;
  std::replace(status.begin(), status.end(), ',', ';');
  return {density,
          r.name,
          csv_number(r.lhs),
          csv_number(r.rhs),
          csv_number(r.slack),
          csv_number(r.tol),
          bool_str(r.pass),
          bool_str(r.skipped),
          status};
}

int cmd_simulate(const RunConfig& rc, const std::string& out_dir, const std::string& resume_dir,
                 std::ostream& log) {
  fs::create_directories(out_dir);
  const Density rho0 = make_initial(rc);
  SchemeConfig cfg;
  try {
    cfg = scheme_from(rc, rho0);
    validate_step_size(cfg);
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what();
    if (cfg.tau_star > 0.0)
      log << " (" << inequality_title("step_threshold") << ": tau = " << csv_number(cfg.tau)
          << ", tau* = " << csv_number(cfg.tau_star) << ")";
    log << "\n";
    return 2;
  }
  write_key_values((fs::path(out_dir) / "schedule.txt").string(), schedule_record(cfg));

  const std::string ckpt = resume_dir.empty() ? (fs::path(out_dir) / "checkpoints").string()
                                              : resume_dir;
  const std::string csv_path = (fs::path(out_dir) / "diagnostics.csv").string();
  const std::string header = csv_join(diagnostics_header());
  std::vector<std::string> kept;
  if (!resume_dir.empty()) {
    const int last = latest_checkpoint(resume_dir);
    std::ifstream is(csv_path);
    std::string line;
    if (is && std::getline(is, line) && line == header) {
      while (std::getline(is, line)) {
        const auto cells = split_csv(line);
        if (!cells.empty() && std::stoi(cells[0]) <= last) kept.push_back(line);
      }
    }
    if (last > 0 && static_cast<int>(kept.size()) != last)
      log << "warning: diagnostics table holds " << kept.size() << " of " << last
          << " checkpointed steps\n";
  }
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << header << "\n";
  for (const auto& l : kept) csv << l << "\n";
  csv.flush();

  RunOptions opts;
  opts.checkpoint_dir = ckpt;
  opts.resume = !resume_dir.empty();
  opts.on_step = [&](const StepRecord& r, const Density&) {
    csv << csv_join(diagnostics_row(r)) << "\n";
    csv.flush();
    log << "step " << r.k << "  H " << r.h_after << "  F " << r.after.free_energy << "  W2 "
        << r.w2_step << "  L1 " << r.l1_to_steady << "  outer " << r.solver.outer_iterations
        << "  " << r.solver.seconds << " s\n";
  };
  Trajectory tr;
  try {
    tr = run(rho0, cfg, opts);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
  csv.close();

  // summary over the whole table, including rows kept from before a resume
  std::ifstream is(csv_path);
  std::string line;
  std::getline(is, line);
  const auto cols = split_csv(line);
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
  };
  const std::size_t c_h = col("h_after"), c_d = col("dissipation_after"),
                    c_l1 = col("l1_to_steady"), c_hs = col("h_dissipation_slack"),
                    c_fm = col("f_monotonicity_slack"), c_ss = col("step_size_slack"),
                    c_b = col("budget"), c_f = col("free_energy_after");
  int steps = 0, h_increases = 0, violations = 0;
  double sum_td = 0.0, prev_h = cfg.h0, final_h = cfg.h0, final_l1 = 0.0, max_f = -INFINITY;
  while (std::getline(is, line)) {
    const auto cells = split_csv(line);
    ++steps;
    const double h = std::stod(cells[c_h]);
    if (h > prev_h) ++h_increases;
    prev_h = final_h = h;
    sum_td += cfg.tau * std::stod(cells[c_d]);
    final_l1 = std::stod(cells[c_l1]);
    max_f = std::max(max_f, std::stod(cells[c_f]));
    const double budget = std::stod(cells[c_b]);
    for (const auto& [c, name] : {std::pair{c_hs, "h_dissipation"}, std::pair{c_fm, "f_monotonicity"},
                                  std::pair{c_ss, "step_size"}}) {
      const double slack = std::stod(cells[c]);
      if (slack < -budget) {
        ++violations;
        log << "violation at step " << cells[0] << ": " << inequality_title(name) << " slack "
            << csv_number(slack) << " below -budget " << csv_number(-budget) << "\n";
      }
    }
  }
  const double initial_l1 = l1_distance(
      rho0, steady_state({cfg.lambda, profile_mass(rho0, cfg.lambda)}, {0.0, 0.0}, rho0.spec()));
  write_key_values((fs::path(out_dir) / "summary.txt").string(),
                   {{"steps", std::to_string(steps)},
                    {"completed", bool_str(tr.completed)},
                    {"failure", tr.failure.empty() ? "none" : tr.failure},
                    {"initial_l1_to_steady", csv_number(initial_l1)},
                    {"final_l1_to_steady", csv_number(steps ? final_l1 : initial_l1)},
                    {"initial_h_lambda", csv_number(cfg.h0)},
                    {"final_h_lambda", csv_number(final_h)},
                    {"h_lambda_increases", std::to_string(h_increases)},
                    {"sum_tau_dissipation", csv_number(sum_td)},
                    {"dissipation_bound", csv_number(cfg.h0 + cfg.c_rho0 * cfg.tau * cfg.tau / 4.0)},
                    {"max_free_energy", csv_number(max_f)},
                    {"free_energy_floor", csv_number(constants::critical_free_energy())},
                    {"slack_violations", std::to_string(violations)}});
  log << "summary: " << steps << " steps, H " << cfg.h0 << " -> " << final_h << ", L1 "
      << initial_l1 << " -> " << (steps ? final_l1 : initial_l1) << "\n";
  if (!tr.failure.empty()) {
    log << "error: " << tr.failure << "\n";
    return 1;
  }
  return 0;
}

int cmd_validate(const RunConfig& rc, const std::string& out_dir, std::ostream& log) {
  const std::vector<FamilyMember> fam = family_of(rc);
  if (fam.empty()) {
    log << "error: no densities\n";
    return 1;
  }
  fs::create_directories(out_dir);
  std::ofstream csv((fs::path(out_dir) / "validate.csv").string());
  csv << csv_join(check_header()) << "\n";
  int failures = 0, total = 0;
  for (const auto& m : fam) {
    std::vector<InequalityReport> reports{check_log_hls(m.rho), check_gns(m.rho)};
    for (double s : rc.tail_s) reports.push_back(check_thick_tails(m.rho, rc.lambda, s));
    for (double q : rc.localization_q) reports.push_back(localization_bound(m.rho, rc.lambda, q));
    reports.push_back(neg_entropy_bound(m.rho, rc.lambda));
    reports.push_back(check_ccf(m.rho, rc.lambda));
    reports.push_back(check_ccd(m.rho, rc.lambda));
    if (rc.talagrand) reports.push_back(check_talagrand(m.rho, rc.lambda, rc.ot));
    for (const auto& r : reports) {
      ++total;
      csv << csv_join(check_row(m.name, r)) << "\n";
      if (!r.pass) {
        ++failures;
        log << "FAIL " << m.name << " " << r.name << " (" << inequality_title(r.name)
            << "): lhs " << csv_number(r.lhs) << " rhs " << csv_number(r.rhs) << " slack "
            << csv_number(r.slack) << "\n";
      } else if (r.skipped) {
        log << "skip " << m.name << " " << r.name << ": " << r.status << "\n";
      }
    }
  }
  log << total - failures << " of " << total << " checks passed over " << fam.size()
      << " densities\n";
  return failures == 0 ? 0 : 1;
}

int cmd_ot_selftest(const RunConfig& rc, const std::string& out_dir, std::ostream& log) {
  fs::create_directories(out_dir);
  std::ofstream csv((fs::path(out_dir) / "ot_selftest.csv").string());
  csv << "size,instance,exact_w2,entropic_w2,rel_error\n";
  std::mt19937_64 rng(rc.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0), weight(0.1, 1.0);
  const double eps = rc.selftest_eps * 2.0;
  bool ok = true;
  for (int size : rc.selftest_sizes) {
    if (size > kExactSelftestCap) {
      log << "size " << size << ": skipped, beyond the exact-solver cap of " << kExactSelftestCap
          << " points\n";
      continue;
    }
    double worst = 0.0;
    int worst_at = -1;
    for (int t = 0; t < rc.selftest_instances; ++t) {
      PointMeasure a, b;
      for (int k = 0; k < size; ++k) {
        a.x.push_back({unit(rng), unit(rng)});
        a.w.push_back(weight(rng));
        b.x.push_back({unit(rng), unit(rng)});
        b.w.push_back(weight(rng));
      }
      const double exact = std::sqrt(std::max(exact_ot(a, b, 2.0).value, 0.0));
      const double ent =
          std::sqrt(std::max(sinkhorn_divergence_points(a, b, 2.0, eps, 20000, 1e-9), 0.0));
      const double rel = exact > 0.0 ? std::abs(ent - exact) / exact : std::abs(ent);
      csv << size << "," << t << "," << csv_number(exact) << "," << csv_number(ent) << ","
          << csv_number(rel) << "\n";
      if (rel > worst) {
        worst = rel;
        worst_at = t;
      }
    }
    const bool pass = worst <= 1e-2;
    ok = ok && pass;
    log << "size " << size << ": worst relative error " << worst << " (instance " << worst_at
        << ") " << (pass ? "ok" : "FAIL") << "\n";
  }
  return ok ? 0 : 1;
}

int cmd_steady_state(const RunConfig& rc, const std::string& out_dir, std::ostream& log) {
  fs::create_directories(out_dir);
  const Density rho = steady_state({rc.lambda, rc.mass}, {0.0, 0.0}, rc.grid());
  write_grid_file((fs::path(out_dir) / "steady_state.grid").string(), rho);
  const FunctionalReport f = evaluate_functionals(rho, 0.0, rc.lambda);
  const std::vector<std::pair<std::string, std::string>> kv = {
      {"n", std::to_string(rc.n)},
      {"L", csv_number(rc.L)},
      {"lambda", csv_number(rc.lambda)},
      {"mass_parameter", csv_number(rc.mass)},
      {"box_mass", csv_number(f.mass)},
      {"free_energy", csv_number(f.free_energy)},
      {"critical_free_energy", csv_number(constants::critical_free_energy())},
      {"dissipation", csv_number(f.dissipation)},
      {"l32_power", csv_number(f.l32_power)},
      {"h_lambda", csv_number(f.h_lambda)},
      {"h_lambda_tail", csv_number(f.h_lambda_tail)}};
  write_key_values((fs::path(out_dir) / "steady_state.txt").string(), kv);
  for (const auto& [k, v] : kv) log << k << " = " << v << "\n";
  return 0;
}

}  // namespace pks::cli
