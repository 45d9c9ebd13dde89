// messrestore: rolling MESS restoration runs, single solves, scenario
// generation, MPS export and metric reports from saved timelines.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "mess/case.hpp"
#include "mess/error.hpp"
#include "mess/rolling.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kSolver = 3;

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Args {
  std::string case_path;
  std::uint64_t seed{1};
  std::string mode{"dynamic"};
  std::string solver{"bundled"};
  std::string out;
  std::size_t n{0}, k{0};
  std::string timeline;
};

// Worker count for parallel-capable stages. Everything runs on one thread
// today, so the value is only validated and reported.
int workers() {
  const char* env = std::getenv("MESS_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long w = std::strtol(env, &end, 10);
  if (*end != '\0' || w < 1) throw mess::ConfigError(fmt::format("MESS_WORKERS must be a positive integer, got '{}'", env));
  return static_cast<int>(w);
}

mess::io::Case load(const Args& a) {
  auto c = mess::io::load_case(a.case_path);
  if (a.solver == "export") {
    if (a.out.empty()) throw mess::ConfigError("--solver export needs --out");
    std::filesystem::create_directories(a.out);
    c.solver.mode = mess::milp::SolverMode::ExportOnly;
    c.solver.export_path = (std::filesystem::path(a.out) / "model").string();
  } else if (a.solver != "bundled") {
    throw mess::ConfigError("--solver must be 'bundled' or 'export', got '" + a.solver + "'");
  }
  return c;
}

int cmd_run(const Args& a) {
  const auto c = load(a);
  const auto report = mess::rolling::run(c, {mess::rolling::parse_mode(a.mode), a.seed});
  const auto m = mess::rolling::compute_metrics(report);
  if (!a.out.empty()) mess::rolling::write_bundle(report, c, a.out);
  fmt::print("case {} mode {} seed {}\n", c.name, a.mode, a.seed);
  mess::rolling::write_metrics_csv(std::cout, m);
  return kOk;
}

mess::rolling::Window first_window(const mess::io::Case& c, const Args& a) {
  const auto mode = mess::rolling::parse_mode(a.mode);
  const auto real = mess::rolling::realize(c, a.seed);
  auto state = mess::rolling::initial_state(c, mode);
  mess::transport::TravelCache cache(c.net());
  return mess::rolling::prepare_window(c, state, real, mode, a.seed, cache);
}

int cmd_solve_once(const Args& a) {
  auto c = load(a);
  if (c.solver.mode == mess::milp::SolverMode::ExportOnly) {
    c.solver.export_path += ".mps";
    c.solver.solution_path = (std::filesystem::path(a.out) / "model.sol").string();
  }
  const auto win = first_window(c, a);
  const auto bm = mess::milp::build_model(win.input);
  auto opts = c.solver;
  opts.heuristic = mess::milp::topology_heuristic(win.input, bm);
  const auto sol = mess::milp::solve(bm.model, opts);
  fmt::print("columns {} rows {} binaries {}\n", bm.model.vars().size(), bm.model.rows().size(), bm.model.binaries());
  fmt::print("status {} objective {:.6f} gap {:.3g} nodes {}\n", mess::milp::to_string(sol.status), sol.objective,
             sol.gap, sol.nodes);
  if (!sol.has_solution()) {
    if (c.solver.mode == mess::milp::SolverMode::ExportOnly) {
      fmt::print("model written to {}\n", c.solver.export_path);
      return kOk;
    }
    throw SolverFailure(fmt::format("no solution ({})", mess::milp::to_string(sol.status)));
  }
  const auto cost = mess::milp::cost_breakdown(win.input, bm, sol.x);
  fmt::print("interruption {:.6f} generation {:.6f} battery {:.6f} transport {:.6f}\n", cost.interruption,
             cost.generation, cost.battery, cost.transport);
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    std::ofstream os(std::filesystem::path(a.out) / "solution.txt");
    mess::milp::write_solution(os, bm.model, sol.x);
  }
  return kOk;
}

int cmd_scenarios(const Args& a) {
  auto c = load(a);
  if (a.n) c.scenarios_generated = a.n;
  if (a.k) c.scenarios_kept = a.k;
  if (c.scenarios_kept > c.scenarios_generated) throw mess::ConfigError("--k must not exceed --n");
  const auto win = first_window(c, a);
  double total = 0.0;
  for (const auto& s : win.scenarios.scenarios) total += s.probability;
  fmt::print("scenarios {} kept of {} probability_sum {:.15f}\n", win.scenarios.size(), c.scenarios_generated, total);
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    std::ofstream os(std::filesystem::path(a.out) / "scenarios.csv");
    mess::scenario::write_csv(os, win.scenarios);
  } else {
    mess::scenario::write_csv(std::cout, win.scenarios);
  }
  return kOk;
}

int cmd_export(const Args& a) {
  const auto c = load(Args{a.case_path, a.seed, a.mode, "bundled", "", 0, 0, ""});
  const auto win = first_window(c, a);
  const auto bm = mess::milp::build_model(win.input);
  if (a.out.empty() || a.out == "-") {
    mess::milp::write_mps(std::cout, bm.model);
  } else {
    mess::milp::export_mps(bm.model, a.out);
  }
  return kOk;
}

int cmd_report(const Args& a) {
  std::ifstream in(a.timeline);
  if (!in) throw mess::IoError("cannot open " + a.timeline);
  const auto m = mess::rolling::metrics_from_timeline(in);
  if (a.out.empty()) {
    mess::rolling::write_metrics_csv(std::cout, m);
  } else {
    std::ofstream os(a.out);
    if (!os) throw mess::IoError("cannot write " + a.out);
    mess::rolling::write_metrics_csv(os, m);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rolling restoration with mobile energy storage"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* sub, bool with_out = true) {
    sub->add_option("case", a.case_path, "case JSON")->required();
    sub->add_option("--seed", a.seed, "random seed");
    sub->add_option("--mode", a.mode, "dynamic | allocation | no-mess");
    sub->add_option("--solver", a.solver, "bundled | export");
    if (with_out) sub->add_option("--out", a.out, "output directory");
  };
  auto* run = app.add_subcommand("run", "full rolling run");
  common(run);
  auto* once = app.add_subcommand("solve-once", "single stochastic solve of the first window");
  common(once);
  auto* sc = app.add_subcommand("scenarios", "generate and reduce the first window's scenarios");
  common(sc);
  sc->add_option("--n", a.n, "scenarios generated");
  sc->add_option("--k", a.k, "scenarios kept");
  auto* mps = app.add_subcommand("export-mps", "write the first window's model as MPS");
  common(mps, false);
  mps->add_option("--out", a.out, "MPS file (stdout when omitted)");
  auto* rep = app.add_subcommand("report", "recompute metrics from a saved timeline.csv");
  rep->add_option("timeline", a.timeline, "timeline.csv")->required();
  rep->add_option("--out", a.out, "metrics file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    const int w = workers();
    if (w > 1) fmt::print(std::cerr, "note: {} workers requested, running single-threaded\n", w);
    if (*run) return cmd_run(a);
    if (*once) return cmd_solve_once(a);
    if (*sc) return cmd_scenarios(a);
    if (*mps) return cmd_export(a);
    if (*rep) return cmd_report(a);
  } catch (const mess::ValidationError& e) {
    fmt::print(std::cerr, "validation error: {}\n", e.what());
    return kValidation;
  } catch (const mess::ConfigError& e) {
    fmt::print(std::cerr, "configuration error: {}\n", e.what());
    return kValidation;
  } catch (const mess::IoError& e) {
    fmt::print(std::cerr, "i/o error: {}\n", e.what());
    return kValidation;
  } catch (const SolverFailure& e) {
    fmt::print(std::cerr, "solver failure: {}\n", e.what());
    return kSolver;
  } catch (const mess::InfeasibleLayer& e) {
    fmt::print(std::cerr, "solver failure: {}\n", e.what());
    return kSolver;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
  return kOk;
}
