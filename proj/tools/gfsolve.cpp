// gfsolve: gas-flow solver front end.
//
//   gfsolve solve  --network N --scenario S [--method tree|nr|misocp]
//   gfsolve mc     --network N --scenario S [--samples K --sigma s --seed n]
//   gfsolve check  --network N
//   gfsolve oracle --network N --scenario S [--out PATH]
//
// Exit codes: 0 solved/complete, 1 usage or data error, 2 infeasible,
// 3 inexact (or NR did not converge), 4 timeout.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gasflow/graph.hpp"
#include "gasflow/log.hpp"
#include "gasflow/misocp.hpp"
#include "gasflow/monte_carlo.hpp"
#include "gasflow/network_io.hpp"
#include "gasflow/newton.hpp"
#include "gasflow/oracles.hpp"
#include "gasflow/tree_solver.hpp"

using namespace gasflow;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kInexact = 3, kTimeout = 4 };

struct Args {
  std::string network, scenario, out, method = "misocp", init = "flat", dump_program;
  std::string format = "csv", balance;
  double big_m = tol::kDefaultBigM;
  double time_limit = -1.0;
  double sigma = 1.0;
  std::uint64_t seed = 42;
  std::size_t samples = 1000;
  int jobs = 0;
  bool no_timing = false;
};

json node_map(const GasNetwork& net, const std::vector<double>& v) {
  json j = json::object();
  for (NodeId i = 0; i < net.num_nodes(); ++i) j[net.node_name(i)] = v[i];
  return j;
}

json edge_map(const GasNetwork& net, const std::vector<double>& v) {
  json j = json::object();
  for (EdgeId e = 0; e < net.num_edges(); ++e) j[net.edge(e).name] = v[e];
  return j;
}

json residual_json(const ResidualReport& r) {
  return {{"mass", r.mass},
          {"weymouth", r.max_weymouth()},
          {"compressor", r.max_compressor()},
          {"reference", r.reference},
          {"negative_pressure", r.negative_pressure},
          {"max", r.max()}};
}

json state_json(const GasNetwork& net, const Injections& q, const FlowState& s) {
  return {{"psi", node_map(net, s.psi)},
          {"phi", edge_map(net, s.phi)},
          {"residuals", residual_json(residuals(net, q, s))}};
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

MisocpOptions solver_options(const Args& a) {
  MisocpOptions o;
  o.big_m = a.big_m;
  if (a.time_limit > 0.0) o.time_limit = a.time_limit;
  return o;
}

int solve_misocp(const Args& a, const GasNetwork& net, const Injections& q, json& out) {
  const MisocpOptions opts = solver_options(a);
  if (!a.dump_program.empty()) {
    RelaxationOptions ro;
    ro.big_m = opts.big_m;
    write_text_file(a.dump_program,
                    build_relaxation(net, q, presolve_fixings(net, q), ro).dump());
  }
  const SolveResult r = solve_gf(net, q, opts);
  out["status"] = to_string(r.status);
  out["message"] = r.message;
  if (r.status == SolveStatus::Solved || r.status == SolveStatus::Inexact ||
      (r.status == SolveStatus::Timeout && !r.state.psi.empty())) {
    out["objective"] = r.objective;
    out["gap"] = r.gap;
    out["inexact_minor"] = r.inexact_minor;
    out["polished"] = r.polished;
    out["big_m_warning"] = r.big_m_warning;
    json x = json::object();
    const auto lossy = net.lossy_pipes();
    for (std::size_t k = 0; k < lossy.size(); ++k) x[net.edge(lossy[k]).name] = r.x.x[k];
    out["x"] = std::move(x);
    out.update(state_json(net, q, r.state));
  }
  if (r.infeasibility) {
    const InfeasibilityProof& p = *r.infeasibility;
    out["infeasibility"] = {{"at_root", p.at_root},
                            {"complete", p.complete},
                            {"nodes", p.nodes.size()},
                            {"max_residual", p.max_residual()}};
  }
  const BnbStats& s = r.stats;
  out["stats"] = {{"nodes_explored", s.nodes_explored},
                  {"relaxations_solved", s.relaxations_solved},
                  {"heuristic_solves", s.heuristic_solves},
                  {"numerical_failures", s.numerical_failures},
                  {"solver_fallbacks", s.solver_fallbacks},
                  {"cycle_pruned", s.cycle_pruned},
                  {"cut_retries", s.cut_retries},
                  {"max_depth", s.max_depth},
                  {"presolve_fixed", s.presolve_fixed},
                  {"max_primal_residual", s.max_primal_residual},
                  {"max_relative_gap", s.max_relative_gap},
                  {"wall_seconds", s.wall_seconds}};
  switch (r.status) {
    case SolveStatus::Solved: return kOk;
    case SolveStatus::Infeasible: return kInfeasible;
    case SolveStatus::Inexact: return kInexact;
    case SolveStatus::Timeout: return kTimeout;
  }
  return kUsage;
}

int solve_nr(const Args& a, const GasNetwork& net, const Injections& q, json& out) {
  std::vector<double> init;
  if (a.init == "flat")
    init.assign(net.num_nodes(), net.reference_psi());
  else
    init = parse_pressures(read_text_file(a.init), net);
  const NrResult r = nr_solve(net, q, init);
  out["status"] = to_string(r.status);
  out["iterations"] = r.iterations;
  out["nr_residual"] = r.residual;
  out.update(state_json(net, q, r.state));
  if (r.converged()) {
    out["gap"] = inexactness_gap(net, r.state);
    out["objective"] = pressure_objective(net, r.state.psi);
  }
  return r.converged() ? kOk : kInexact;
}

int solve_tree_cmd(const GasNetwork& net, const Injections& q, json& out) {
  try {
    const FlowState s = solve_tree(net, q);
    out["status"] = "solved";
    out.update(state_json(net, q, s));
    out["objective"] = pressure_objective(net, s.psi);
    return kOk;
  } catch (const GasFlowError& e) {
    if (e.code() != ErrorCode::InfeasiblePressure &&
        e.code() != ErrorCode::InfeasibleCompressorDirection)
      throw;
    out["status"] = "infeasible";
    out["reason"] = to_string(e.code());
    out["message"] = e.what();
    return kInfeasible;
  }
}

int cmd_solve(const Args& a) {
  const GasNetwork net = load_network(a.network);
  const Injections q = load_scenario(a.scenario, net);
  json out;
  out["format_version"] = kFormatVersion;
  out["method"] = a.method;
  int code = kUsage;
  if (a.method == "misocp")
    code = solve_misocp(a, net, q, out);
  else if (a.method == "nr")
    code = solve_nr(a, net, q, out);
  else
    code = solve_tree_cmd(net, q, out);
  write_output(a.out, out.dump(2) + "\n");
  return code;
}

int cmd_mc(const Args& a) {
  const GasNetwork net = load_network(a.network);
  McConfig cfg;
  cfg.q0 = load_scenario(a.scenario, net);
  cfg.n_samples = a.samples;
  cfg.sigma = a.sigma;
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  cfg.solver = solver_options(a);
  cfg.record_timing = !a.no_timing;
  if (a.balance.empty()) {
    cfg.balancing = net.num_nodes() - 1;
  } else {
    const auto n = net.find_node(a.balance);
    if (!n) throw GasFlowError(ErrorCode::InvalidArgument, "unknown balancing node '" + a.balance + "'");
    cfg.balancing = *n;
  }
  const McReport rep = run_monte_carlo(net, cfg);
  const std::string text = a.format == "json" ? report_json(rep) : report_csv(rep);
  write_output(a.out, text);
  const McAggregates& g = rep.aggregates;
  log().info("mc: {} samples, {} solved, {} inexact, {} infeasible, {} timeout", g.samples, g.solved,
             g.inexact, g.infeasible, g.timeout);
  return kOk;
}

int cmd_check(const Args& a) {
  const GasNetwork net = load_network(a.network);
  const AssumptionReport r = check_assumptions(net);
  auto names = [&](const std::vector<EdgeId>& es) {
    json j = json::array();
    for (EdgeId e : es) j.push_back(net.edge(e).name);
    return j;
  };
  json blocks = json::array();
  for (const auto& b : r.overlapping_blocks) blocks.push_back(names(b));
  const SpanningTree tree = spanning_tree(net);
  json out{{"format_version", kFormatVersion},
           {"nodes", net.num_nodes()},
           {"edges", net.num_edges()},
           {"cycles", tree.link_edges.size()},
           {"a1_holds", r.a1_holds},
           {"a2_holds", r.a2_holds},
           {"compressors_on_cycles", names(r.compressors_on_cycles)},
           {"overlapping_blocks", std::move(blocks)}};
  write_output(a.out, out.dump(2) + "\n");
  return kOk;
}

int cmd_oracle(const Args& a) {
  const GasNetwork net = load_network(a.network);
  const Injections q = load_scenario(a.scenario, net);
  const OracleSolution s = brute_force_single_cycle(net, q);
  json cycle = json::object();
  for (EdgeId e = 0; e < net.num_edges(); ++e)
    if (s.cycle[e] != 0) cycle[net.edge(e).name] = s.cycle[e];
  json out{{"format_version", kFormatVersion},
           {"method", s.method},
           {"loop_flow", s.loop_flow},
           {"bisection_steps", s.bisection_steps},
           {"cycle", std::move(cycle)}};
  out.update(state_json(net, q, s.state));
  write_output(a.out, out.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady-state gas network flow solver"};
  app.require_subcommand(1);
  Args a;

  auto add_inputs = [&](CLI::App* sub, bool scenario) {
    sub->add_option("--network", a.network, "network JSON file")->required()->check(CLI::ExistingFile);
    if (scenario)
      sub->add_option("--scenario", a.scenario, "injections JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "output file (default stdout)");
  };
  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--big-m", a.big_m, "big-M constant")->check(CLI::PositiveNumber);
    sub->add_option("--time-limit", a.time_limit, "branch-and-bound time limit in seconds");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve one scenario");
  add_inputs(solve, true);
  add_solver(solve);
  solve->add_option("--method", a.method, "tree, nr or misocp")
      ->check(CLI::IsMember({"tree", "nr", "misocp"}));
  solve->add_option("--init", a.init, "NR start: flat or a {\"psi\": {...}} file");
  solve->add_option("--dump-program", a.dump_program, "write the root relaxation as text");

  CLI::App* mc = app.add_subcommand("mc", "Monte-Carlo feasibility study");
  add_inputs(mc, true);
  add_solver(mc);
  mc->add_option("--samples", a.samples, "number of samples")->check(CLI::PositiveNumber);
  mc->add_option("--sigma", a.sigma, "injection noise std")->check(CLI::NonNegativeNumber);
  mc->add_option("--seed", a.seed, "RNG seed");
  mc->add_option("--balance", a.balance, "balancing node (default: last node)");
  mc->add_option("--jobs", a.jobs, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
  mc->add_option("--format", a.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  mc->add_flag("--no-timing", a.no_timing, "write runtime_ms as 0");

  CLI::App* check = app.add_subcommand("check", "report cycle assumptions");
  add_inputs(check, false);

  CLI::App* oracle = app.add_subcommand("oracle", "single-cycle bisection solution");
  add_inputs(oracle, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) return cmd_solve(a);
    if (*mc) return cmd_mc(a);
    if (*check) return cmd_check(a);
    if (*oracle) return cmd_oracle(a);
  } catch (const GasFlowError& e) {
    std::fprintf(stderr, "gfsolve: %s: %s\n", to_string(e.code()), e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gfsolve: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
