// schedule-sim: command-line front end for the scheduling library.
//
//   schedule-sim run     --config campaign.json [--out results/]
//   schedule-sim solve   --channel h.csv --cost mse|rate --us N --ts N --T N --snr-db X
//   schedule-sim count   --U N --T N --us N [--ts N]
//   schedule-sim project --in z.csv --umin N --umax N --tmin N --tmax N
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmsched/baselines.hpp"
#include "mmsched/channel.hpp"
#include "mmsched/sim.hpp"

namespace {

using nlohmann::json;
using namespace mmsched;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text << '\n';
}

json matrix_json(const RMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json binary_json(const ScheduleMatrix& s) {
  json rows = json::array();
  for (int u = 0; u < s.ues(); ++u) {
    json row = json::array();
    for (int t = 0; t < s.slots(); ++t) row.push_back(static_cast<int>(s(u, t)));
    rows.push_back(row);
  }
  return rows;
}

// Dense real matrix: header `U,T`, then U lines of T comma-separated values.
RMatrix load_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  auto numbers = [&](const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError(path + ": malformed number `" + cell + "`");
      }
    }
    return v;
  };
  if (!next()) throw ConfigError(path + ": empty file");
  const auto header = numbers(line);
  if (header.size() != 2 || header[0] < 1 || header[1] < 1) {
    throw ConfigError(path + ": expected header `U,T`");
  }
  const auto rows = static_cast<Eigen::Index>(header[0]);
  const auto cols = static_cast<Eigen::Index>(header[1]);
  RMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!next()) throw ConfigError(path + ": expected " + std::to_string(rows) + " rows");
    const auto v = numbers(line);
    if (static_cast<Eigen::Index>(v.size()) != cols) {
      throw ConfigError(path + ": row " + std::to_string(r) + " has the wrong number of columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(c)];
  }
  if (next()) throw ConfigError(path + ": trailing rows");
  return m;
}

struct RunArgs {
  std::string config;
  std::string out = "results";
};

struct SolveArgs {
  std::string channel;
  std::string cost = "mse";
  int u_s = 0;
  int t_s = 1;
  int slots = 0;
  double snr_db = 0.0;
  double eta_db = 6.0;
  int restarts = 1;
  int i_max = 100;
  bool no_local_search = false;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output;
};

struct CountArgs {
  int ues = 0;
  int slots = 0;
  int u_s = 0;
  int t_s = 1;
  std::string output;
};

struct ProjectArgs {
  std::string input;
  int u_min = 0;
  int u_max = 0;
  int t_min = 0;
  int t_max = 0;
  double beta = 1.0;
  int k_max = 50;
  double tol = 1e-6;
  std::string output;
};

int do_run(const RunArgs& args) {
  CampaignConfig cfg;
  try {
    cfg = load_campaign_config(args.config);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const CampaignResult result = run_campaign(cfg);
  emit_results(result, args.out);
  std::cerr << "wrote results for " << cfg.schedulers.size() << " schedulers to " << args.out
            << " (" << result.wall_seconds << " s)\n";
  return 0;
}

int do_solve(const SolveArgs& args) {
  CostKind kind;
  ScenarioSpec scen;
  CMatrix h;
  try {
    kind = parse_cost_kind(args.cost);
    const ChannelMatrix raw = load_channel_csv(args.channel);
    scen = ScenarioSpec{static_cast<int>(raw.antennas()), static_cast<int>(raw.ues()), args.slots,
                        args.t_s, args.u_s};
    scen.validate();
    h = apply_power_control(raw, args.eta_db).effective;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const CostFunctionSpec spec{kind, LinkParams::from_snr_db(args.snr_db), 0.0};
  FbsConfig fbs;
  fbs.restarts = args.restarts;
  fbs.i_max = args.i_max;
  fbs.local_search = !args.no_local_search;
  fbs.seed = args.seed;
  fbs.workers = args.workers;
  const ScheduleSolution sol = solve(h, spec, scen.constraints(), fbs);
  json out = {{"cost", std::string(to_string(kind))},
              {"snr_db", args.snr_db},
              {"schedule", binary_json(sol.schedule)},
              {"objective", sol.objective},
              {"restart_index", sol.restart_index},
              {"iterations", sol.iterations_used},
              {"feasibility_repaired", sol.feasibility_repaired},
              {"tau", sol.tau},
              {"alpha", sol.alpha},
              {"seed", args.seed}};
  write_output(out.dump(2), args.output);
  return 0;
}

int do_count(const CountArgs& args) {
  ScenarioSpec scen{1, args.ues, args.slots, args.t_s, args.u_s};
  try {
    scen.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  write_output(count_feasible(scen).str(), args.output);
  return 0;
}

int do_project(const ProjectArgs& args) {
  const RMatrix z = load_dense_csv(args.input);
  const SchedulingConstraints k{static_cast<int>(z.rows()), static_cast<int>(z.cols()),
                                args.u_min, args.u_max, args.t_min, args.t_max};
  const DrsConfig drs{args.beta, args.k_max, args.tol};
  try {
    k.validate();
    drs.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const DrsResult r = drs_project(z, k, drs);
  json out = {{"projection", matrix_json(r.v)},
              {"ct_residual", r.ct_residual},
              {"iterations", r.iterations},
              {"converged", r.converged}};
  write_output(out.dump(2), args.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimization-based MU-MIMO user scheduling simulator"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a Monte-Carlo campaign from a JSON config");
  run->add_option("--config", run_args.config, "Campaign config (JSON)")->required();
  run->add_option("--out", run_args.out, "Output directory")->capture_default_str();

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Schedule one channel and print C and F(C)");
  solve_cmd->add_option("--channel", solve_args.channel, "Channel CSV")->required();
  solve_cmd->add_option("--cost", solve_args.cost, "mse or rate")->capture_default_str();
  solve_cmd->add_option("--us", solve_args.u_s, "UEs per slot")->required();
  solve_cmd->add_option("--ts", solve_args.t_s, "Slots per UE")->capture_default_str();
  solve_cmd->add_option("--T", solve_args.slots, "Number of slots")->required();
  solve_cmd->add_option("--snr-db", solve_args.snr_db, "Es/N0 per antenna in dB")->required();
  solve_cmd->add_option("--eta-db", solve_args.eta_db, "Power-control dynamic range")
      ->capture_default_str();
  solve_cmd->add_option("--restarts", solve_args.restarts, "Random initializations")
      ->capture_default_str();
  solve_cmd->add_option("--i-max", solve_args.i_max, "FBS iterations")->capture_default_str();
  solve_cmd->add_flag("--no-local-search", solve_args.no_local_search,
                      "Keep the quantized candidates as they are");
  solve_cmd->add_option("--seed", solve_args.seed, "Seed")->capture_default_str();
  solve_cmd->add_option("--workers", solve_args.workers, "Threads for restarts")
      ->capture_default_str();
  solve_cmd->add_option("--output", solve_args.output, "Write JSON here instead of stdout");

  CountArgs count_args;
  auto* count = app.add_subcommand("count", "Count feasible scheduling matrices");
  count->add_option("--U", count_args.ues, "Number of UEs")->required();
  count->add_option("--T", count_args.slots, "Number of slots")->required();
  count->add_option("--us", count_args.u_s, "UEs per slot")->required();
  count->add_option("--ts", count_args.t_s, "Slots per UE")->capture_default_str();
  count->add_option("--output", count_args.output, "Write the count here instead of stdout");

  ProjectArgs project_args;
  auto* project = app.add_subcommand("project", "Project a matrix onto C_U ∩ C_T with DRS");
  project->add_option("--in", project_args.input, "Dense CSV: `U,T` then U rows")->required();
  project->add_option("--umin", project_args.u_min)->required();
  project->add_option("--umax", project_args.u_max)->required();
  project->add_option("--tmin", project_args.t_min)->required();
  project->add_option("--tmax", project_args.t_max)->required();
  project->add_option("--beta", project_args.beta)->capture_default_str();
  project->add_option("--kmax", project_args.k_max)->capture_default_str();
  project->add_option("--tol", project_args.tol)->capture_default_str();
  project->add_option("--output", project_args.output, "Write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return do_run(run_args);
    if (*solve_cmd) return do_solve(solve_args);
    if (*count) return do_count(count_args);
    if (*project) return do_project(project_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
