// Command-line front end: exact verification of the deadline scheduler
// against the dynamic-programming optimum, Monte Carlo simulation runs,
// utilization sweeps, and trace conversion.
//
// Exit codes: 0 success, 1 verification or runtime failure, 2 configuration
// error, 3 I/O error.

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dashsim/config.hpp"
#include "dashsim/engine.hpp"
#include "dashsim/errors.hpp"
#include "dashsim/metrics_io.hpp"
#include "dashsim/model.hpp"
#include "dashsim/oracle.hpp"
#include "dashsim/scheduler.hpp"
#include "dashsim/trace_io.hpp"

namespace {

using dashsim::ConfigError;
using dashsim::IoError;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

nlohmann::json instance_descriptor(const dashsim::OracleInstance& inst) {
  nlohmann::json users = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.curves.size(); ++i) {
    nlohmann::json increments = nlohmann::json::array();
    for (const auto& inc : inst.curves[i].increments)
      increments.push_back({inc.deadline, inc.cumulative});
    users.push_back({{"beta", inst.beta[i]}, {"increments", increments}});
  }
  return {{"num_users", inst.num_users()}, {"horizon", inst.horizon()}, {"users", users}};
}

struct VerifyArgs {
  int instances = 200;
  int max_users = 3;
  dashsim::Slot max_horizon = 10;
  std::uint64_t seed = 1;
  std::string policy = "bdra";
  double tolerance = 1e-12;
  bool quiet = false;
};

int run_verify(const VerifyArgs& args) {
  dashsim::CounterRng rng(args.seed, 0, dashsim::StreamRole::instance);
  dashsim::InstanceOptions options;
  options.max_users = args.max_users;
  options.max_horizon = args.max_horizon;
  double max_gap = 0.0;
  bool all_exchange_ok = true;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < args.instances; ++i) {
    // Instance 0 is a fixed ordering-sensitive case; the rest are random.
    const dashsim::OracleInstance inst =
        i == 0 ? dashsim::ordering_counterexample() : dashsim::random_instance(rng, options);
    const auto policy = args.policy == "ldf"
                            ? dashsim::latest_deadline_policy(inst.curves)
                            : dashsim::bdra_curve_policy(inst.curves);
    const auto t0 = std::chrono::steady_clock::now();
    const dashsim::VerifyReport report =
        dashsim::verify_policy(policy, inst.curves, inst.beta, args.tolerance);
    max_gap = std::max(max_gap, report.max_gap);
    all_exchange_ok = all_exchange_ok && report.exchange_ok;
    if (!args.quiet) {
      nlohmann::json line;
      line["instance"] = i;
      line["descriptor"] = instance_descriptor(inst);
      line["max_gap"] = report.max_gap;
      line["exchange_ok"] = report.exchange_ok;
      line["policy_root"] = report.policy_root;
      line["optimal_root"] = report.optimal_root;
      line["states_checked"] = report.states_checked;
      line["ms"] = elapsed_ms(t0);
      std::cout << line.dump() << '\n';
    }
  }
  const bool pass = max_gap <= args.tolerance && all_exchange_ok;
  nlohmann::json summary;
  summary["instances"] = args.instances;
  summary["policy"] = args.policy;
  summary["max_gap"] = max_gap;
  summary["exchange_ok"] = all_exchange_ok;
  summary["tolerance"] = args.tolerance;
  summary["ms"] = elapsed_ms(start);
  summary["verdict"] = pass ? "PASS" : "FAIL";
  std::cout << summary.dump() << '\n';
  return pass ? 0 : 1;
}

struct SimArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheduler;
  std::optional<double> rho;
  std::optional<int> episodes;
  int jobs = 1;
  bool events = false;
};

dashsim::ConfigOverrides make_overrides(const std::optional<std::uint64_t>& seed_flag,
                                        const std::optional<std::string>& scheduler,
                                        const std::optional<double>& rho,
                                        const std::optional<int>& episodes) {
  dashsim::ConfigOverrides overrides;
  overrides.seed = seed_flag ? seed_flag : dashsim::env_seed_override();
  overrides.scheduler = scheduler;
  overrides.rho_inverse = rho;
  overrides.episodes = episodes;
  return overrides;
}

int run_simulate(const SimArgs& args) {
  const dashsim::ResolvedRun run = dashsim::load_config_file(
      args.config_path, make_overrides(args.seed, args.scheduler, args.rho, args.episodes));
  const dashsim::EpisodeSetup setup = dashsim::make_setup(run.cfg, run.traces);
  std::filesystem::create_directories(args.out_dir);
  const auto out_path = [&](const char* name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };

  if (args.events) {
    // Event log covers episode 0; episodes are independent and episode 0 is
    // recomputed identically inside the batch below.
    auto log = dashsim::open_output(out_path("events.log"));
    log << "slot,event,user,detail\n";
    dashsim::run_episode(setup, run.scheduler, run.channel, run.cfg.seed, 0, &log);
  }

  const dashsim::MonteCarloSummary summary = dashsim::run_monte_carlo(
      setup, run.scheduler, run.channel, run.cfg.seed, run.cfg.episodes, args.jobs);

  {
    auto out = dashsim::open_output(out_path("metrics.csv"));
    out.precision(17);
    dashsim::write_metrics_csv(out, summary);
  }
  {
    auto out = dashsim::open_output(out_path("histogram.csv"));
    dashsim::write_histogram_csv(out, summary.histogram);
  }
  {
    auto out = dashsim::open_output(out_path("metrics.json"));
    out << dashsim::metrics_json(summary).dump(2) << '\n';
  }
  {
    auto out = dashsim::open_output(out_path("manifest.json"));
    out << dashsim::manifest_json(run).dump(2) << '\n';
  }
  if (summary.any_truncated)
    std::cerr << "warning: at least one episode hit the defensive slot cap\n";
  std::cout << "episodes=" << summary.episodes << " scheduler=" << to_string(run.scheduler.policy)
            << " rho_inverse=" << run.cfg.rho_inverse
            << " mean_stalls=" << summary.total_stalls.mean
            << " zero_stall_fraction=" << summary.zero_stall_fraction
            << " out=" << args.out_dir << '\n';
  return 0;
}

struct SweepArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<double> rhos;
  std::vector<std::string> schedulers = {"bdra", "rfra", "wrfra", "dwrfra"};
  int repeats = 30;
  int jobs = 1;
};

// Scheduler variants are "<policy>" or "<policy>:<request_mode>".
void split_variant(const std::string& variant, std::string& policy, std::string& mode) {
  const auto colon = variant.find(':');
  policy = variant.substr(0, colon);
  mode = colon == std::string::npos ? "" : variant.substr(colon + 1);
}

int run_sweep(const SweepArgs& args) {
  if (args.rhos.empty()) throw ConfigError("sweep: at least one --rho value is required");
  std::vector<dashsim::SweepRow> rows;
  nlohmann::json manifest_config;
  for (const double rho : args.rhos) {
    for (const auto& variant : args.schedulers) {
      std::string policy, mode;
      split_variant(variant, policy, mode);
      dashsim::ConfigOverrides overrides =
          make_overrides(args.seed, policy, rho, args.repeats);
      if (!mode.empty()) overrides.request_mode = mode;
      const dashsim::ResolvedRun run = dashsim::load_config_file(args.config_path, overrides);
      const dashsim::EpisodeSetup setup = dashsim::make_setup(run.cfg, run.traces);
      const dashsim::MonteCarloSummary summary = dashsim::run_monte_carlo(
          setup, run.scheduler, run.channel, run.cfg.seed, run.cfg.episodes, args.jobs);
      dashsim::append_sweep_rows(rows, rho, variant, summary);
      if (manifest_config.is_null()) manifest_config = run.resolved;
    }
  }
  std::filesystem::create_directories(args.out_dir);
  {
    auto out = dashsim::open_output(
        (std::filesystem::path(args.out_dir) / "sweep.csv").string());
    out.precision(17);
    dashsim::write_sweep_csv(out, rows);
  }
  {
    nlohmann::json m;
    m["code_version"] = dashsim::kCodeVersion;
    m["config"] = manifest_config;
    m["sweep"] = {{"rho", args.rhos}, {"schedulers", args.schedulers},
                  {"repeats", args.repeats}};
    auto out = dashsim::open_output(
        (std::filesystem::path(args.out_dir) / "manifest.json").string());
    out << m.dump(2) << '\n';
  }
  std::cout << "sweep rows=" << rows.size() << " out=" << args.out_dir << '\n';
  return 0;
}

struct ConvertArgs {
  std::string input;
  std::string output;
  double frame_rate = 30.0;
  int gop_frames = 16;
  std::string label;
};

int run_convert(const ConvertArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw IoError("cannot open input trace: " + args.input);
  const std::string label =
      args.label.empty() ? std::filesystem::path(args.input).stem().string() : args.label;
  const dashsim::FrameTrace trace = dashsim::convert_whitespace_trace(
      in, args.input, args.frame_rate, args.gop_frames, label);
  dashsim::save_trace(args.output, trace);
  std::cout << "converted " << trace.frame_bits.size() << " frames to " << args.output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slot-based multiuser streaming simulator and scheduler verifier"};
  app.require_subcommand(1);

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand(
      "verify", "Check the deadline scheduler against the exact optimum on random instances");
  verify->add_option("--instances", verify_args.instances, "Number of instances")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--max-users", verify_args.max_users, "Largest user count")
      ->check(CLI::Range(1, 8));
  verify->add_option("--max-horizon", verify_args.max_horizon, "Largest horizon in slots")
      ->check(CLI::Range(2, 40));
  verify->add_option("--seed", verify_args.seed, "Instance stream seed");
  verify->add_option("--policy", verify_args.policy, "Policy under test: bdra or ldf")
      ->check(CLI::IsMember({"bdra", "ldf"}));
  verify->add_option("--tolerance", verify_args.tolerance, "Gap tolerance");
  verify->add_flag("--quiet", verify_args.quiet, "Summary line only");

  SimArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run from a config file");
  simulate->add_option("--config", sim_args.config_path, "Config or manifest JSON")->required();
  simulate->add_option("--out", sim_args.out_dir, "Output directory");
  std::uint64_t sim_seed = 0;
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Seed override");
  std::string sim_sched;
  auto* sim_sched_opt =
      simulate->add_option("--scheduler", sim_sched, "Scheduler override")
          ->check(CLI::IsMember({"bdra", "rfra", "wrfra", "dwrfra", "random"}));
  double sim_rho = 0.0;
  auto* sim_rho_opt = simulate->add_option("--rho", sim_rho, "Inverse utilization override");
  int sim_episodes = 0;
  auto* sim_episodes_opt =
      simulate->add_option("--episodes", sim_episodes, "Episode count override")
          ->check(CLI::PositiveNumber);
  simulate->add_option("--jobs", sim_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_flag("--events", sim_args.events, "Write events.log for episode 0");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Paired-seed sweep over inverse utilization");
  sweep->add_option("--config", sweep_args.config_path, "Config or manifest JSON")->required();
  sweep->add_option("--out", sweep_args.out_dir, "Output directory");
  std::uint64_t sweep_seed = 0;
  auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "Seed override");
  sweep->add_option("--rho", sweep_args.rhos, "Inverse utilization values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--scheduler", sweep_args.schedulers,
                    "Scheduler variants, e.g. bdra or bdra:super_gop")
      ->delimiter(',');
  sweep->add_option("--repeats", sweep_args.repeats, "Episodes per point")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", sweep_args.jobs, "Worker threads")->check(CLI::PositiveNumber);

  ConvertArgs convert_args;
  auto* trace = app.add_subcommand("trace", "Trace utilities");
  auto* convert = trace->add_subcommand(
      "convert", "Convert a two-column whitespace frame listing to the canonical format");
  convert->add_option("input", convert_args.input, "Input listing")->required();
  convert->add_option("--out,output", convert_args.output, "Output trace file")->required();
  convert->add_option("--frame-rate", convert_args.frame_rate, "Frames per second")
      ->check(CLI::PositiveNumber);
  convert->add_option("--gop-frames", convert_args.gop_frames, "Frames per GoP")
      ->check(CLI::PositiveNumber);
  convert->add_option("--label", convert_args.label, "Trace label");
  trace->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) {
      if (const auto env = dashsim::env_seed_override(); env && verify_args.seed == 1)
        verify_args.seed = *env;
      return run_verify(verify_args);
    }
    if (simulate->parsed()) {
      if (*sim_seed_opt) sim_args.seed = sim_seed;
      if (*sim_sched_opt) sim_args.scheduler = sim_sched;
      if (*sim_rho_opt) sim_args.rho = sim_rho;
      if (*sim_episodes_opt) sim_args.episodes = sim_episodes;
      return run_simulate(sim_args);
    }
    if (sweep->parsed()) {
      if (*sweep_seed_opt) sweep_args.seed = sweep_seed;
      return run_sweep(sweep_args);
    }
    if (trace->parsed()) return run_convert(convert_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
