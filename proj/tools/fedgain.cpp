// Command-line front end for the communication-efficient distributed
// regression simulator.
//
//   fedgain run          --config <path>   single seeded run
//   fedgain sweep        --config <path>   parameter grid with replications
//   fedgain gain-compare --config <path>   oracle vs estimated trigger, K=1
//   fedgain verify       --config <path>   theorem verification battery
//
// Exit codes: 0 ok, 2 config error, 3 divergence, 4 verification failure.

#include <CLI11.hpp>
#include <cstdint>
#include <string>

#include <fedgain/cli.hpp>

int main(int argc, char** argv) {
  CLI::App app{"communication-efficient distributed regression simulator"};
  app.require_subcommand(1);

  std::string config_path;
  fedgain::cli::Overrides overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  long replications = 0;
  unsigned threads = 0;

  auto add_common = [&](CLI::App* cmd, bool with_reps) {
    cmd->add_option("--config", config_path, "experiment config file")
        ->required();
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--seed", seed, "stream seed override");
    if (with_reps)
      cmd->add_option("--replications", replications,
                      "replication count override");
    cmd->add_flag("--no-plots", overrides.no_plots, "skip SVG emission");
    cmd->add_option("--threads", threads,
                    "worker threads (default: hardware)");
  };

  auto* run_cmd = app.add_subcommand("run", "execute one seeded run");
  add_common(run_cmd, false);
  auto* sweep_cmd =
      app.add_subcommand("sweep", "replicated runs over a parameter grid");
  add_common(sweep_cmd, true);
  auto* compare_cmd = app.add_subcommand(
      "gain-compare", "oracle vs estimated gain decisions, single step");
  add_common(compare_cmd, true);
  auto* verify_cmd =
      app.add_subcommand("verify", "run the theorem verification battery");
  add_common(verify_cmd, true);

  CLI11_PARSE(app, argc, argv);

  if (!out_dir.empty()) overrides.output_dir = out_dir;
  for (const auto* cmd : {sweep_cmd, compare_cmd, verify_cmd, run_cmd})
    if (cmd->parsed() && cmd->count("--seed")) overrides.seed = seed;
  if (replications > 0) overrides.replications = replications;

  if (run_cmd->parsed()) return fedgain::cli::cmd_run(config_path, overrides);
  if (sweep_cmd->parsed())
    return fedgain::cli::cmd_sweep(config_path, overrides, threads);
  if (compare_cmd->parsed())
    return fedgain::cli::cmd_gain_compare(config_path, overrides, threads);
  if (verify_cmd->parsed())
    return fedgain::cli::cmd_verify(config_path, overrides, threads);
  return 1;
}
