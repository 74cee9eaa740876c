#pragma once

// Command implementations behind the `fedgain` binary. Each returns a
// process exit code: 0 ok, 2 configuration error, 3 divergence, 4
// verification failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fedgain/experiments.hpp"

namespace fedgain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitVerification = 4;

struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long> replications;
  bool no_plots = false;
};

namespace detail {

inline void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.seed) cfg.run.stream.seed = *ov.seed;
  if (ov.replications) {
    if (*ov.replications < 1)
      throw ConfigError("--replications must be >= 1");
    cfg.replications = *ov.replications;
  }
  if (ov.no_plots) cfg.emit_plots = false;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

inline void print_warnings(const RunTrace& trace) {
  for (const auto& w : trace.warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace detail

// Single seeded run: trace.log + summary.csv + effective.cfg.
inline int cmd_run(const std::string& config_path, const Overrides& ov = {}) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_experiment(config_path);
    detail::apply_overrides(cfg, ov);
    const RunTrace trace = run(cfg.run);
    detail::print_warnings(trace);
    const std::filesystem::path dir(cfg.output_dir);
    std::ostringstream trace_text;
    write_trace(trace_text, trace, cfg.run);
    detail::write_file(dir / "trace.log", trace_text.str());
    detail::write_file(dir / "summary.csv", run_summary_csv(trace, cfg.run));
    detail::write_file(dir / "effective.cfg", effective_config_text(cfg));
    if (trace.status == RunStatus::kDiverged) {
      std::cerr << "run diverged (objective exceeded "
                << fmt_double(kDivergenceGuard) << ")\n";
      return kExitDivergence;
    }
    std::cout << "final objective " << fmt_double(trace.final_objective)
              << ", transmissions " << trace.total_transmits << " (outputs in "
              << dir.string() << ")\n";
    return kExitOk;
  });
}

// Grid sweep: sweep.csv (+ sweep.svg) + effective.cfg. Divergent grid
// points are recorded per row, not fatal.
inline int cmd_sweep(const std::string& config_path, const Overrides& ov = {},
                     unsigned threads = 0) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_experiment(config_path);
    detail::apply_overrides(cfg, ov);
    const SweepResult result = experiment_sweep(cfg, threads);
    const std::filesystem::path dir(cfg.output_dir);
    detail::write_file(dir / "sweep.csv", sweep_csv(result));
    if (cfg.emit_plots)
      detail::write_file(dir / "sweep.svg", sweep_svg(result));
    detail::write_file(dir / "effective.cfg", effective_config_text(cfg));
    long diverged = 0;
    for (const auto& r : result.rows) diverged += r.diverged;
    std::cout << result.rows.size() << " grid points x " << cfg.replications
              << " replications";
    if (diverged > 0) std::cout << ", " << diverged << " diverged runs";
    std::cout << " (outputs in " << dir.string() << ")\n";
    return kExitOk;
  });
}

// Paired oracle/estimated comparison over a lambda grid, single step:
// gain_compare.csv (+ gain_compare.svg) + effective.cfg.
inline int cmd_gain_compare(const std::string& config_path,
                            const Overrides& ov = {}, unsigned threads = 0) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_experiment(config_path);
    detail::apply_overrides(cfg, ov);
    std::vector<double> lambdas;
    for (const auto& curve : cfg.curves)
      if (curve.parameter_path == "policy.lambda") lambdas = curve.values;
    if (lambdas.empty())
      throw ConfigError(
          "gain-compare needs a 'sweep.policy.lambda' grid in the config");
    const GainCompareResult result =
        experiment_gain_compare(cfg, lambdas, threads);
    const std::filesystem::path dir(cfg.output_dir);
    detail::write_file(dir / "gain_compare.csv", gain_compare_csv(result));
    if (cfg.emit_plots)
      detail::write_file(dir / "gain_compare.svg", gain_compare_svg(result));
    detail::write_file(dir / "effective.cfg", effective_config_text(cfg));
    double min_agree = 1.0;
    for (const auto& r : result.rows)
      min_agree = std::min(min_agree, r.agreement_rate);
    std::cout << result.rows.size() << " lambda points, minimum agreement "
              << fmt_double(min_agree) << " (outputs in " << dir.string()
              << ")\n";
    return kExitOk;
  });
}

// Theorem battery: verify.txt + summary.csv + effective.cfg; exit 4 when an
// asserted check fails.
inline int cmd_verify(const std::string& config_path, const Overrides& ov = {},
                      unsigned threads = 0) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_experiment(config_path);
    detail::apply_overrides(cfg, ov);
    if (ov.replications) {
      cfg.verify.convergence_replications = *ov.replications;
      cfg.verify.budget_replications = *ov.replications;
      cfg.verify.steady_replications = *ov.replications;
    }
    const VerifyResult result = experiment_verify(cfg, threads);
    const std::filesystem::path dir(cfg.output_dir);
    const std::string text = verify_text(result);
    detail::write_file(dir / "verify.txt", text);
    detail::write_file(dir / "summary.csv", verify_csv(result));
    detail::write_file(dir / "effective.cfg", effective_config_text(cfg));
    std::cout << text;
    return result.all_applicable_pass ? kExitOk : kExitVerification;
  });
}

}  // namespace fedgain::cli
