#pragma once

// Experiment orchestration: resolving configs into runnable setups, sweep
// and comparison drivers, theorem-verification batteries, and their CSV /
// SVG renderings. Everything here is a pure function of the resolved
// config; replications run in parallel but aggregate in index order, so a
// given config always produces the same bytes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fedgain/config.hpp"
#include "fedgain/parallel.hpp"
#include "fedgain/sim.hpp"
#include "fedgain/svg.hpp"
#include "fedgain/theory.hpp"

namespace fedgain {

inline constexpr const char* kCsvBanner = "# fedgain-sim v1\n";

// --- problem presets --------------------------------------------------------

// Two-dimensional benchmark: cov = diag(3,1), w_true = [3,5], unit noise.
inline ProblemSpec bench_n2_problem() {
  Vec w(2);
  w << 3, 5;
  Mat c = Mat::Zero(2, 2);
  c(0, 0) = 3;
  c(1, 1) = 1;
  return ProblemSpec::create(w, c, 1.0);
}

// Ten-dimensional benchmark: seeded random diagonal covariance with entries
// in [0.5, 9] and w_true entries in [-5, 5], unit noise. The wide eigenvalue
// spread makes the Hessian strongly non-isotropic, which is where gain-based
// and norm-based triggers separate.
inline ProblemSpec bench_n10_problem(std::uint64_t preset_seed) {
  const int n = 10;
  CounterRng rng(preset_seed, 0, 0, StreamPurpose::kProblemGen);
  Mat c = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) c(i, i) = 0.5 + 8.5 * rng.next_unit();
  Vec w(n);
  for (int i = 0; i < n; ++i) w[i] = -5.0 + 10.0 * rng.next_unit();
  return ProblemSpec::create(w, c, 1.0);
}

// --- experiment configuration ----------------------------------------------

struct SweepCurve {
  std::string name;            // empty for the single default curve
  PolicyKind policy;
  std::string parameter_path;  // policy.lambda | policy.mu | policy.p | run.step_size
  std::vector<double> values;
};

struct VerifyParams {
  long convergence_replications = 10000;
  long budget_replications = 10000;
  long steady_replications = 2000;
  int steady_iterations = 120;
  int steady_burn_in = 60;
  long g_samples = 100000;
  long selection_samples = 100000;
};

struct ExperimentConfig {
  RunConfig run;
  long replications = 1;
  std::string output_dir = "out";
  bool emit_plots = true;
  std::vector<SweepCurve> curves;  // nonempty only when sweep keys present
  VerifyParams verify;
  // preserved for the effective-config echo
  std::optional<std::string> preset;
  std::uint64_t preset_seed = 2024;
};

namespace detail {

// `allow_default` covers configs whose policy parameter arrives via a sweep
// grid; plain run configs must state it.
inline PolicyKind parse_policy(FlatConfig& cfg, const std::string& prefix,
                               bool allow_default) {
  const std::string kind = cfg.get_string(prefix + ".kind");
  auto param = [&](const char* name, double dflt) {
    const std::string key = prefix + "." + name;
    if (cfg.has(key)) return cfg.get_double(key);
    if (allow_default) return dflt;
    throw ConfigError("missing required key '" + key + "' for policy '" +
                      kind + "'");
  };
  if (kind == "oracle-gain") return OracleGain{param("lambda", 1.0)};
  if (kind == "estimated-gain") return EstimatedGain{param("lambda", 1.0)};
  if (kind == "grad-norm") return GradNorm{param("mu", 1.0)};
  if (kind == "always") return Always{};
  if (kind == "never") return Never{};
  if (kind == "random") return RandomPolicy{param("p", 0.5)};
  throw ConfigError("key '" + prefix + ".kind': unknown policy '" + kind +
                    "' (expected oracle-gain, estimated-gain, grad-norm, "
                    "always, never, random)");
}

inline double policy_parameter(const PolicyKind& kind) {
  if (const auto* o = std::get_if<OracleGain>(&kind)) return o->lambda;
  if (const auto* e = std::get_if<EstimatedGain>(&kind)) return e->lambda;
  if (const auto* g = std::get_if<GradNorm>(&kind)) return g->mu;
  if (const auto* r = std::get_if<RandomPolicy>(&kind)) return r->p;
  return 0.0;
}

}  // namespace detail

// Applies one sweep value at a parameter path; the returned config is
// validated by the subsequent run.
inline RunConfig with_parameter(RunConfig cfg, const std::string& path,
                                double value) {
  if (path == "run.step_size") {
    cfg.step_size = value;
    return cfg;
  }
  if (path == "policy.lambda") {
    if (auto* o = std::get_if<OracleGain>(&cfg.policy)) {
      o->lambda = value;
      return cfg;
    }
    if (auto* e = std::get_if<EstimatedGain>(&cfg.policy)) {
      e->lambda = value;
      return cfg;
    }
    throw ConfigError("sweep path 'policy.lambda' needs a gain policy, got " +
                      std::string(policy_name(cfg.policy)));
  }
  if (path == "policy.mu") {
    if (auto* g = std::get_if<GradNorm>(&cfg.policy)) {
      g->mu = value;
      return cfg;
    }
    throw ConfigError("sweep path 'policy.mu' needs the grad-norm policy");
  }
  if (path == "policy.p") {
    if (auto* r = std::get_if<RandomPolicy>(&cfg.policy)) {
      r->p = value;
      return cfg;
    }
    throw ConfigError("sweep path 'policy.p' needs the random policy");
  }
  throw ConfigError("unsupported sweep parameter path '" + path +
                    "' (expected policy.lambda, policy.mu, policy.p or "
                    "run.step_size)");
}

inline ExperimentConfig resolve_experiment(FlatConfig cfg) {
  ExperimentConfig out;

  // problem: preset or explicit fields, not both
  const bool has_preset = cfg.has("problem.preset");
  if (has_preset) {
    const std::string preset = cfg.get_string("problem.preset");
    out.preset = preset;
    out.preset_seed = cfg.get_u64("problem.preset_seed", 2024);
    if (preset == "bench-n2")
      out.run.stream.spec = bench_n2_problem();
    else if (preset == "bench-n10")
      out.run.stream.spec = bench_n10_problem(out.preset_seed);
    else
      throw ConfigError("key 'problem.preset': unknown preset '" + preset +
                        "' (expected bench-n2 or bench-n10)");
    if (cfg.has("problem.true_weights") || cfg.has("problem.feature_cov") ||
        cfg.has("problem.noise_std"))
      throw ConfigError(
          "problem.preset excludes explicit problem.* fields; pick one");
  } else {
    out.run.stream.spec = ProblemSpec::create(
        cfg.get_vec("problem.true_weights"), cfg.get_mat("problem.feature_cov"),
        cfg.get_double("problem.noise_std"));
  }

  out.run.stream.batch_size =
      static_cast<int>(cfg.get_long("stream.batch_size"));
  out.run.stream.num_agents =
      static_cast<int>(cfg.get_long("stream.num_agents", 2));
  out.run.stream.seed = cfg.get_u64("stream.seed", 1);

  out.run.step_size = cfg.get_double("run.step_size");
  if (out.run.step_size <= 0.0)
    throw ConfigError("key 'run.step_size': must be > 0");
  out.run.num_iterations = static_cast<int>(cfg.get_long("run.iterations"));
  if (out.run.num_iterations < 1)
    throw ConfigError("key 'run.iterations': must be >= 1");
  if (cfg.has("run.initial_weights")) {
    out.run.initial_weights = cfg.get_vec("run.initial_weights");
  } else {
    out.run.initial_weights = Vec::Zero(out.run.stream.spec.dim);
  }
  if (out.run.initial_weights.size() != out.run.stream.spec.dim)
    throw ConfigError("key 'run.initial_weights': length does not match dim");
  const std::string mode = cfg.get_string("run.gradient_mode", "stochastic");
  if (mode == "stochastic")
    out.run.gradient_mode = GradientMode::kStochastic;
  else if (mode == "exact")
    out.run.gradient_mode = GradientMode::kExact;
  else
    throw ConfigError(
        "key 'run.gradient_mode': expected stochastic or exact");

  const bool param_from_sweep = cfg.has("sweep.policy.lambda") ||
                                cfg.has("sweep.policy.mu") ||
                                cfg.has("sweep.policy.p") || cfg.has("curves");
  out.run.policy = detail::parse_policy(cfg, "policy", param_from_sweep);
  validate_policy(out.run.policy);

  out.replications = cfg.get_long("replications", 1);
  if (out.replications < 1)
    throw ConfigError("key 'replications': must be >= 1");
  out.output_dir = cfg.get_string("output_dir", "out");
  out.emit_plots = cfg.get_bool("emit_plots", true);

  // sweeps: either top-level `sweep.<path>` on the base policy, or named
  // curves `curve.<name>.policy.* / curve.<name>.sweep.<path>`
  const auto sweep_paths = cfg.keys_with_prefix("sweep.");
  for (const auto& path : sweep_paths) {
    SweepCurve curve;
    curve.name = "";
    curve.policy = out.run.policy;
    curve.parameter_path = path;
    curve.values = cfg.get_list("sweep." + path);
    if (curve.values.empty()) throw ConfigError("empty sweep grid");
    out.curves.push_back(std::move(curve));
  }
  if (cfg.has("curves")) {
    if (!sweep_paths.empty())
      throw ConfigError("'curves' excludes top-level 'sweep.*' keys");
    for (const auto& name : detail::split(cfg.get_string("curves"), ',')) {
      if (name.empty()) throw ConfigError("empty curve name");
      SweepCurve curve;
      curve.name = name;
      curve.policy = detail::parse_policy(cfg, "curve." + name + ".policy",
                                          /*allow_default=*/true);
      const auto paths = cfg.keys_with_prefix("curve." + name + ".sweep.");
      if (paths.size() != 1)
        throw ConfigError("curve '" + name +
                          "' needs exactly one sweep.<path> key");
      curve.parameter_path = paths[0];
      curve.values = cfg.get_list("curve." + name + ".sweep." + paths[0]);
      out.curves.push_back(std::move(curve));
    }
  }
  if (out.curves.size() > 1 && !out.curves.front().name.empty()) {
    // multi-curve mode: fine
  } else if (out.curves.size() > 1) {
    throw ConfigError("multiple top-level sweep.* keys are not supported; "
                      "use named curves");
  }

  out.verify.convergence_replications =
      cfg.get_long("verify.convergence.replications", 10000);
  out.verify.budget_replications =
      cfg.get_long("verify.budget.replications", 10000);
  out.verify.steady_replications =
      cfg.get_long("verify.steady_state.replications", 2000);
  out.verify.steady_iterations =
      static_cast<int>(cfg.get_long("verify.steady_state.iterations", 120));
  out.verify.steady_burn_in =
      static_cast<int>(cfg.get_long("verify.steady_state.burn_in", 60));
  out.verify.g_samples = cfg.get_long("verify.g_samples", 100000);
  out.verify.selection_samples =
      cfg.get_long("verify.selection.samples", 100000);

  cfg.reject_unconsumed();
  return out;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  return resolve_experiment(FlatConfig::parse_file(path));
}

// All defaults resolved, presets expanded to explicit fields. Re-running
// from this file reproduces the outputs byte for byte.
inline std::string effective_config_text(const ExperimentConfig& cfg) {
  std::string out = "# fedgain-sim v1 effective config\n";
  const ProblemSpec& spec = cfg.run.stream.spec;
  out += "problem.true_weights = ";
  for (int i = 0; i < spec.dim; ++i) {
    if (i) out += ',';
    out += fmt_double(spec.true_weights[i]);
  }
  out += "\nproblem.feature_cov = ";
  for (int i = 0; i < spec.dim; ++i) {
    if (i) out += ';';
    for (int j = 0; j < spec.dim; ++j) {
      if (j) out += ',';
      out += fmt_double(spec.feature_cov(i, j));
    }
  }
  out += "\nproblem.noise_std = " + fmt_double(spec.noise_std) + "\n";
  out += "stream.batch_size = " + std::to_string(cfg.run.stream.batch_size) +
         "\n";
  out += "stream.num_agents = " + std::to_string(cfg.run.stream.num_agents) +
         "\n";
  out += "stream.seed = " + std::to_string(cfg.run.stream.seed) + "\n";
  out += "run.step_size = " + fmt_double(cfg.run.step_size) + "\n";
  out += "run.iterations = " + std::to_string(cfg.run.num_iterations) + "\n";
  out += "run.initial_weights = ";
  for (int i = 0; i < cfg.run.initial_weights.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(cfg.run.initial_weights[i]);
  }
  out += "\nrun.gradient_mode = ";
  out += cfg.run.gradient_mode == GradientMode::kExact ? "exact"
                                                       : "stochastic";
  out += "\npolicy.kind = ";
  out += policy_name(cfg.run.policy);
  out += "\n";
  if (std::holds_alternative<OracleGain>(cfg.run.policy) ||
      std::holds_alternative<EstimatedGain>(cfg.run.policy))
    out += "policy.lambda = " +
           fmt_double(detail::policy_parameter(cfg.run.policy)) + "\n";
  else if (std::holds_alternative<GradNorm>(cfg.run.policy))
    out += "policy.mu = " +
           fmt_double(detail::policy_parameter(cfg.run.policy)) + "\n";
  else if (std::holds_alternative<RandomPolicy>(cfg.run.policy))
    out += "policy.p = " +
           fmt_double(detail::policy_parameter(cfg.run.policy)) + "\n";
  out += "replications = " + std::to_string(cfg.replications) + "\n";
  out += "output_dir = " + cfg.output_dir + "\n";
  out += std::string("emit_plots = ") + (cfg.emit_plots ? "true" : "false") +
         "\n";

  if (cfg.curves.size() == 1 && cfg.curves[0].name.empty()) {
    out += "sweep." + cfg.curves[0].parameter_path + " = ";
    for (std::size_t i = 0; i < cfg.curves[0].values.size(); ++i) {
      if (i) out += ',';
      out += fmt_double(cfg.curves[0].values[i]);
    }
    out += "\n";
  } else if (!cfg.curves.empty()) {
    out += "curves = ";
    for (std::size_t c = 0; c < cfg.curves.size(); ++c) {
      if (c) out += ',';
      out += cfg.curves[c].name;
    }
    out += "\n";
    for (const auto& curve : cfg.curves) {
      const std::string p = "curve." + curve.name;
      out += p + ".policy.kind = " + policy_name(curve.policy) + "\n";
      out += p + ".sweep." + curve.parameter_path + " = ";
      for (std::size_t i = 0; i < curve.values.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(curve.values[i]);
      }
      out += "\n";
    }
  }

  out += "verify.convergence.replications = " +
         std::to_string(cfg.verify.convergence_replications) + "\n";
  out += "verify.budget.replications = " +
         std::to_string(cfg.verify.budget_replications) + "\n";
  out += "verify.steady_state.replications = " +
         std::to_string(cfg.verify.steady_replications) + "\n";
  out += "verify.steady_state.iterations = " +
         std::to_string(cfg.verify.steady_iterations) + "\n";
  out += "verify.steady_state.burn_in = " +
         std::to_string(cfg.verify.steady_burn_in) + "\n";
  out += "verify.g_samples = " + std::to_string(cfg.verify.g_samples) + "\n";
  out += "verify.selection.samples = " +
         std::to_string(cfg.verify.selection_samples) + "\n";
  return out;
}

// --- single run --------------------------------------------------------------

inline std::string run_summary_csv(const RunTrace& trace,
                                   const RunConfig& cfg) {
  std::string out = kCsvBanner;
  out +=
      "seed,iterations,status,final_objective,objective_gap,"
      "total_transmits,any_agent_transmits,per_agent_transmits\n";
  const double gap =
      trace.final_objective -
      objective(cfg.stream.spec, cfg.stream.spec.true_weights);
  out += std::to_string(cfg.stream.seed) + ',' +
         std::to_string(cfg.num_iterations) + ',' +
         (trace.status == RunStatus::kOk ? "ok" : "diverged") + ',' +
         fmt_double(trace.final_objective) + ',' + fmt_double(gap) + ',' +
         std::to_string(trace.total_transmits) + ',' +
         std::to_string(trace.any_agent_transmits) + ',';
  for (std::size_t i = 0; i < trace.per_agent_transmits.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(trace.per_agent_transmits[i]);
  }
  out += '\n';
  return out;
}

// --- sweep -------------------------------------------------------------------

struct SweepRow {
  std::string curve;
  std::string parameter_path;
  double value = 0.0;
  double mean_final_objective = 0.0;
  double std_final_objective = 0.0;
  double mean_objective_gap = 0.0;
  double mean_total_transmits = 0.0;
  double mean_any_transmits = 0.0;
  long replications = 0;
  std::uint64_t seed_base = 0;
  long diverged = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Replication r of any grid point uses stream seed base+r; grid points are
// evaluated in config order and rows keep that order.
inline SweepResult experiment_sweep(const ExperimentConfig& cfg,
                                    unsigned threads = 0) {
  if (cfg.curves.empty())
    throw ConfigError("sweep requires a sweep.* grid or named curves");
  SweepResult result;
  const double jstar =
      objective(cfg.run.stream.spec, cfg.run.stream.spec.true_weights);
  for (const auto& curve : cfg.curves) {
    RunConfig base = cfg.run;
    base.policy = curve.policy;
    for (double value : curve.values) {
      const RunConfig point =
          with_parameter(base, curve.parameter_path, value);
      std::vector<double> finals(cfg.replications);
      std::vector<long> totals(cfg.replications), anys(cfg.replications);
      std::vector<std::uint8_t> diverged(cfg.replications, 0);
      parallel_for(
          cfg.replications,
          [&](long rep) {
            RunConfig rc = point;
            rc.stream.seed =
                cfg.run.stream.seed + static_cast<std::uint64_t>(rep);
            const RunTrace trace = run(rc);
            finals[rep] = trace.final_objective;
            totals[rep] = trace.total_transmits;
            anys[rep] = trace.any_agent_transmits;
            diverged[rep] = trace.status == RunStatus::kDiverged;
          },
          threads);
      SweepRow row;
      row.curve = curve.name;
      row.parameter_path = curve.parameter_path;
      row.value = value;
      row.replications = cfg.replications;
      row.seed_base = cfg.run.stream.seed;
      double sum = 0.0, total = 0.0, any = 0.0;
      for (long r = 0; r < cfg.replications; ++r) {
        sum += finals[r];
        total += static_cast<double>(totals[r]);
        any += static_cast<double>(anys[r]);
        row.diverged += diverged[r];
      }
      const double n = static_cast<double>(cfg.replications);
      row.mean_final_objective = sum / n;
      row.mean_objective_gap = row.mean_final_objective - jstar;
      row.mean_total_transmits = total / n;
      row.mean_any_transmits = any / n;
      double sq = 0.0;
      for (long r = 0; r < cfg.replications; ++r)
        sq += (finals[r] - row.mean_final_objective) *
              (finals[r] - row.mean_final_objective);
      row.std_final_objective =
          cfg.replications > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

inline std::string sweep_csv(const SweepResult& result) {
  std::string out = kCsvBanner;
  out +=
      "curve,parameter,value,mean_final_objective,std_final_objective,"
      "mean_objective_gap,mean_total_transmits,mean_any_transmits,"
      "replications,seed_base,diverged\n";
  for (const auto& r : result.rows) {
    out += r.curve + ',' + r.parameter_path + ',' + fmt_double(r.value) + ',' +
           fmt_double(r.mean_final_objective) + ',' +
           fmt_double(r.std_final_objective) + ',' +
           fmt_double(r.mean_objective_gap) + ',' +
           fmt_double(r.mean_total_transmits) + ',' +
           fmt_double(r.mean_any_transmits) + ',' +
           std::to_string(r.replications) + ',' + std::to_string(r.seed_base) +
           ',' + std::to_string(r.diverged) + '\n';
  }
  return out;
}

// Communication/performance tradeoff view: mean transmissions vs mean final
// objective, one series per curve.
inline std::string sweep_svg(const SweepResult& result) {
  std::map<std::string, SvgSeries> series;
  for (const auto& r : result.rows) {
    auto& s = series[r.curve];
    s.label = r.curve.empty() ? "sweep" : r.curve;
    s.points.emplace_back(r.mean_total_transmits, r.mean_final_objective);
  }
  std::vector<SvgSeries> list;
  for (auto& [name, s] : series) list.push_back(std::move(s));
  return render_chart_svg("communication vs final objective",
                          "mean total transmissions", "mean final objective",
                          list);
}

// --- oracle vs estimated gain, single step -----------------------------------

struct GainCompareRow {
  double lambda = 0.0;
  double oracle_transmit_rate = 0.0;
  double estimated_transmit_rate = 0.0;
  double agreement_rate = 0.0;
  double mean_objective_oracle = 0.0;
  double mean_objective_estimated = 0.0;
  long replications = 0;
};

struct GainCompareResult {
  std::vector<GainCompareRow> rows;
};

// One decision round from w0 per replication; both triggers see the same
// batches and gradients, so decisions are paired per (replication, agent).
inline GainCompareResult experiment_gain_compare(
    const ExperimentConfig& cfg, const std::vector<double>& lambdas,
    unsigned threads = 0) {
  if (cfg.run.num_iterations != 1)
    throw ConfigError(
        "gain-compare is a single-step experiment; set run.iterations = 1");
  if (lambdas.empty()) throw ConfigError("gain-compare needs a lambda grid");
  const ProblemSpec& spec = cfg.run.stream.spec;
  const int m = cfg.run.stream.num_agents;
  const long reps = cfg.replications;
  const std::size_t nl = lambdas.size();

  struct RepStats {
    std::vector<std::uint8_t> oracle, estimated;  // per lambda x agent
    std::vector<double> j_oracle, j_estimated;    // per lambda
  };
  std::vector<RepStats> stats(reps);

  parallel_for(
      reps,
      [&](long rep) {
        StreamConfig sc = cfg.run.stream;
        sc.seed = cfg.run.stream.seed + static_cast<std::uint64_t>(rep);
        const BatchSource source(sc);
        std::vector<DataBatch> batches(m);
        std::vector<Vec> grads(m);
        std::vector<double> oracle_gain(m), est_gain(m);
        for (int i = 0; i < m; ++i) {
          batches[i] = source.draw(i, 0);
          grads[i] = cfg.run.gradient_mode == GradientMode::kExact
                         ? true_gradient(spec, cfg.run.initial_weights)
                         : stochastic_gradient(batches[i],
                                               cfg.run.initial_weights);
          oracle_gain[i] = exact_gain(spec, cfg.run.initial_weights, grads[i],
                                      cfg.run.step_size);
          est_gain[i] =
              estimated_gain(batches[i], grads[i], cfg.run.step_size);
        }
        auto& st = stats[rep];
        st.oracle.resize(nl * m);
        st.estimated.resize(nl * m);
        st.j_oracle.resize(nl);
        st.j_estimated.resize(nl);
        for (std::size_t li = 0; li < nl; ++li) {
          std::vector<AgentRecord> rec_o(m), rec_e(m);
          for (int i = 0; i < m; ++i) {
            const bool to = oracle_gain[i] <= -lambdas[li];
            const bool te = est_gain[i] <= -lambdas[li];
            st.oracle[li * m + i] = to;
            st.estimated[li * m + i] = te;
            rec_o[i].gradient = grads[i];
            rec_o[i].decision.transmit = to;
            rec_e[i].gradient = grads[i];
            rec_e[i].decision.transmit = te;
          }
          st.j_oracle[li] = objective(
              spec, apply_update(cfg.run.initial_weights, cfg.run.step_size,
                                 rec_o));
          st.j_estimated[li] = objective(
              spec, apply_update(cfg.run.initial_weights, cfg.run.step_size,
                                 rec_e));
        }
      },
      threads);

  GainCompareResult result;
  for (std::size_t li = 0; li < nl; ++li) {
    GainCompareRow row;
    row.lambda = lambdas[li];
    row.replications = reps;
    long to = 0, te = 0, agree = 0;
    double jo = 0.0, je = 0.0;
    for (long rep = 0; rep < reps; ++rep) {
      const auto& st = stats[rep];
      for (int i = 0; i < m; ++i) {
        to += st.oracle[li * m + i];
        te += st.estimated[li * m + i];
        agree += st.oracle[li * m + i] == st.estimated[li * m + i];
      }
      jo += st.j_oracle[li];
      je += st.j_estimated[li];
    }
    const double decisions = static_cast<double>(reps * m);
    row.oracle_transmit_rate = static_cast<double>(to) / decisions;
    row.estimated_transmit_rate = static_cast<double>(te) / decisions;
    row.agreement_rate = static_cast<double>(agree) / decisions;
    row.mean_objective_oracle = jo / static_cast<double>(reps);
    row.mean_objective_estimated = je / static_cast<double>(reps);
    result.rows.push_back(row);
  }
  return result;
}

inline std::string gain_compare_csv(const GainCompareResult& result) {
  std::string out = kCsvBanner;
  out +=
      "lambda,oracle_transmit_rate,estimated_transmit_rate,agreement_rate,"
      "mean_objective_oracle,mean_objective_estimated,replications\n";
  for (const auto& r : result.rows)
    out += fmt_double(r.lambda) + ',' + fmt_double(r.oracle_transmit_rate) +
           ',' + fmt_double(r.estimated_transmit_rate) + ',' +
           fmt_double(r.agreement_rate) + ',' +
           fmt_double(r.mean_objective_oracle) + ',' +
           fmt_double(r.mean_objective_estimated) + ',' +
           std::to_string(r.replications) + '\n';
  return out;
}

inline std::string gain_compare_svg(const GainCompareResult& result) {
  SvgSeries oracle{"oracle gain", {}};
  SvgSeries estimated{"estimated gain", {}};
  for (const auto& r : result.rows) {
    const double x = std::log10(r.lambda);
    oracle.points.emplace_back(x, r.mean_objective_oracle);
    estimated.points.emplace_back(x, r.mean_objective_estimated);
  }
  return render_chart_svg("one-step objective, oracle vs estimated gain",
                          "log10(lambda)", "mean objective after one step",
                          {oracle, estimated});
}

// --- verification battery -----------------------------------------------------

struct VerifyEntry {
  BoundReport report;
  bool asserted = true;  // advisory entries never fail the battery
};

struct VerifyResult {
  std::vector<VerifyEntry> entries;
  bool all_applicable_pass = true;
};

inline VerifyResult experiment_verify(const ExperimentConfig& cfg,
                                      unsigned threads = 0) {
  VerifyResult out;
  VerifyOptions opts;
  opts.g_samples = cfg.verify.g_samples;
  opts.threads = threads;

  out.entries.push_back(
      {verify_convergence_bound(cfg.run, cfg.verify.convergence_replications, opts),
       true});

  RunConfig steady_cfg = cfg.run;
  steady_cfg.num_iterations = cfg.verify.steady_iterations;
  out.entries.push_back(
      {verify_steady_state(steady_cfg, cfg.verify.steady_replications,
                     cfg.verify.steady_burn_in, opts),
       true});

  out.entries.push_back(
      {verify_communication_budget_ensemble(cfg.run, cfg.verify.budget_replications,
                                threads),
       true});

  // Selection inequality at the configured (w0, lambda). Exact-gain form is
  // the proved one; the estimated-gain form is recorded but advisory. Only
  // gain policies carry a lambda.
  double lambda = 0.0;
  bool has_lambda = false;
  if (const auto* o = std::get_if<OracleGain>(&cfg.run.policy)) {
    lambda = o->lambda;
    has_lambda = true;
  } else if (const auto* e = std::get_if<EstimatedGain>(&cfg.run.policy)) {
    lambda = e->lambda;
    has_lambda = true;
  }
  if (has_lambda) {
    const std::uint64_t seed = cfg.run.stream.seed ^ 0xa5a5a5a5deadbeefull;
    out.entries.push_back(
        {verify_selection_inequality(
             cfg.run.stream.spec, cfg.run.stream.batch_size,
             cfg.run.initial_weights, cfg.run.step_size, lambda,
             cfg.verify.selection_samples, seed, GainDefinition::kExact),
         true});
    out.entries.push_back(
        {verify_selection_inequality(
             cfg.run.stream.spec, cfg.run.stream.batch_size,
             cfg.run.initial_weights, cfg.run.step_size, lambda,
             cfg.verify.selection_samples, seed, GainDefinition::kEstimated),
         false});
  } else {
    out.entries.push_back({BoundReport::not_applicable(
                               "selection-exact-gain",
                               "policy has no gain threshold lambda"),
                           true});
  }

  for (const auto& e : out.entries) {
    if (!e.asserted) continue;
    if (e.report.status == BoundReport::Status::kOk && !e.report.pass)
      out.all_applicable_pass = false;
    if (e.report.status == BoundReport::Status::kError)
      out.all_applicable_pass = false;
  }
  return out;
}

namespace detail {

inline const char* status_name(BoundReport::Status s) {
  switch (s) {
    case BoundReport::Status::kOk:
      return "ok";
    case BoundReport::Status::kSkipped:
      return "SKIPPED";
    case BoundReport::Status::kNotApplicable:
      return "NOT-APPLICABLE";
    default:
      return "ERROR";
  }
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string num_or_dash(double v) {
  return std::isnan(v) ? std::string("-") : fmt_double(v);
}

// Compact form for the human-readable block; CSVs keep full precision.
inline std::string short_num(double v) {
  if (std::isnan(v)) return "-";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v,
                           std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Human-readable verdict block (written to verify.txt).
inline std::string verify_text(const VerifyResult& result) {
  std::string out = "# fedgain-sim v1 verification verdicts\n";
  out += detail::pad("check", 26) + detail::pad("status", 16) +
         detail::pad("bound", 15) + detail::pad("observed", 15) +
         detail::pad("margin", 15) + detail::pad("3*se", 15) +
         detail::pad("reps", 9) + "verdict\n";
  for (const auto& e : result.entries) {
    const auto& r = e.report;
    std::string verdict;
    if (r.status != BoundReport::Status::kOk)
      verdict = detail::status_name(r.status);
    else
      verdict = r.pass ? "pass" : "FAIL";
    if (!e.asserted) verdict += " (advisory)";
    out += detail::pad(r.check, 26) + detail::pad(detail::status_name(r.status), 16) +
           detail::pad(detail::short_num(r.bound_value), 15) +
           detail::pad(detail::short_num(r.observed_value), 15) +
           detail::pad(detail::short_num(r.margin), 15) +
           detail::pad(detail::short_num(3.0 * r.standard_error), 15) +
           detail::pad(std::to_string(r.replications), 9) + verdict + "\n";
    if (!r.note.empty()) out += "  note: " + r.note + "\n";
  }
  out += result.all_applicable_pass ? "overall: PASS\n" : "overall: FAIL\n";
  return out;
}

// Machine-readable verdicts (written to summary.csv by the verify command).
inline std::string verify_csv(const VerifyResult& result) {
  std::string out = kCsvBanner;
  out +=
      "check,status,bound,observed,margin,standard_error,replications,"
      "pass,asserted\n";
  for (const auto& e : result.entries) {
    const auto& r = e.report;
    out += r.check + ',' + detail::status_name(r.status) + ',' +
           detail::num_or_dash(r.bound_value) + ',' +
           detail::num_or_dash(r.observed_value) + ',' +
           detail::num_or_dash(r.margin) + ',' +
           fmt_double(r.standard_error) + ',' +
           std::to_string(r.replications) + ',' + (r.pass ? "1" : "0") + ',' +
           (e.asserted ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace fedgain
