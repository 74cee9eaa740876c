#pragma once

// Monte-Carlo and closed-form verification of the convergence bound, its
// steady-state corollary, the communication-budget guarantee, and the
// selection inequality the convergence proof rests on.
//
// Conventions:
//   * expectation bounds pass with 3-standard-error slack,
//   * almost-sure bounds pass only exactly, on every run,
//   * the gradient covariance G is estimated at w_true by default (the
//     bound treats it as constant; near the optimum it is), with an
//     entrywise-max-along-the-trajectory worst-case mode as alternative.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedgain/parallel.hpp"
#include "fedgain/sim.hpp"

namespace fedgain {

struct BoundReport {
  std::string check;
  enum class Status { kOk, kSkipped, kNotApplicable, kError } status =
      Status::kOk;
  double bound_value = std::numeric_limits<double>::quiet_NaN();
  double observed_value = std::numeric_limits<double>::quiet_NaN();
  double margin = std::numeric_limits<double>::quiet_NaN();
  double standard_error = 0.0;
  long replications = 0;
  bool pass = false;
  std::string note;

  static BoundReport skipped(std::string check, std::string why) {
    BoundReport r;
    r.check = std::move(check);
    r.status = Status::kSkipped;
    r.pass = true;
    r.note = std::move(why);
    return r;
  }
  static BoundReport not_applicable(std::string check, std::string why) {
    BoundReport r;
    r.check = std::move(check);
    r.status = Status::kNotApplicable;
    r.pass = true;
    r.note = std::move(why);
    return r;
  }
  static BoundReport error(std::string check, std::string why) {
    BoundReport r;
    r.check = std::move(check);
    r.status = Status::kError;
    r.pass = false;
    r.note = std::move(why);
    return r;
  }
};

// Empirical covariance of the stochastic gradient at a fixed weight vector.
struct GEstimate {
  Mat cov;
  long num_samples = 0;
  Vec eval_point;
};

// Welford/outer-product accumulation over `samples` independent batches.
inline GEstimate estimate_G(const ProblemSpec& spec, int batch_size,
                            const Vec& w, long samples, std::uint64_t seed) {
  if (samples < 2) throw ConfigError("estimate_G needs samples >= 2");
  check_weights(spec, w);
  StreamConfig sc{spec, batch_size, 1, seed};
  const BatchSource source(sc);
  Vec mean = Vec::Zero(spec.dim);
  Mat m2 = Mat::Zero(spec.dim, spec.dim);
  for (long s = 0; s < samples; ++s) {
    const Vec g =
        stochastic_gradient(source.draw(0, static_cast<int>(s)), w);
    const Vec delta = g - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (g - mean).transpose();
  }
  GEstimate out;
  out.cov = 0.5 * (m2 + m2.transpose()) / static_cast<double>(samples - 1);
  out.num_samples = samples;
  out.eval_point = w;
  return out;
}

// Right-hand side of the convergence bound after K iterations:
//
//   rho^K J(w0) + (1 - rho^K) [ J(w*) + eps^2 Tr(Sx G) / (1 - rho) ]
//     + lambda * sum_l rho^(K-l) * one_minus_alpha[l]
//
// one_minus_alpha[l] is the agent-averaged E(1 - alpha_l^i) at iteration l
// (for two agents this is the half-sum over agents); the sum covers
// l = 0..K inclusive when K+1 entries are given. With an empty span the
// K = 0 convention bound = J(w0) falls out.
inline double convergence_bound(const ProblemSpec& spec, double step_size,
                                double lambda, const Vec& w0, int K,
                                std::span<const double> one_minus_alpha,
                                const Mat& G) {
  if (K < 0) throw ConfigError("convergence_bound needs K >= 0");
  if (static_cast<int>(one_minus_alpha.size()) > K + 1)
    throw ConfigError("convergence_bound: more than K+1 alpha entries");
  const SpectralConstants sc = spectral_constants(spec, step_size);
  if (!sc.contractive)
    throw ConfigError("convergence_bound requires a contractive step size");
  const double rho = sc.contraction;
  const double j0 = objective(spec, w0);
  const double jstar = objective(spec, spec.true_weights);
  const double noise_floor =
      step_size * step_size * (sc.half_moment * G).trace() / (1.0 - rho);
  const double rho_k = std::pow(rho, K);
  double idle_penalty = 0.0;
  for (std::size_t l = 0; l < one_minus_alpha.size(); ++l)
    idle_penalty +=
        std::pow(rho, K - static_cast<int>(l)) * one_minus_alpha[l];
  return rho_k * j0 + (1.0 - rho_k) * (jstar + noise_floor) +
         lambda * idle_penalty;
}

enum class GMode { kAtOptimum, kWorstCase };

struct VerifyOptions {
  long g_samples = 100000;
  GMode g_mode = GMode::kAtOptimum;
  unsigned threads = 0;  // 0 = hardware concurrency
};

namespace detail {

inline const OracleGain* oracle_policy(const PolicyKind& kind) {
  return std::get_if<OracleGain>(&kind);
}

inline std::uint64_t g_stream_seed(std::uint64_t base) {
  // decouple the covariance-estimation stream from replication streams
  return base ^ 0x517cc1b727220a95ull;
}

inline Mat estimate_G_for(const RunConfig& cfg, const VerifyOptions& opts) {
  const ProblemSpec& spec = cfg.stream.spec;
  if (opts.g_mode == GMode::kAtOptimum)
    return estimate_G(spec, cfg.stream.batch_size, spec.true_weights,
                      opts.g_samples, g_stream_seed(cfg.stream.seed))
        .cov;
  // Worst case: entrywise |max| of estimates taken along one pilot
  // trajectory. Conservative for the trace term when the weighting matrix
  // has nonnegative entries.
  RunTrace pilot = run(cfg);
  std::vector<Vec> states;
  for (const auto& rec : pilot.steps) states.push_back(rec.weights);
  states.push_back(pilot.final_weights);
  const long per_state =
      std::max<long>(2, opts.g_samples / static_cast<long>(states.size()));
  Mat g = Mat::Zero(spec.dim, spec.dim);
  for (std::size_t s = 0; s < states.size(); ++s) {
    const Mat gs =
        estimate_G(spec, cfg.stream.batch_size, states[s], per_state,
                   g_stream_seed(cfg.stream.seed) + s)
            .cov;
    g = g.cwiseMax(gs);
  }
  return g;
}

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double sq = 0.0;
  for (double x : xs) sq += (x - m.mean) * (x - m.mean);
  m.std_error = std::sqrt(sq / static_cast<double>(xs.size() - 1) /
                          static_cast<double>(xs.size()));
  return m;
}

}  // namespace detail

// Monte-Carlo check of the convergence bound: `replications` seeded runs of
// K iterations; observed = mean J(w_K); the per-iteration idle rates
// E(1 - alpha_l) are estimated from the same ensemble (the bound treats
// them as given expectations). The decision made at w_K enters the l = K
// term, so each run internally executes K+1 decision rounds.
inline BoundReport verify_convergence_bound(const RunConfig& cfg,
                                            long replications,
                                            const VerifyOptions& opts = {}) {
  BoundReport r;
  r.check = "convergence-bound";
  const auto* oracle = detail::oracle_policy(cfg.policy);
  if (!oracle)
    return BoundReport::skipped(
        r.check, std::string("policy is ") + policy_name(cfg.policy) +
                     "; the bound is proved for oracle-gain only");
  const SpectralConstants sc =
      spectral_constants(cfg.stream.spec, cfg.step_size);
  if (!sc.contractive)
    return BoundReport::error(
        r.check, "step size is not contractive (rho >= 1); no verdict");
  if (replications < 2)
    throw ConfigError("verify_convergence_bound needs replications >= 2");

  const int K = cfg.num_iterations;
  const int m = cfg.stream.num_agents;
  RunConfig ext = cfg;
  ext.num_iterations = K + 1;

  std::vector<double> finals(replications);
  std::vector<std::vector<std::uint8_t>> idle(replications);
  parallel_for(
      replications,
      [&](long rep) {
        RunConfig rc = ext;
        rc.stream.seed = cfg.stream.seed + static_cast<std::uint64_t>(rep);
        const RunTrace trace = run(rc);
        finals[rep] = trace.steps[K].objective_value;  // J(w_K)
        auto& bits = idle[rep];
        bits.resize(static_cast<std::size_t>(K + 1) * m);
        for (int l = 0; l <= K; ++l)
          for (int i = 0; i < m; ++i)
            bits[static_cast<std::size_t>(l) * m + i] =
                trace.steps[l].agents[i].decision.transmit ? 0 : 1;
      },
      opts.threads);

  std::vector<double> one_minus_alpha(K + 1, 0.0);
  for (int l = 0; l <= K; ++l) {
    long idle_count = 0;
    for (long rep = 0; rep < replications; ++rep)
      for (int i = 0; i < m; ++i)
        idle_count += idle[rep][static_cast<std::size_t>(l) * m + i];
    one_minus_alpha[l] = static_cast<double>(idle_count) /
                         static_cast<double>(replications * m);
  }

  const Mat G = detail::estimate_G_for(cfg, opts);
  r.bound_value = convergence_bound(cfg.stream.spec, cfg.step_size,
                                 oracle->lambda, cfg.initial_weights, K,
                                 one_minus_alpha, G);
  const auto mo = detail::moments(finals);
  r.observed_value = mo.mean;
  r.standard_error = mo.std_error;
  r.margin = r.bound_value - r.observed_value;
  r.replications = replications;
  r.pass = r.observed_value <= r.bound_value + 3.0 * r.standard_error;
  return r;
}

// Steady-state corollary: mean J(w_k) past a burn-in, against
// J(w*) + (lambda + eps^2 Tr(Sx G)) / (1 - rho).
inline BoundReport verify_steady_state(const RunConfig& cfg,
                                       long replications, int burn_in,
                                       const VerifyOptions& opts = {}) {
  BoundReport r;
  r.check = "steady-state-bound";
  const auto* oracle = detail::oracle_policy(cfg.policy);
  if (!oracle)
    return BoundReport::skipped(
        r.check, std::string("policy is ") + policy_name(cfg.policy) +
                     "; the bound is proved for oracle-gain only");
  const SpectralConstants sc =
      spectral_constants(cfg.stream.spec, cfg.step_size);
  if (!sc.contractive)
    return BoundReport::error(
        r.check, "step size is not contractive (rho >= 1); no verdict");
  if (burn_in < 0 || burn_in >= cfg.num_iterations)
    throw ConfigError("verify_steady_state: burn_in must be in [0, iterations)");
  if (replications < 2)
    throw ConfigError("verify_steady_state needs replications >= 2");

  std::vector<double> tail_means(replications);
  parallel_for(
      replications,
      [&](long rep) {
        RunConfig rc = cfg;
        rc.stream.seed = cfg.stream.seed + static_cast<std::uint64_t>(rep);
        const RunTrace trace = run(rc);
        double sum = 0.0;
        long count = 0;
        for (std::size_t k = static_cast<std::size_t>(burn_in);
             k < trace.steps.size(); ++k, ++count)
          sum += trace.steps[k].objective_value;
        sum += trace.final_objective;
        ++count;
        tail_means[rep] = sum / static_cast<double>(count);
      },
      opts.threads);

  const Mat G = detail::estimate_G_for(cfg, opts);
  const double noise =
      cfg.step_size * cfg.step_size * (sc.half_moment * G).trace();
  r.bound_value =
      objective(cfg.stream.spec, cfg.stream.spec.true_weights) +
      (oracle->lambda + noise) / (1.0 - sc.contraction);
  const auto mo = detail::moments(tail_means);
  r.observed_value = mo.mean;
  r.standard_error = mo.std_error;
  r.margin = r.bound_value - r.observed_value;
  r.replications = replications;
  r.pass = r.observed_value <= r.bound_value + 3.0 * r.standard_error;
  return r;
}

// Communication budget, per run: sum_k max_i alpha_k^i against
// (J(w0) - J(w*)) / lambda. Almost-sure claim: checked exactly, no slack.
inline BoundReport verify_communication_budget(const RunTrace& trace,
                                               const RunConfig& cfg) {
  BoundReport r;
  r.check = "communication-budget";
  const auto* oracle = detail::oracle_policy(cfg.policy);
  if (!oracle)
    return BoundReport::skipped(
        r.check, std::string("policy is ") + policy_name(cfg.policy) +
                     "; the budget holds for oracle-gain only");
  if (oracle->lambda == 0.0)
    return BoundReport::not_applicable(r.check,
                                         "lambda = 0: bound is infinite");
  r.bound_value =
      (objective(cfg.stream.spec, cfg.initial_weights) -
       objective(cfg.stream.spec, cfg.stream.spec.true_weights)) /
      oracle->lambda;
  r.observed_value = static_cast<double>(trace.any_agent_transmits);
  r.margin = r.bound_value - r.observed_value;
  r.replications = 1;
  r.pass = r.observed_value <= r.bound_value;
  return r;
}

// Every one of `replications` seeded runs must satisfy the budget.
// observed = worst (largest) transmission count over the ensemble.
inline BoundReport verify_communication_budget_ensemble(
    const RunConfig& cfg, long replications, unsigned threads = 0) {
  BoundReport probe = verify_communication_budget(RunTrace{}, cfg);
  if (probe.status != BoundReport::Status::kOk) return probe;
  if (replications < 1)
    throw ConfigError("verify_communication_budget_ensemble needs replications >= 1");

  std::vector<long> counts(replications);
  parallel_for(
      replications,
      [&](long rep) {
        RunConfig rc = cfg;
        rc.stream.seed = cfg.stream.seed + static_cast<std::uint64_t>(rep);
        counts[rep] = run(rc).any_agent_transmits;
      },
      threads);

  BoundReport r;
  r.check = "communication-budget";
  r.bound_value = probe.bound_value;
  long worst = 0, violations = 0;
  for (long c : counts) {
    worst = std::max(worst, c);
    if (static_cast<double>(c) > r.bound_value) ++violations;
  }
  r.observed_value = static_cast<double>(worst);
  r.margin = r.bound_value - r.observed_value;
  r.replications = replications;
  r.pass = violations == 0;
  if (violations > 0)
    r.note = std::to_string(violations) + " of " +
             std::to_string(replications) + " runs exceeded the budget";
  return r;
}

// --- selection inequality ---------------------------------------------------
// E[ alpha(g) J(w - eps g) ] <= E[ alpha(g) ] E[ J(w - eps g) ]
// with alpha(g) = 1{ gain(g) <= -lambda }. The proof covers the exact gain;
// for the estimated gain the check is empirical only.

enum class GainDefinition { kExact, kEstimated };

inline BoundReport verify_selection_inequality(
    const ProblemSpec& spec, int batch_size, const Vec& w, double step_size,
    double lambda, long samples, std::uint64_t seed,
    GainDefinition def = GainDefinition::kExact) {
  if (samples < 10000)
    throw ConfigError("verify_selection_inequality needs samples >= 10^4");
  check_weights(spec, w);
  StreamConfig scfg{spec, batch_size, 1, seed};
  const BatchSource source(scfg);

  std::vector<double> us(samples), vs(samples), ts(samples);
  for (long s = 0; s < samples; ++s) {
    const DataBatch batch = source.draw(0, static_cast<int>(s));
    const Vec g = stochastic_gradient(batch, w);
    const double gain = def == GainDefinition::kExact
                            ? exact_gain(spec, w, g, step_size)
                            : estimated_gain(batch, g, step_size);
    const double alpha = gain <= -lambda ? 1.0 : 0.0;
    const double j_after = objective(spec, w - step_size * g);
    us[s] = alpha * j_after;
    vs[s] = alpha;
    ts[s] = j_after;
  }

  double um = 0, vm = 0, tm = 0;
  for (long s = 0; s < samples; ++s) {
    um += us[s];
    vm += vs[s];
    tm += ts[s];
  }
  const double n = static_cast<double>(samples);
  um /= n;
  vm /= n;
  tm /= n;
  // Delta-method standard error of D = mean(u) - mean(v) mean(t):
  // grad f = (1, -t, -v) at the means, Var(D) = grad^T S grad / n.
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (long s = 0; s < samples; ++s) {
    Eigen::Vector3d d(us[s] - um, vs[s] - vm, ts[s] - tm);
    cov += d * d.transpose();
  }
  cov /= n - 1.0;
  const Eigen::Vector3d grad(1.0, -tm, -vm);
  const double se_d = std::sqrt(std::max(0.0, grad.dot(cov * grad) / n));

  BoundReport r;
  r.check = def == GainDefinition::kExact ? "selection-exact-gain"
                                          : "selection-estimated-gain";
  r.observed_value = um;       // E[alpha J]
  r.bound_value = vm * tm;     // E[alpha] E[J]
  r.margin = r.bound_value - r.observed_value;
  r.standard_error = se_d;
  r.replications = samples;
  r.pass = um - vm * tm <= 3.0 * se_d;
  if (def == GainDefinition::kEstimated)
    r.note = "empirical only; not covered by the proof";
  return r;
}

// Exact enumeration of both sides for a finitely-supported gradient
// distribution. Serves as the hand-checkable oracle for the Monte-Carlo
// path.
struct DiscreteGradient {
  Vec gradient;
  double prob = 0.0;
};

struct SelectionSides {
  double lhs = 0.0;  // E[alpha J(w - eps g)]
  double rhs = 0.0;  // E[alpha] E[J(w - eps g)]
};

inline SelectionSides selection_inequality_discrete(
    const ProblemSpec& spec, const Vec& w, double step_size, double lambda,
    std::span<const DiscreteGradient> points) {
  double total = 0.0;
  for (const auto& p : points) total += p.prob;
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("discrete gradient probabilities must sum to 1");
  SelectionSides sides;
  double mean_alpha = 0.0, mean_j = 0.0;
  for (const auto& p : points) {
    const double gain = exact_gain(spec, w, p.gradient, step_size);
    const double alpha = gain <= -lambda ? 1.0 : 0.0;
    const double j_after = objective(spec, w - step_size * p.gradient);
    sides.lhs += p.prob * alpha * j_after;
    mean_alpha += p.prob * alpha;
    mean_j += p.prob * j_after;
  }
  sides.rhs = mean_alpha * mean_j;
  return sides;
}

}  // namespace fedgain
