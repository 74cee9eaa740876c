#pragma once

// The iteration loop: broadcast weights, draw per-agent batches, compute
// gradients, apply the transmit policies, update the server weights, record
// the trace.
//
// Server update with transmitting set T:
//
//     w_{k+1} = w_k                                   if T is empty
//     w_{k+1} = w_k - eps * (1/|T|) * sum_{i in T} g_k^i   otherwise
//
// For two agents this reproduces the four enumerated cases (single-agent
// update, eps/2-averaged update, hold). The |T|-average is the extension to
// m agents; it keeps the convexity step of the convergence argument intact.

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fedgain/datagen.hpp"
#include "fedgain/policies.hpp"
#include "fedgain/regression.hpp"
#include "fedgain/rng.hpp"
#include "fedgain/types.hpp"

namespace fedgain {

// Runs abort once the objective exceeds this; divergent step-size sweeps
// must not hang.
inline constexpr double kDivergenceGuard = 1e12;

enum class GradientMode {
  kStochastic,  // gradients from drawn batches
  kExact,       // true gradient injected; removes sampling noise entirely
};

enum class RunStatus { kOk, kDiverged };

struct RunConfig {
  StreamConfig stream;
  PolicyKind policy;
  double step_size = 0.0;  // eps
  int num_iterations = 0;  // K
  Vec initial_weights;     // w_0
  GradientMode gradient_mode = GradientMode::kStochastic;

  void validate() const {
    stream.validate();
    if (step_size <= 0.0) throw ConfigError("run.step_size must be > 0");
    if (num_iterations < 1)
      throw ConfigError("run.iterations must be >= 1");
    if (initial_weights.size() != stream.spec.dim)
      throw ConfigError("run.initial_weights length does not match dim");
  }
};

struct AgentRecord {
  Vec gradient;
  PolicyDecision decision;
};

// State w_k, the objective there, and what every agent computed and decided
// at that state.
struct IterationRecord {
  Vec weights;
  double objective_value = 0.0;
  std::vector<AgentRecord> agents;
};

struct RunTrace {
  std::vector<IterationRecord> steps;  // k = 0 .. K-1 (shorter if diverged)
  Vec final_weights;                   // w_K
  double final_objective = 0.0;
  RunStatus status = RunStatus::kOk;
  std::vector<long> per_agent_transmits;  // sum_k alpha_k^i
  long any_agent_transmits = 0;           // sum_k max_i alpha_k^i
  long total_transmits = 0;               // sum_k sum_i alpha_k^i
  std::vector<std::string> warnings;
};

// The one place the recurrence is evaluated; run and replay share it so a
// replay is bit-identical.
inline Vec apply_update(const Vec& w, double step_size,
                        const std::vector<AgentRecord>& agents) {
  Vec acc = Vec::Zero(w.size());
  int transmitting = 0;
  for (const auto& a : agents) {
    if (a.decision.transmit) {
      acc += a.gradient;
      ++transmitting;
    }
  }
  if (transmitting == 0) return w;
  return w - (step_size / static_cast<double>(transmitting)) * acc;
}

struct StepResult {
  Vec next_weights;
  std::vector<AgentRecord> agents;
};

// One iteration at state w: per-agent gradient + decision, then the server
// update. Batches must be one per agent, in agent order; `iteration` keys
// the policy's random sub-stream.
inline StepResult step(const ProblemSpec& spec, const PolicyKind& policy,
                       double step_size, const Vec& w,
                       const std::vector<DataBatch>& batches,
                       std::uint64_t seed, int iteration,
                       GradientMode mode = GradientMode::kStochastic) {
  StepResult out;
  out.agents.reserve(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    AgentRecord rec;
    rec.gradient = mode == GradientMode::kExact
                       ? true_gradient(spec, w)
                       : stochastic_gradient(batches[i], w);
    DecisionInputs in;
    in.spec = &spec;
    in.batch = &batches[i];
    in.weights = &w;
    in.gradient = &rec.gradient;
    in.step_size = step_size;
    CounterRng rng(seed, static_cast<std::uint32_t>(i),
                   static_cast<std::uint32_t>(iteration),
                   StreamPurpose::kPolicy);
    rec.decision = decide(policy, in, rng);
    out.agents.push_back(std::move(rec));
  }
  out.next_weights = apply_update(w, step_size, out.agents);
  return out;
}

namespace detail {
// Exact mode only needs batches for the policy that reads them.
inline bool policy_needs_batch(const PolicyKind& policy) {
  return std::holds_alternative<EstimatedGain>(policy);
}
}  // namespace detail

inline RunTrace run(const RunConfig& cfg) {
  cfg.validate();
  RunTrace trace;
  if (auto warning = validate_policy(cfg.policy)) trace.warnings.push_back(*warning);
  const SpectralConstants sc =
      spectral_constants(cfg.stream.spec, cfg.step_size);
  if (!sc.contractive)
    trace.warnings.push_back(
        "step size exceeds the contraction limit; convergence bounds void");

  const BatchSource source(cfg.stream);
  const int m = cfg.stream.num_agents;
  const bool draw = cfg.gradient_mode == GradientMode::kStochastic ||
                    detail::policy_needs_batch(cfg.policy);
  trace.per_agent_transmits.assign(m, 0);
  trace.steps.reserve(cfg.num_iterations);

  Vec w = cfg.initial_weights;
  std::vector<DataBatch> batches(m);
  for (int k = 0; k < cfg.num_iterations; ++k) {
    if (draw)
      for (int i = 0; i < m; ++i) batches[i] = source.draw(i, k);
    else
      for (int i = 0; i < m; ++i)
        batches[i] = DataBatch{Mat::Zero(1, cfg.stream.spec.dim),
                               Vec::Zero(1)};
    StepResult sr = step(cfg.stream.spec, cfg.policy, cfg.step_size, w,
                         batches, cfg.stream.seed, k, cfg.gradient_mode);
    IterationRecord rec;
    rec.weights = w;
    rec.objective_value = objective(cfg.stream.spec, w);
    rec.agents = std::move(sr.agents);
    bool any = false;
    for (int i = 0; i < m; ++i) {
      if (rec.agents[i].decision.transmit) {
        ++trace.per_agent_transmits[i];
        ++trace.total_transmits;
        any = true;
      }
    }
    if (any) ++trace.any_agent_transmits;
    trace.steps.push_back(std::move(rec));
    w = std::move(sr.next_weights);
    if (objective(cfg.stream.spec, w) > kDivergenceGuard) {
      trace.status = RunStatus::kDiverged;
      break;
    }
  }
  trace.final_weights = w;
  trace.final_objective = objective(cfg.stream.spec, w);
  return trace;
}

// Re-derives every weight vector from the recorded gradients and decisions;
// true iff the whole recurrence is bit-identical.
inline bool replay_check(const RunTrace& trace, const RunConfig& cfg) {
  Vec w = cfg.initial_weights;
  for (const auto& rec : trace.steps) {
    if (rec.weights.size() != w.size() || rec.weights != w) return false;
    w = apply_update(w, cfg.step_size, rec.agents);
  }
  return trace.final_weights.size() == w.size() && trace.final_weights == w;
}

// --- trace serialization ----------------------------------------------------
// Line-delimited text, one record per iteration:
//   # fedgain-trace v1
//   M dim=<n> agents=<m> iterations=<K> eps=<eps> policy=<name> seed=<u64>
//   R <k> <J(w_k)> <w_k[0]> ... <w_k[n-1]>
//   A <agent> <transmit> <score> <threshold> <g[0]> ... <g[n-1]>   (per agent)
//   F <J(w_K)> <w_K[0]> ... <w_K[n-1]>
//   C status=<ok|diverged> per_agent=<c0,...> any=<a> total=<t>
// Doubles are shortest-round-trip, so deserialized traces replay
// bit-identically.

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::string value_of(const std::string& tok, const char* key) {
  const std::string prefix = std::string(key) + "=";
  if (tok.rfind(prefix, 0) != 0)
    throw ConfigError("trace: expected '" + prefix + "...', got '" + tok +
                      "'");
  return tok.substr(prefix.size());
}

}  // namespace detail

inline void write_trace(std::ostream& os, const RunTrace& trace,
                        const RunConfig& cfg) {
  os << "# fedgain-trace v1\n";
  os << "M dim=" << cfg.stream.spec.dim << " agents=" << cfg.stream.num_agents
     << " iterations=" << cfg.num_iterations << " eps="
     << fmt_double(cfg.step_size) << " policy=" << policy_name(cfg.policy)
     << " seed=" << cfg.stream.seed << "\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& rec = trace.steps[k];
    os << "R " << k << ' ' << fmt_double(rec.objective_value);
    for (int j = 0; j < rec.weights.size(); ++j)
      os << ' ' << fmt_double(rec.weights[j]);
    os << '\n';
    for (std::size_t i = 0; i < rec.agents.size(); ++i) {
      const auto& a = rec.agents[i];
      os << "A " << i << ' ' << (a.decision.transmit ? 1 : 0) << ' '
         << fmt_double(a.decision.score) << ' '
         << fmt_double(a.decision.threshold);
      for (int j = 0; j < a.gradient.size(); ++j)
        os << ' ' << fmt_double(a.gradient[j]);
      os << '\n';
    }
  }
  os << "F " << fmt_double(trace.final_objective);
  for (int j = 0; j < trace.final_weights.size(); ++j)
    os << ' ' << fmt_double(trace.final_weights[j]);
  os << '\n';
  os << "C status=" << (trace.status == RunStatus::kOk ? "ok" : "diverged")
     << " per_agent=";
  for (std::size_t i = 0; i < trace.per_agent_transmits.size(); ++i) {
    if (i) os << ',';
    os << trace.per_agent_transmits[i];
  }
  os << " any=" << trace.any_agent_transmits
     << " total=" << trace.total_transmits << "\n";
}

inline RunTrace read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# fedgain-trace v1")
    throw ConfigError("trace: bad or missing version line");
  if (!std::getline(is, line)) throw ConfigError("trace: missing M line");
  auto mtoks = detail::split_ws(line);
  if (mtoks.size() != 7 || mtoks[0] != "M")
    throw ConfigError("trace: malformed M line");
  const int dim = std::stoi(detail::value_of(mtoks[1], "dim"));
  const int agents = std::stoi(detail::value_of(mtoks[2], "agents"));

  RunTrace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto toks = detail::split_ws(line);
    if (toks[0] == "R") {
      if (static_cast<int>(toks.size()) != 3 + dim)
        throw ConfigError("trace: malformed R line");
      IterationRecord rec;
      rec.objective_value = parse_double(toks[2]);
      rec.weights.resize(dim);
      for (int j = 0; j < dim; ++j)
        rec.weights[j] = parse_double(toks[3 + j]);
      trace.steps.push_back(std::move(rec));
    } else if (toks[0] == "A") {
      if (trace.steps.empty() || static_cast<int>(toks.size()) != 5 + dim)
        throw ConfigError("trace: malformed A line");
      AgentRecord a;
      a.decision.transmit = toks[2] == "1";
      a.decision.score = parse_double(toks[3]);
      a.decision.threshold = parse_double(toks[4]);
      a.gradient.resize(dim);
      for (int j = 0; j < dim; ++j)
        a.gradient[j] = parse_double(toks[5 + j]);
      trace.steps.back().agents.push_back(std::move(a));
    } else if (toks[0] == "F") {
      if (static_cast<int>(toks.size()) != 2 + dim)
        throw ConfigError("trace: malformed F line");
      trace.final_objective = parse_double(toks[1]);
      trace.final_weights.resize(dim);
      for (int j = 0; j < dim; ++j)
        trace.final_weights[j] = parse_double(toks[2 + j]);
    } else if (toks[0] == "C") {
      if (toks.size() != 5) throw ConfigError("trace: malformed C line");
      trace.status = detail::value_of(toks[1], "status") == "ok"
                         ? RunStatus::kOk
                         : RunStatus::kDiverged;
      std::stringstream ss(detail::value_of(toks[2], "per_agent"));
      std::string tok;
      while (std::getline(ss, tok, ','))
        trace.per_agent_transmits.push_back(std::stol(tok));
      trace.any_agent_transmits = std::stol(detail::value_of(toks[3], "any"));
      trace.total_transmits = std::stol(detail::value_of(toks[4], "total"));
    }
  }
  for (const auto& rec : trace.steps)
    if (static_cast<int>(rec.agents.size()) != agents)
      throw ConfigError("trace: iteration record missing agent lines");
  return trace;
}

}  // namespace fedgain
