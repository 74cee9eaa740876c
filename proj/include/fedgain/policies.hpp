#pragma once

// Per-agent transmit/no-transmit decision rules.
//
// The gain of applying update g at weights w with step eps is
//
//     gain = J(w - eps g) - J(w)
//          = -eps g^T grad J(w) + 1/2 eps^2 g^T C g        (J quadratic)
//
// which is exact, not a Taylor truncation. Negative gain = improvement.
// The oracle policy evaluates this with the true distribution (via
// ProblemSpec); the estimated policy replaces grad J by g itself and C by
// the batch's empirical second moment:
//
//     est_gain = -eps g^T [ I - eps/2 * (1/N) sum_i x_i x_i^T ] g.
//
// Both transmit when the gain is at most -lambda (equality transmits).
// The gradient-norm baseline transmits when |g|^2 >= mu.

#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "fedgain/datagen.hpp"
#include "fedgain/regression.hpp"
#include "fedgain/rng.hpp"
#include "fedgain/types.hpp"

namespace fedgain {

struct OracleGain {
  double lambda = 0.0;
};
struct EstimatedGain {
  double lambda = 0.0;
};
struct GradNorm {
  double mu = 0.0;
};
struct Always {};
struct Never {};
// Control baseline for experiments; ignores the data entirely.
struct RandomPolicy {
  double p = 0.5;
};

using PolicyKind =
    std::variant<OracleGain, EstimatedGain, GradNorm, Always, Never,
                 RandomPolicy>;

struct PolicyDecision {
  bool transmit = false;
  double score = 0.0;      // the gain, squared norm, or uniform draw used
  double threshold = 0.0;  // -lambda, mu, or p
};

inline const char* policy_name(const PolicyKind& kind) {
  struct Visitor {
    const char* operator()(const OracleGain&) const { return "oracle-gain"; }
    const char* operator()(const EstimatedGain&) const {
      return "estimated-gain";
    }
    const char* operator()(const GradNorm&) const { return "grad-norm"; }
    const char* operator()(const Always&) const { return "always"; }
    const char* operator()(const Never&) const { return "never"; }
    const char* operator()(const RandomPolicy&) const { return "random"; }
  };
  return std::visit(Visitor{}, kind);
}

// Throws on invalid parameters; returns a warning for degenerate but
// admissible ones (lambda == 0 voids the communication-budget guarantee).
inline std::optional<std::string> validate_policy(const PolicyKind& kind) {
  std::optional<std::string> warning;
  if (const auto* o = std::get_if<OracleGain>(&kind)) {
    if (o->lambda < 0) throw ConfigError("policy.lambda must be >= 0");
    if (o->lambda == 0)
      warning = "lambda = 0: transmission-count bound degenerates";
  } else if (const auto* e = std::get_if<EstimatedGain>(&kind)) {
    if (e->lambda < 0) throw ConfigError("policy.lambda must be >= 0");
    if (e->lambda == 0)
      warning = "lambda = 0: transmission-count bound degenerates";
  } else if (const auto* g = std::get_if<GradNorm>(&kind)) {
    if (g->mu <= 0) throw ConfigError("policy.mu must be > 0");
  } else if (const auto* r = std::get_if<RandomPolicy>(&kind)) {
    if (r->p < 0 || r->p > 1) throw ConfigError("policy.p must be in [0,1]");
  }
  return warning;
}

// Exact gain under the true distribution. Equals
// objective(spec, w - eps g) - objective(spec, w) to rounding error.
inline double exact_gain(const ProblemSpec& spec, const Vec& w, const Vec& g,
                         double step_size) {
  check_weights(spec, w);
  require(g.size() == spec.dim, "gradient length does not match dim");
  const Vec grad = true_gradient(spec, w);
  return -step_size * g.dot(grad) +
         0.5 * step_size * step_size * g.dot(spec.feature_cov * g);
}

// Estimated gain from the batch alone. Contract: g is the stochastic
// gradient of this same batch (the engine enforces it; the estimator reuses
// g both as the gradient and as the direction). Evaluated through
// s_i = x_i^T g, so g^T (sum x_i x_i^T) g = sum s_i^2: O(N * dim), no
// dim x dim matrix.
inline double estimated_gain(const DataBatch& batch, const Vec& g,
                             double step_size) {
  batch.validate();
  require(batch.features.cols() == g.size(),
          "batch feature width does not match gradient length");
  const double n = static_cast<double>(batch.size());
  const Vec s = batch.features * g;
  return -step_size * g.squaredNorm() +
         0.5 * step_size * step_size * s.squaredNorm() / n;
}

// Inputs a decision may need; which ones are required depends on the policy.
struct DecisionInputs {
  const ProblemSpec* spec = nullptr;  // OracleGain
  const DataBatch* batch = nullptr;   // EstimatedGain
  const Vec* weights = nullptr;       // gain policies
  const Vec* gradient = nullptr;      // gain policies, GradNorm
  double step_size = 0.0;
};

inline PolicyDecision decide(const PolicyKind& kind,
                             const DecisionInputs& in, CounterRng& rng) {
  PolicyDecision d;
  if (const auto* o = std::get_if<OracleGain>(&kind)) {
    if (!in.spec || !in.weights || !in.gradient)
      throw ConfigError("oracle-gain policy needs spec, weights, gradient");
    d.score = exact_gain(*in.spec, *in.weights, *in.gradient, in.step_size);
    d.threshold = -o->lambda;
    d.transmit = d.score <= d.threshold;
  } else if (const auto* e = std::get_if<EstimatedGain>(&kind)) {
    if (!in.batch || !in.gradient)
      throw ConfigError("estimated-gain policy needs batch and gradient");
    d.score = estimated_gain(*in.batch, *in.gradient, in.step_size);
    d.threshold = -e->lambda;
    d.transmit = d.score <= d.threshold;
  } else if (const auto* g = std::get_if<GradNorm>(&kind)) {
    if (!in.gradient) throw ConfigError("grad-norm policy needs gradient");
    d.score = in.gradient->squaredNorm();
    d.threshold = g->mu;
    d.transmit = d.score >= d.threshold;
  } else if (std::holds_alternative<Always>(kind)) {
    d.transmit = true;
  } else if (std::holds_alternative<Never>(kind)) {
    d.transmit = false;
  } else if (const auto* r = std::get_if<RandomPolicy>(&kind)) {
    d.score = rng.next_unit();
    d.threshold = r->p;
    d.transmit = d.score < d.threshold;
  }
  return d;
}

}  // namespace fedgain
