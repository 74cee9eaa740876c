#include <fedgain/sim.hpp>

#include <catch2/catch.hpp>
#include <cmath>
#include <sstream>

#include "helpers.hpp"

using namespace fedgain;
using namespace fedgain::test;

namespace {

RunConfig bench_run(PolicyKind policy, int iterations = 10,
                    std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.stream = StreamConfig{bench_problem(), 5, 2, seed};
  cfg.policy = std::move(policy);
  cfg.step_size = 0.1;
  cfg.num_iterations = iterations;
  cfg.initial_weights = vec2(0, 0);
  return cfg;
}

}  // namespace

TEST_CASE("single step") {
  const ProblemSpec spec = bench_problem();
  const Vec w = vec2(1, 1);
  std::vector<DataBatch> batches(2);
  for (int i = 0; i < 2; ++i)
    batches[i] = draw_batch({spec, 5, 2, 3}, i, 0);

  SECTION("never policy holds the weights") {
    const auto r = step(spec, Never{}, 0.1, w, batches, 3, 0);
    REQUIRE(r.next_weights == w);
  }
  SECTION("both agents transmitting averages the gradients") {
    std::vector<AgentRecord> recs(2);
    recs[0].gradient = vec2(2, 0);
    recs[0].decision.transmit = true;
    recs[1].gradient = vec2(0, 2);
    recs[1].decision.transmit = true;
    const Vec next = apply_update(w, 0.1, recs);
    REQUIRE(next[0] == Approx(1.0 - 0.1));
    REQUIRE(next[1] == Approx(1.0 - 0.1));
  }
  SECTION("single transmitting agent applies its full gradient") {
    std::vector<AgentRecord> recs(2);
    recs[0].gradient = vec2(2, 0);
    recs[0].decision.transmit = true;
    recs[1].gradient = vec2(10, 10);
    recs[1].decision.transmit = false;
    const Vec next = apply_update(w, 0.1, recs);
    REQUIRE(next[0] == Approx(0.8));
    REQUIRE(next[1] == Approx(1.0));
  }
  SECTION("one always-on agent is plain SGD") {
    std::vector<DataBatch> one{batches[0]};
    const auto r = step(spec, Always{}, 0.1, w, one, 3, 0);
    const Vec g = stochastic_gradient(one[0], w);
    REQUIRE(r.next_weights == w - 0.1 * g);
  }
}

TEST_CASE("generalized update matches the enumerated two-agent cases") {
  RunConfig cfg = bench_run(EstimatedGain{0.2}, 20);
  const RunTrace trace = run(cfg);
  Vec w = cfg.initial_weights;
  for (const auto& rec : trace.steps) {
    REQUIRE(rec.objective_value ==
            objective(cfg.stream.spec, rec.weights));
    const bool a0 = rec.agents[0].decision.transmit;
    const bool a1 = rec.agents[1].decision.transmit;
    const Vec& g0 = rec.agents[0].gradient;
    const Vec& g1 = rec.agents[1].gradient;
    Vec expected;
    if (a0 && a1)
      expected = w - (cfg.step_size / 2.0) * (g0 + g1);
    else if (a0)
      expected = w - cfg.step_size * g0;
    else if (a1)
      expected = w - cfg.step_size * g1;
    else
      expected = w;
    w = apply_update(w, cfg.step_size, rec.agents);
    REQUIRE(w == expected);
  }
  REQUIRE(w == trace.final_weights);
}

TEST_CASE("runs") {
  SECTION("never policy leaves the objective constant") {
    const RunTrace trace = run(bench_run(Never{}));
    for (const auto& rec : trace.steps)
      REQUIRE(rec.objective_value == trace.steps.front().objective_value);
    REQUIRE(trace.final_objective == trace.steps.front().objective_value);
    REQUIRE(trace.total_transmits == 0);
  }
  SECTION("exact-gradient descent contracts at the spectral rate") {
    // Initial error aligned with the eigendirection that attains the
    // contraction factor, so the decay is exactly rho^k.
    RunConfig cfg;
    cfg.stream =
        StreamConfig{ProblemSpec::create(vec2(3, 5), diag2(3, 1), 0.0), 1, 1, 0};
    cfg.policy = Always{};
    cfg.step_size = 0.1;
    cfg.num_iterations = 10;
    cfg.initial_weights = vec2(3, 0);
    cfg.gradient_mode = GradientMode::kExact;
    const RunTrace trace = run(cfg);
    const double j0 = trace.steps.front().objective_value;
    const double rho = 0.81;
    for (std::size_t k = 0; k < trace.steps.size(); ++k)
      REQUIRE(trace.steps[k].objective_value ==
              Approx(std::pow(rho, double(k)) * j0).epsilon(1e-12));
    REQUIRE(trace.final_objective ==
            Approx(std::pow(rho, 10.0) * j0).epsilon(1e-12));
  }
  SECTION("mean final objective improves over 200 seeded runs") {
    double sum = 0.0;
    for (int s = 0; s < 200; ++s)
      sum += run(bench_run(EstimatedGain{0.05}, 10, 100 + s)).final_objective;
    REQUIRE(sum / 200.0 < 26.5);
  }
  SECTION("identical configs give bit-identical traces") {
    const RunConfig cfg = bench_run(EstimatedGain{0.1});
    std::stringstream a, b;
    write_trace(a, run(cfg), cfg);
    write_trace(b, run(cfg), cfg);
    REQUIRE(a.str() == b.str());
  }
  SECTION("divergent step sizes abort with a diverged status") {
    RunConfig cfg = bench_run(Always{}, 500);
    cfg.step_size = 10.0;  // factor (1 - 30)^2 per step
    const RunTrace trace = run(cfg);
    REQUIRE(trace.status == RunStatus::kDiverged);
    REQUIRE(trace.steps.size() < 500);
    REQUIRE(trace.final_objective > kDivergenceGuard);
    REQUIRE_FALSE(trace.warnings.empty());
  }
}

TEST_CASE("oracle policy descends by at least lambda per transmission") {
  for (double lambda : {0.05, 0.2, 1.0}) {
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
      RunConfig cfg = bench_run(OracleGain{lambda}, 30, seed);
      const RunTrace trace = run(cfg);
      Vec w = cfg.initial_weights;
      for (std::size_t k = 0; k + 1 < trace.steps.size(); ++k) {
        const bool any = trace.steps[k].agents[0].decision.transmit ||
                         trace.steps[k].agents[1].decision.transmit;
        const double drop = trace.steps[k].objective_value -
                            trace.steps[k + 1].objective_value;
        if (any) REQUIRE(drop >= lambda - 1e-9);
      }
    }
  }
}

TEST_CASE("always-on SGD trends downward over replications") {
  // Per-replication least-squares slope of J(w_k) on k; the ensemble mean
  // must be negative well beyond its standard error.
  const int reps = 500, k_count = 11;
  std::vector<double> slopes(reps);
  for (int r = 0; r < reps; ++r) {
    const RunTrace trace = run(bench_run(Always{}, 10, 9000 + r));
    const double kbar = (k_count - 1) / 2.0;
    double num = 0.0, den = 0.0, jbar = 0.0;
    std::vector<double> js;
    for (const auto& rec : trace.steps) js.push_back(rec.objective_value);
    js.push_back(trace.final_objective);
    for (double j : js) jbar += j;
    jbar /= k_count;
    for (int k = 0; k < k_count; ++k) {
      num += (k - kbar) * (js[k] - jbar);
      den += (k - kbar) * (k - kbar);
    }
    slopes[r] = num / den;
  }
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= reps;
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  const double se = std::sqrt(var / (reps - 1) / reps);
  REQUIRE(mean + 3 * se < 0.0);
}

TEST_CASE("replay") {
  const RunConfig cfg = bench_run(EstimatedGain{0.1});
  RunTrace trace = run(cfg);

  SECTION("fresh trace replays") { REQUIRE(replay_check(trace, cfg)); }
  SECTION("tampered decision fails") {
    trace.steps[3].agents[0].decision.transmit =
        !trace.steps[3].agents[0].decision.transmit;
    REQUIRE_FALSE(replay_check(trace, cfg));
  }
  SECTION("tampered gradient fails") {
    trace.steps[2].agents[1].gradient[0] += 1e-9;
    REQUIRE_FALSE(replay_check(trace, cfg));
  }
  SECTION("serialization round-trip replays bit-identically") {
    std::stringstream ss;
    write_trace(ss, trace, cfg);
    const RunTrace loaded = read_trace(ss);
    REQUIRE(replay_check(loaded, cfg));
    REQUIRE(loaded.final_weights == trace.final_weights);
    REQUIRE(loaded.total_transmits == trace.total_transmits);
    REQUIRE(loaded.any_agent_transmits == trace.any_agent_transmits);
    std::stringstream again;
    write_trace(again, loaded, cfg);
    REQUIRE(again.str() == ss.str());
  }
}

TEST_CASE("run configuration validation") {
  RunConfig cfg = bench_run(Always{});
  cfg.step_size = 0.0;
  REQUIRE_THROWS_AS(run(cfg), ConfigError);
  cfg = bench_run(Always{});
  cfg.num_iterations = 0;
  REQUIRE_THROWS_AS(run(cfg), ConfigError);
  cfg = bench_run(Always{});
  cfg.initial_weights = vec1(0);
  REQUIRE_THROWS_AS(run(cfg), ConfigError);
  cfg = bench_run(Always{});
  cfg.step_size = 0.7;  // above 2/3
  REQUIRE_FALSE(run(cfg).warnings.empty());
}
