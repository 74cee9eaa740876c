#include <fedgain/policies.hpp>

#include <catch2/catch.hpp>
#include <cmath>

#include "helpers.hpp"

using namespace fedgain;
using namespace fedgain::test;

namespace {

DataBatch identity_moment_batch() {
  // (1/2)(x1 x1^T + x2 x2^T) = I for x1 = [sqrt 2, 0], x2 = [0, sqrt 2].
  DataBatch b;
  b.features.resize(2, 2);
  b.features << std::sqrt(2.0), 0, 0, std::sqrt(2.0);
  b.labels = Vec::Zero(2);
  return b;
}

CounterRng policy_rng() { return CounterRng(1, 0, 0, StreamPurpose::kPolicy); }

}  // namespace

TEST_CASE("exact gain") {
  SECTION("zero update, zero gain") {
    REQUIRE(exact_gain(bench_problem(), vec2(0, 0), vec2(0, 0), 0.1) == 0.0);
  }
  SECTION("one-dimensional hand value") {
    const auto s = ProblemSpec::create(vec1(0), Mat::Identity(1, 1), 0.0);
    REQUIRE(exact_gain(s, vec1(1), vec1(1), 0.1) ==
            Approx(-0.095).epsilon(1e-12));
  }
  SECTION("equals the objective difference on random inputs") {
    const ProblemSpec spec = bench_problem();
    CounterRng rng(17, 0, 0, StreamPurpose::kProblemGen);
    for (int trial = 0; trial < 1000; ++trial) {
      const Vec w = random_vec(rng, 2, 4.0);
      const Vec g = random_vec(rng, 2, 4.0);
      const double eps = 0.01 + 0.5 * rng.next_unit();
      const double direct =
          objective(spec, w - eps * g) - objective(spec, w);
      REQUIRE(exact_gain(spec, w, g, eps) ==
              Approx(direct).margin(1e-12 * std::max(1.0, std::abs(direct))));
    }
  }
}

TEST_CASE("estimated gain") {
  SECTION("zero update, zero gain") {
    const DataBatch b = identity_moment_batch();
    REQUIRE(estimated_gain(b, vec2(0, 0), 0.2) == 0.0);
  }
  SECTION("identity empirical moment, unit gradient") {
    const DataBatch b = identity_moment_batch();
    REQUIRE(estimated_gain(b, vec2(1, 0), 0.2) ==
            Approx(-0.18).epsilon(1e-12));
  }
  SECTION("one-dimensional hand value") {
    DataBatch b;
    b.features.resize(1, 1);
    b.features << 2;
    b.labels = vec1(0);
    const Vec w = vec1(1);
    const Vec g = stochastic_gradient(b, w);
    REQUIRE(g[0] == Approx(4.0));
    REQUIRE(estimated_gain(b, g, 0.1) == Approx(-1.28).epsilon(1e-12));
  }
  SECTION("nonpositive whenever the step is below the batch limit") {
    CounterRng rng(23, 0, 0, StreamPurpose::kProblemGen);
    const ProblemSpec spec = bench_problem();
    StreamConfig cfg{spec, 5, 1, 555};
    const BatchSource source(cfg);
    for (int trial = 0; trial < 300; ++trial) {
      const DataBatch b = source.draw(0, trial);
      const Vec g = random_vec(rng, 2, 3.0);
      Eigen::SelfAdjointEigenSolver<Mat> es(empirical_second_moment(b));
      const double limit = 2.0 / es.eigenvalues().maxCoeff();
      const double eps = (0.05 + 0.9 * rng.next_unit()) * limit;
      REQUIRE(estimated_gain(b, g, eps) <= 1e-12);
    }
  }
  SECTION("tiny steps reduce both policies to the gradient norm") {
    StreamConfig cfg{bench_problem(), 5, 1, 31};
    const BatchSource source(cfg);
    for (int trial = 0; trial < 200; ++trial) {
      const DataBatch b = source.draw(0, trial);
      const Vec g = stochastic_gradient(b, vec2(0, 0));
      if (g.squaredNorm() < 1e-12) continue;
      REQUIRE(estimated_gain(b, g, 1e-6) < 0.0);
      REQUIRE(exact_gain(bench_problem(), vec2(0, 0), g, 1e-6) ==
              Approx(-1e-6 * g.dot(true_gradient(bench_problem(), vec2(0, 0))))
                  .epsilon(1e-4));
    }
  }
}

TEST_CASE("decisions") {
  const ProblemSpec spec = bench_problem();
  const Vec w = vec2(0, 0);

  SECTION("oracle gain transmits when the gain clears the threshold") {
    const auto s1 = ProblemSpec::create(vec1(0), Mat::Identity(1, 1), 0.0);
    const Vec w1 = vec1(1), g1 = vec1(1);
    DecisionInputs in;
    in.spec = &s1;
    in.weights = &w1;
    in.gradient = &g1;
    in.step_size = 0.1;
    auto rng = policy_rng();
    const auto d = decide(OracleGain{0.05}, in, rng);  // gain = -0.095
    REQUIRE(d.transmit);
    REQUIRE(d.score == Approx(-0.095));
    REQUIRE(d.threshold == -0.05);
  }
  SECTION("boundary gain equal to -lambda transmits") {
    const auto s1 = ProblemSpec::create(vec1(0), Mat::Identity(1, 1), 0.0);
    const Vec w1 = vec1(1), g1 = vec1(1);
    const double gain = exact_gain(s1, w1, g1, 0.1);
    DecisionInputs in;
    in.spec = &s1;
    in.weights = &w1;
    in.gradient = &g1;
    in.step_size = 0.1;
    auto rng = policy_rng();
    REQUIRE(decide(OracleGain{-gain}, in, rng).transmit);
  }
  SECTION("gradient norm compares against mu") {
    const Vec g = vec2(1, 1);
    DecisionInputs in;
    in.gradient = &g;
    auto rng = policy_rng();
    REQUIRE_FALSE(decide(GradNorm{4.0}, in, rng).transmit);  // |g|^2 = 2
    REQUIRE(decide(GradNorm{2.0}, in, rng).transmit);        // boundary >=
  }
  SECTION("always / never") {
    DecisionInputs in;
    auto rng = policy_rng();
    REQUIRE(decide(Always{}, in, rng).transmit);
    REQUIRE_FALSE(decide(Never{}, in, rng).transmit);
  }
  SECTION("random policy is a seeded Bernoulli") {
    DecisionInputs in;
    CounterRng a(9, 0, 0, StreamPurpose::kPolicy);
    CounterRng b(9, 0, 0, StreamPurpose::kPolicy);
    int transmits = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto da = decide(RandomPolicy{0.3}, in, a);
      REQUIRE(da.transmit == decide(RandomPolicy{0.3}, in, b).transmit);
      transmits += da.transmit;
    }
    REQUIRE(transmits == Approx(3000).margin(4 * std::sqrt(10000 * 0.3 * 0.7)));
  }
  SECTION("missing required inputs are configuration errors") {
    DecisionInputs in;
    auto rng = policy_rng();
    REQUIRE_THROWS_AS(decide(OracleGain{0.1}, in, rng), ConfigError);
    REQUIRE_THROWS_AS(decide(EstimatedGain{0.1}, in, rng), ConfigError);
    REQUIRE_THROWS_AS(decide(GradNorm{1.0}, in, rng), ConfigError);
  }
}

TEST_CASE("policy parameter validation") {
  REQUIRE_THROWS_AS(validate_policy(OracleGain{-0.1}), ConfigError);
  REQUIRE_THROWS_AS(validate_policy(GradNorm{0.0}), ConfigError);
  REQUIRE_THROWS_AS(validate_policy(RandomPolicy{1.5}), ConfigError);
  REQUIRE(validate_policy(OracleGain{0.0}).has_value());  // warning
  REQUIRE_FALSE(validate_policy(OracleGain{0.1}).has_value());
  REQUIRE(std::string(policy_name(PolicyKind{EstimatedGain{1}})) ==
          "estimated-gain");
}

TEST_CASE("transmission is monotone in lambda") {
  const ProblemSpec spec = bench_problem();
  StreamConfig cfg{spec, 5, 1, 424242};
  const BatchSource source(cfg);
  auto rng = policy_rng();
  for (int trial = 0; trial < 200; ++trial) {
    const DataBatch b = source.draw(0, trial);
    const Vec w = vec2(1, 2);
    const Vec g = stochastic_gradient(b, w);
    DecisionInputs in;
    in.spec = &spec;
    in.batch = &b;
    in.weights = &w;
    in.gradient = &g;
    in.step_size = 0.1;
    const double lo = 0.01, hi = 0.3;
    for (bool estimated : {false, true}) {
      const PolicyKind small = estimated ? PolicyKind{EstimatedGain{lo}}
                                         : PolicyKind{OracleGain{lo}};
      const PolicyKind large = estimated ? PolicyKind{EstimatedGain{hi}}
                                         : PolicyKind{OracleGain{hi}};
      if (decide(large, in, rng).transmit)
        REQUIRE(decide(small, in, rng).transmit);
    }
  }
}
