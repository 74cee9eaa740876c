#include <fedgain/experiments.hpp>

#include <catch2/catch.hpp>
#include <cmath>

using namespace fedgain;

namespace {

ExperimentConfig base_experiment(const std::string& extra = "") {
  return resolve_experiment(FlatConfig::parse_string(
      "problem.preset = bench-n2\n"
      "stream.batch_size = 5\n"
      "stream.seed = 42\n"
      "run.step_size = 0.1\n"
      "run.iterations = 10\n"
      "policy.kind = estimated-gain\n"
      "policy.lambda = 0.1\n" +
      extra));
}

}  // namespace

TEST_CASE("sweep with a one-point grid aggregates the plain run") {
  auto cfg = base_experiment("sweep.policy.lambda = 0.1\n");
  cfg.replications = 1;
  const SweepResult result = experiment_sweep(cfg);
  REQUIRE(result.rows.size() == 1);
  const RunTrace trace = run(cfg.run);
  REQUIRE(result.rows[0].mean_final_objective == trace.final_objective);
  REQUIRE(result.rows[0].mean_total_transmits ==
          double(trace.total_transmits));
  REQUIRE(result.rows[0].std_final_objective == 0.0);
  REQUIRE(result.rows[0].diverged == 0);
}

TEST_CASE("sweep output is deterministic and ordered by the grid") {
  auto cfg = base_experiment("sweep.policy.lambda = 1,0.5,2\n");
  cfg.replications = 40;
  const std::string a = sweep_csv(experiment_sweep(cfg, 2));
  const std::string b = sweep_csv(experiment_sweep(cfg, 1));
  REQUIRE(a == b);  // thread count cannot matter
  const SweepResult r = experiment_sweep(cfg);
  REQUIRE(r.rows[0].value == 1.0);
  REQUIRE(r.rows[1].value == 0.5);
  REQUIRE(r.rows[2].value == 2.0);
  REQUIRE(a.rfind(kCsvBanner, 0) == 0);
}

TEST_CASE("two-curve sweep shares one result table") {
  auto cfg = base_experiment(
      "curves = gain,norm\n"
      "curve.gain.policy.kind = estimated-gain\n"
      "curve.gain.sweep.policy.lambda = 0.1,1\n"
      "curve.norm.policy.kind = grad-norm\n"
      "curve.norm.sweep.policy.mu = 1,10\n");
  cfg.replications = 20;
  const SweepResult r = experiment_sweep(cfg);
  REQUIRE(r.rows.size() == 4);
  REQUIRE(r.rows[0].curve == "gain");
  REQUIRE(r.rows[2].curve == "norm");
  REQUIRE(r.rows[2].parameter_path == "policy.mu");
  const std::string svg = sweep_svg(r);
  REQUIRE(svg.find("<svg") == 0);
  REQUIRE(svg.find("gain") != std::string::npos);
  REQUIRE(svg.find("norm") != std::string::npos);
}

TEST_CASE("divergent grid points are counted, not fatal") {
  // Needs the always policy: the gain triggers refuse ruinous steps on
  // their own (the quadratic term turns the estimated gain positive).
  auto cfg = resolve_experiment(FlatConfig::parse_string(
      "problem.preset = bench-n2\n"
      "stream.batch_size = 5\n"
      "stream.seed = 42\n"
      "run.step_size = 0.1\n"
      "run.iterations = 50\n"
      "policy.kind = always\n"
      "sweep.run.step_size = 0.1,10\n"));
  cfg.replications = 3;
  const SweepResult r = experiment_sweep(cfg);
  REQUIRE(r.rows[0].diverged == 0);
  REQUIRE(r.rows[1].diverged == 3);
}

TEST_CASE("gain compare") {
  SECTION("thresholds beyond any gain: both silent, full agreement") {
    auto cfg = base_experiment("run.gradient_mode = exact\n");
    cfg.run.num_iterations = 1;
    cfg.replications = 50;
    const auto r = experiment_gain_compare(cfg, {1e9});
    REQUIRE(r.rows.size() == 1);
    REQUIRE(r.rows[0].oracle_transmit_rate == 0.0);
    REQUIRE(r.rows[0].estimated_transmit_rate == 0.0);
    REQUIRE(r.rows[0].agreement_rate == 1.0);
    // nobody moved: one-step objective equals J(w0)
    REQUIRE(r.rows[0].mean_objective_oracle == 26.5);
  }
  SECTION("exact gradients and huge batches: identical decisions") {
    // Estimator error vanishes in the batch size; away from the decision
    // boundary both triggers agree everywhere.
    auto cfg = resolve_experiment(FlatConfig::parse_string(
        "problem.true_weights = 3,5\n"
        "problem.feature_cov = diag(3,1)\n"
        "problem.noise_std = 0\n"
        "stream.batch_size = 100000\n"
        "stream.seed = 9\n"
        "run.step_size = 0.2\n"
        "run.iterations = 1\n"
        "run.gradient_mode = exact\n"
        "policy.kind = estimated-gain\n"
        "policy.lambda = 1\n"));
    cfg.replications = 20;
    const auto r = experiment_gain_compare(
        cfg, {0.001, 0.01, 0.1, 1.0, 5.0, 30.0});
    for (const auto& row : r.rows) REQUIRE(row.agreement_rate == 1.0);
    // exact gain at w0 is -15.84; small lambdas transmit, lambda=30 not
    REQUIRE(r.rows[0].oracle_transmit_rate == 1.0);
    REQUIRE(r.rows[5].oracle_transmit_rate == 0.0);
  }
  SECTION("benchmark setup: high agreement across the lambda grid") {
    auto cfg = base_experiment();
    cfg.run.num_iterations = 1;
    cfg.run.step_size = 0.2;
    cfg.replications = 500;
    std::vector<double> grid;
    for (int i = 0; i < 8; ++i)
      grid.push_back(std::pow(10.0, -3.0 + 3.0 * i / 7.0));
    const auto r = experiment_gain_compare(cfg, grid);
    for (const auto& row : r.rows) REQUIRE(row.agreement_rate > 0.8);
    const std::string csv = gain_compare_csv(r);
    REQUIRE(csv.find("agreement_rate") != std::string::npos);
  }
  SECTION("requires the single-step mode") {
    auto cfg = base_experiment();
    cfg.replications = 5;
    REQUIRE_THROWS_WITH(experiment_gain_compare(cfg, {0.1}),
                        Catch::Contains("iterations = 1"));
  }
}

TEST_CASE("verification battery") {
  SECTION("oracle config: all applicable checks pass") {
    auto cfg = base_experiment();
    cfg.run.policy = OracleGain{0.1};
    cfg.verify.convergence_replications = 400;
    cfg.verify.budget_replications = 400;
    cfg.verify.steady_replications = 100;
    cfg.verify.steady_iterations = 60;
    cfg.verify.steady_burn_in = 30;
    cfg.verify.g_samples = 20000;
    cfg.verify.selection_samples = 20000;
    const VerifyResult r = experiment_verify(cfg);
    REQUIRE(r.all_applicable_pass);
    REQUIRE(r.entries.size() == 5);
    long asserted_ok = 0;
    for (const auto& e : r.entries)
      if (e.asserted && e.report.status == BoundReport::Status::kOk) {
        REQUIRE(e.report.pass);
        ++asserted_ok;
      }
    REQUIRE(asserted_ok == 4);
    const std::string text = verify_text(r);
    REQUIRE(text.find("overall: PASS") != std::string::npos);
    REQUIRE(text.find("advisory") != std::string::npos);
  }
  SECTION("estimated-gain config: bound checks skipped, selection advisory") {
    auto cfg = base_experiment();
    cfg.verify.convergence_replications = 10;
    cfg.verify.budget_replications = 10;
    cfg.verify.steady_replications = 10;
    cfg.verify.selection_samples = 10000;
    const VerifyResult r = experiment_verify(cfg);
    REQUIRE(r.all_applicable_pass);
    int skipped = 0;
    for (const auto& e : r.entries)
      skipped += e.report.status == BoundReport::Status::kSkipped;
    REQUIRE(skipped == 3);
    REQUIRE(verify_text(r).find("SKIPPED") != std::string::npos);
  }
  SECTION("lambda zero: budget check is not applicable") {
    auto cfg = base_experiment();
    cfg.run.policy = OracleGain{0.0};
    cfg.verify.convergence_replications = 50;
    cfg.verify.budget_replications = 50;
    cfg.verify.steady_replications = 20;
    cfg.verify.steady_iterations = 40;
    cfg.verify.steady_burn_in = 20;
    cfg.verify.g_samples = 10000;
    cfg.verify.selection_samples = 10000;
    const VerifyResult r = experiment_verify(cfg);
    bool saw_na = false;
    for (const auto& e : r.entries)
      if (e.report.check == "communication-budget")
        saw_na = e.report.status == BoundReport::Status::kNotApplicable;
    REQUIRE(saw_na);
    REQUIRE(verify_text(r).find("NOT-APPLICABLE") != std::string::npos);
  }
  SECTION("csv rendering is stable") {
    auto cfg = base_experiment();
    cfg.run.policy = OracleGain{0.5};
    cfg.verify.convergence_replications = 50;
    cfg.verify.budget_replications = 50;
    cfg.verify.steady_replications = 20;
    cfg.verify.steady_iterations = 40;
    cfg.verify.steady_burn_in = 10;
    cfg.verify.g_samples = 10000;
    cfg.verify.selection_samples = 10000;
    REQUIRE(verify_csv(experiment_verify(cfg, 2)) ==
            verify_csv(experiment_verify(cfg, 1)));
  }
}
