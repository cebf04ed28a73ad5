#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "seqsel/distributions.hpp"
#include "seqsel/errors.hpp"
#include "seqsel/paths.hpp"
#include "seqsel/simulation.hpp"

using namespace seqsel;

namespace {

SamplerConfig mc(std::uint64_t seed) {
  SamplerConfig c;
  c.budget = 40000;
  c.seed = seed;
  return c;
}

void check_mc(const PValueResult& r, double expected) {
  const double se = std::sqrt(std::max(expected * (1 - expected), 1e-6) / static_cast<double>(r.samples));
  CHECK(std::fabs(r.p - expected) < 4.0 * se + 2.0 / static_cast<double>(r.samples));
}

}  // namespace

TEST_CASE("generated designs") {
  SimConfig config;
  config.n = 40;
  config.p = 6;
  Rng rng = make_rng(1);
  double off_diag = 0.0;
  int count = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const SimulatedData sim = generate_design(config, rng);
    const Eigen::MatrixXd& X = sim.data.X();
    for (Index j = 0; j < X.cols(); ++j) CHECK(std::fabs(X.col(j).norm() - 1.0) < 1e-10);
    const Eigen::MatrixXd G = X.transpose() * X;
    for (Index i = 0; i < 6; ++i)
      for (Index j = i + 1; j < 6; ++j) off_diag += G(i, j), ++count;
    CHECK(sim.support == std::vector<Index>{0, 1, 2});
    CHECK(sim.beta[0] == 5.0);
    CHECK(sim.beta[5] == 0.0);
  }
  // Uncentered correlations of unit columns average rho up to O(1/n).
  CHECK(off_diag / count == doctest::Approx(0.3).epsilon(0.05));

  config.pairwise_corr = 0.0;
  off_diag = 0.0;
  count = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::MatrixXd G = generate_design(config, rng).data.X().transpose() *
                              generate_design(config, rng).data.X();
    off_diag += G(0, 1);
    ++count;
  }
  CHECK(std::fabs(off_diag / count) < 3.0 / std::sqrt(40.0));

  config.pairwise_corr = -0.5;
  CHECK_THROWS_AS(generate_design(config, rng), RangeError);
}

TEST_CASE("completion index") {
  CHECK(completion_index({3, 1, 5, 2}, {1, 5}) == 3);
  CHECK(completion_index({3, 1, 5, 2}, {}) == 0);
  CHECK(completion_index({3, 1}, {1, 5}) == 3);
}

TEST_CASE("metrics") {
  std::vector<TrialOutcome> exact(10, TrialOutcome{3, 3, {0, 1, 2, 7}, {0, 1, 2}});
  const MetricsRow a = compute_metrics(exact);
  CHECK(a.fwer.value == 0.0);
  CHECK(a.fdr.value == 0.0);
  CHECK(a.prob_correct.value == 1.0);
  CHECK(a.mean_s_full.value == 3.0);

  const MetricsRow b = compute_metrics({TrialOutcome{5, 3, {0, 1, 2, 7, 8}, {0, 1, 2}}});
  CHECK(b.fdr.value == doctest::Approx(0.4));
  CHECK(b.fdr_full.value == doctest::Approx(0.4));
  CHECK(b.mean_s_full.value == 3.0);
  CHECK(b.fwer.value == 1.0);
  CHECK(b.cfwer.value == 1.0);

  std::vector<TrialOutcome> mixed{{0, 2, {4, 0, 1}, {0, 4}},
                                  {3, 2, {4, 0, 1}, {0, 4}},
                                  {2, 2, {4, 0, 1}, {0, 4}},
                                  {1, 0, {6}, {}}};
  const MetricsRow c = compute_metrics(mixed);
  CHECK(c.prob_correct.value == doctest::Approx(0.75));
  CHECK(c.fwer.value == doctest::Approx(0.5));
  CHECK(c.cfwer.value == doctest::Approx(2.0 / 3.0));
  CHECK(c.fdr.value == doctest::Approx((1.0 / 3.0 + 1.0) / 4.0));
  CHECK(c.fdr.value <= c.fwer.value);
  CHECK_THROWS_AS(compute_metrics({}), RangeError);

  std::ostringstream out;
  write_metrics_csv({c}, out);
  CHECK(out.str().rfind("method,rule,alpha,trials,prob_correct", 0) == 0);
}

TEST_CASE("bivariate closed forms match the sampler") {
  const Dataset base(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero(), 1.0);
  for (const Eigen::Vector2d& y : {Eigen::Vector2d(2.9, 2.5), Eigen::Vector2d(-0.4, 1.3), Eigen::Vector2d(0.8, -0.7)}) {
    const Dataset data = base.with_response(y);
    const ModelPath path = forward_stepwise_path(data, 2, {ActiveSet{}, FsCriterion::kResidualScore});
    const auto [p1, p2] = bivariate_selected_pvalues(y[0], y[1]);
    check_mc(max_z_pvalue(data, path, 1, mc(1)), p1);
    check_mc(max_z_pvalue(data, path, 2, mc(2)), p2);
  }
  CHECK(bivariate_selected_pvalues(2.9, 2.5).first == doctest::Approx(0.00745).epsilon(0.01));
}

TEST_CASE("orthogonal stepwise closed forms match the sampler") {
  const Dataset base(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d::Zero(), 1.0);
  for (const Eigen::Vector3d& y : {Eigen::Vector3d(0.3, 2.2, -1.0), Eigen::Vector3d(-1.9, 1.7, 0.2)}) {
    const Dataset data = base.with_response(y);
    const ModelPath path = forward_stepwise_path(data, 3, {ActiveSet{}, FsCriterion::kResidualScore});
    const std::vector<double> closed = orthogonal_stepwise_pvalues(y);
    for (Index k = 1; k <= 3; ++k) check_mc(max_z_pvalue(data, path, k, mc(10 + k)), closed[k - 1]);
  }
}

TEST_CASE("counterexample p-values follow their conditional laws") {
  const double alpha = 0.05, z = normal_sf_inverse(0.025);
  Rng rng = make_rng(3);
  std::normal_distribution<double> normal;
  auto draw_outside = [&] {
    for (;;) {
      const double v = normal(rng);
      if (std::fabs(v) > z) return v;
    }
  };
  auto draw_inside = [&] {
    for (;;) {
      const double v = normal(rng);
      if (std::fabs(v) <= z) return v;
    }
  };
  const int N = 200000;
  {
    const Eigen::Vector3d y(0.1, 2.3, 2.1);  // |Y_3| > z: X_1 first
    const double m = std::max(std::fabs(y[1]), std::fabs(y[2]));
    int hits = 0;
    for (int i = 0; i < N; ++i) hits += std::max(std::fabs(normal(rng)), std::fabs(draw_outside())) >= m;
    const double oracle = static_cast<double>(hits) / N;
    CHECK(counterexample_pvalues(y, alpha)[1] == doctest::Approx(oracle).epsilon(0.03));
  }
  {
    const Eigen::Vector3d y(1.5, 0.4, 1.2);  // X_2 first
    const double m = std::max(std::fabs(y[0]), std::fabs(y[2]));
    int hits = 0;
    for (int i = 0; i < N; ++i) hits += std::max(std::fabs(normal(rng)), std::fabs(draw_inside())) >= m;
    const double oracle = static_cast<double>(hits) / N;
    CHECK(counterexample_pvalues(y, alpha)[1] == doctest::Approx(oracle).epsilon(0.03));
  }
  const auto p = counterexample_pvalues(Eigen::Vector3d(0.2, 0.3, 1.0), alpha);
  CHECK(p[2] == doctest::Approx(2.0 * normal_sf(1.0)));
  CHECK(p[0] == doctest::Approx(1.0 - std::pow(1.0 - 2.0 * normal_sf(1.0), 3)));
}

TEST_CASE("small experiments are deterministic and well formed") {
  SimConfig config;
  config.reps = 4;
  config.budget = 400;
  config.min_accepted = 50;
  config.steps = 5;
  config.seed = 9;
  const SparseReport a = sparse_experiment(config);
  config.workers = 2;
  const SparseReport b = sparse_experiment(config);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.metrics.size() == config.methods.size() * config.rules.size() * config.alphas.size());
  for (const MetricsRow& r : a.metrics) {
    CHECK(r.fdr.value <= r.fwer.value);
    CHECK(r.prob_correct.value >= 0.0);
    CHECK(r.prob_correct.value <= 1.0);
  }

  const CounterexampleReport c = counterexample_experiment(0.05, 10.0, 2000, 4);
  CHECK(c.limit == doctest::Approx(0.0975));
  CHECK(c.fwer.value > c.control_fwer.value);

  const BivariateReport bv = bivariate_experiment(2000, 5);
  double total = 0.0;
  for (const auto& row : bv.saturated.percent)
    for (double v : row) total += v;
  CHECK(total == doctest::Approx(100.0));
  CHECK(bv.saturated.correlation < -0.3);

  const ChangepointNullReport cp = changepoint_null_experiment(20, 30, 100, 6);
  CHECK(cp.p1.size() == 30);
  CHECK_THROWS_AS(changepoint_null_experiment(2, 5, 10, 1), RangeError);
}
