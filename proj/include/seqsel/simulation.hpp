#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqsel/core_model.hpp"
#include "seqsel/pvalues.hpp"
#include "seqsel/random.hpp"

namespace seqsel {

struct SimConfig {
  Index n = 50;
  Index p = 10;
  double pairwise_corr = 0.3;
  Index sparsity = 3;
  double signal = 5.0;
  double sigma2 = 1.0;
  /// Path length per trial.
  Index steps = 7;
  std::size_t reps = 500;
  std::vector<double> alphas{0.05, 0.2};
  std::vector<PValueMethod> methods{PValueMethod::kNominal,      PValueMethod::kMaxZ,     PValueMethod::kMaxT,
                                    PValueMethod::kSaturated,    PValueMethod::kMaxZIdentify,
                                    PValueMethod::kNextEntry};
  std::vector<std::string> rules{"basic", "forward"};
  std::uint64_t seed = 0;
  /// Null draws per Monte Carlo p-value.
  std::size_t budget = 5000;
  std::size_t min_accepted = 300;
  unsigned workers = 1;

  void validate() const;
};

struct SimulatedData {
  Dataset data;
  Eigen::VectorXd beta;
  std::vector<Index> support;
};

/// Equicorrelated Gaussian rows, unit-norm columns, beta_j = signal on the
/// first `sparsity` columns, y = X beta + N(0, sigma2 I). RangeError when the
/// correlation matrix is not positive definite.
SimulatedData generate_design(const SimConfig& config, Rng& rng);

/// Smallest k with truth contained in the first k entrants; entry_order.size() + 1 if never.
std::size_t completion_index(const std::vector<Index>& entry_order, const std::vector<Index>& truth);

struct TrialOutcome {
  std::size_t k_hat = 0;
  std::size_t k0 = 0;
  std::vector<Index> selected;
  std::vector<Index> truth;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct MetricsRow {
  std::string method;
  std::string rule;
  double alpha = 0.0;
  std::size_t trials = 0;
  Estimate prob_correct;
  Estimate fwer;
  Estimate cfwer;
  Estimate fdr;
  Estimate fdr_full;
  Estimate mean_s_full;
};

MetricsRow compute_metrics(const std::vector<TrialOutcome>& outcomes);

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
nlohmann::json to_json(const MetricsRow& row);

/// Percent of pairs in each ((a, b] x (c, d]) cell of width 0.2; rows index the first coordinate.
struct ContingencyReport {
  std::vector<std::vector<double>> percent;
  double correlation = 0.0;
  double ks_first = 0.0;
  double ks_second = 0.0;
  double ks_first_pvalue = 1.0;
  double ks_second_pvalue = 1.0;
};
void write_contingency_csv(const ContingencyReport& report, std::ostream& out);

struct BivariateReport {
  std::size_t reps = 0;
  ContingencyReport saturated;
  ContingencyReport selected;
};

/// Identity 2x2 design, sigma2 = 1, mu = 0. Selected-model p-values use the
/// closed forms of the max-z test on this design.
BivariateReport bivariate_experiment(std::size_t reps, std::uint64_t seed, unsigned workers = 1);

/// Max-z p-values of the two stepwise steps on the identity 2x2 design.
std::pair<double, double> bivariate_selected_pvalues(double y1, double y2);

struct CounterexampleReport {
  double alpha = 0.05;
  double C = 0.0;
  std::size_t reps = 0;
  Estimate fwer;
  /// Ordinary stepwise path with the same p-values and stopping rule.
  Estimate control_fwer;
  double limit = 0.0;
};

/// Three orthogonal variables with mu = (0, C, 0): X_1 enters first iff
/// |Y_3| > z_{alpha/2}, then BasicStop on the max-z p-values.
CounterexampleReport counterexample_experiment(double alpha, double C, std::size_t reps, std::uint64_t seed,
                                               unsigned workers = 1);

/// Max-z p-values for the path above, each conditioning on the current model
/// and its coefficients only.
std::vector<double> counterexample_pvalues(const Eigen::Vector3d& y, double alpha);
/// Max-z p-values of the ordinary stepwise path on the identity 3x3 design.
std::vector<double> orthogonal_stepwise_pvalues(const Eigen::VectorXd& y);

struct NullStepSummary {
  std::string method;
  /// p_{k0+1} and p_{k0+2} over trials where both steps exist.
  std::vector<double> first;
  std::vector<double> second;
  double ks_first_pvalue = 1.0;
  double ks_second_pvalue = 1.0;
  double correlation = 0.0;
  /// P(p_{k0+1} <= 0.05).
  double small_fraction = 0.0;
};

struct SparseReport {
  SimConfig config;
  std::vector<MetricsRow> metrics;
  std::vector<NullStepSummary> null_steps;
  /// Monte Carlo p-values that could not be computed and were set to 1.
  std::size_t failures = 0;
};

SparseReport sparse_experiment(const SimConfig& config);

struct ChangepointNullReport {
  std::size_t reps = 0;
  std::size_t length = 0;
  std::vector<double> p1;
  std::vector<double> p2;
  double ks_first_pvalue = 1.0;
  double ks_second_pvalue = 1.0;
  double correlation = 0.0;
};

/// i.i.d. N(0,1) series; randomized permutation p-values of steps 1 and 2.
ChangepointNullReport changepoint_null_experiment(std::size_t length, std::size_t reps, std::size_t permutations,
                                                  std::uint64_t seed, unsigned workers = 1);

nlohmann::json to_json(const BivariateReport& report);
nlohmann::json to_json(const CounterexampleReport& report);
nlohmann::json to_json(const SparseReport& report);
nlohmann::json to_json(const ChangepointNullReport& report);

}  // namespace seqsel
