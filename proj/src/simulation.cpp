#include "seqsel/simulation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "seqsel/changepoint.hpp"
#include "seqsel/distributions.hpp"
#include "seqsel/errors.hpp"
#include "seqsel/parallel.hpp"
#include "seqsel/paths.hpp"
#include "seqsel/stats.hpp"
#include "seqsel/stopping.hpp"

namespace seqsel {
namespace {

// P(|Z| < m)
double central(double m) { return 1.0 - 2.0 * normal_sf(m); }

Estimate proportion(std::size_t hits, std::size_t n) {
  if (n == 0) return {0.0, 0.0};
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, binomial_se(p, n)};
}

Estimate sample_mean(const std::vector<double>& x) {
  if (x.empty()) return {0.0, 0.0};
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double n = static_cast<double>(x.size());
  return {m, x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

ContingencyReport contingency(const std::vector<double>& a, const std::vector<double>& b) {
  ContingencyReport r;
  const auto counts = contingency_table(a, b, 5);
  for (const auto& row : counts) {
    std::vector<double> pct;
    for (std::size_t c : row) pct.push_back(100.0 * static_cast<double>(c) / static_cast<double>(a.size()));
    r.percent.push_back(pct);
  }
  r.correlation = pearson_correlation(a, b);
  const KsResult k1 = ks_uniform(a), k2 = ks_uniform(b);
  r.ks_first = k1.statistic;
  r.ks_second = k2.statistic;
  r.ks_first_pvalue = k1.pvalue;
  r.ks_second_pvalue = k2.pvalue;
  return r;
}

nlohmann::json to_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

nlohmann::json to_json(const ContingencyReport& r) {
  return {{"percent", r.percent},        {"correlation", r.correlation},
          {"ks_first", r.ks_first},      {"ks_first_pvalue", r.ks_first_pvalue},
          {"ks_second", r.ks_second},    {"ks_second_pvalue", r.ks_second_pvalue}};
}

}  // namespace

void SimConfig::validate() const {
  if (n < 1 || p < 1) throw RangeError("n and p must be positive");
  if (sparsity < 0 || sparsity > p) throw RangeError("sparsity must lie in [0, p]");
  if (!(sigma2 > 0.0)) throw RangeError("sigma2 must be positive");
  if (steps < 1 || steps > std::min(n, p)) throw RangeError("steps must lie in [1, min(n, p)]");
  if (reps == 0) throw RangeError("reps must be positive");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw RangeError("alpha must lie in (0, 1)");
  if (budget == 0) throw RangeError("budget must be positive");
}

SimulatedData generate_design(const SimConfig& config, Rng& rng) {
  const Index p = config.p;
  const double rho = config.pairwise_corr;
  if (!(rho < 1.0)) throw RangeError("pairwise correlation must be below 1");
  const Eigen::MatrixXd sigma =
      (1.0 - rho) * Eigen::MatrixXd::Identity(p, p) + rho * Eigen::MatrixXd::Ones(p, p);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw RangeError("correlation matrix is not positive definite");
  }
  Eigen::MatrixXd Z(config.n, p);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < config.n; ++i)
    for (Index j = 0; j < p; ++j) Z(i, j) = normal(rng);
  Eigen::MatrixXd X = Z * llt.matrixU();
  for (Index j = 0; j < p; ++j) X.col(j).normalize();

  SimulatedData out{Dataset(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)), Eigen::VectorXd::Zero(p), {}};
  for (Index j = 0; j < config.sparsity; ++j) {
    out.beta[j] = config.signal;
    out.support.push_back(j);
  }
  const double sigma_noise = std::sqrt(config.sigma2);
  Eigen::VectorXd y = X * out.beta;
  for (Index i = 0; i < config.n; ++i) y[i] += sigma_noise * normal(rng);
  out.data = Dataset(std::move(X), std::move(y), config.sigma2);
  return out;
}

std::size_t completion_index(const std::vector<Index>& entry_order, const std::vector<Index>& truth) {
  std::size_t remaining = truth.size();
  if (remaining == 0) return 0;
  for (std::size_t k = 0; k < entry_order.size(); ++k) {
    if (std::find(truth.begin(), truth.end(), entry_order[k]) != truth.end() && --remaining == 0) return k + 1;
  }
  return entry_order.size() + 1;
}

MetricsRow compute_metrics(const std::vector<TrialOutcome>& outcomes) {
  if (outcomes.empty()) throw RangeError("no trials to summarize");
  MetricsRow row;
  row.trials = outcomes.size();
  std::size_t correct = 0, errors = 0, errors_given_correct = 0;
  std::vector<double> fdp, fdp_full, s_full;
  for (const TrialOutcome& t : outcomes) {
    const std::size_t V = t.k_hat > t.k0 ? t.k_hat - t.k0 : 0;
    const double denom = static_cast<double>(std::max<std::size_t>(t.k_hat, 1));
    std::size_t v_full = 0;
    for (std::size_t i = 0; i < t.k_hat && i < t.selected.size(); ++i)
      v_full += std::find(t.truth.begin(), t.truth.end(), t.selected[i]) == t.truth.end();
    correct += t.k_hat >= t.k0;
    errors += V > 0;
    if (t.k_hat >= t.k0) errors_given_correct += V > 0;
    fdp.push_back(static_cast<double>(V) / denom);
    fdp_full.push_back(static_cast<double>(v_full) / denom);
    s_full.push_back(static_cast<double>(t.k_hat - v_full));
  }
  row.prob_correct = proportion(correct, outcomes.size());
  row.fwer = proportion(errors, outcomes.size());
  row.cfwer = proportion(errors_given_correct, correct);
  row.fdr = sample_mean(fdp);
  row.fdr_full = sample_mean(fdp_full);
  row.mean_s_full = sample_mean(s_full);
  return row;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "method,rule,alpha,trials,prob_correct,prob_correct_se,fwer,fwer_se,cfwer,cfwer_se,fdr,fdr_se,"
         "fdr_full,fdr_full_se,mean_s_full,mean_s_full_se\n";
  out.precision(6);
  for (const MetricsRow& r : rows) {
    out << r.method << ',' << r.rule << ',' << r.alpha << ',' << r.trials;
    for (const Estimate* e : {&r.prob_correct, &r.fwer, &r.cfwer, &r.fdr, &r.fdr_full, &r.mean_s_full})
      out << ',' << e->value << ',' << e->se;
    out << '\n';
  }
}

nlohmann::json to_json(const MetricsRow& r) {
  return {{"method", r.method},       {"rule", r.rule},
          {"alpha", r.alpha},         {"trials", r.trials},
          {"prob_correct", to_json(r.prob_correct)},
          {"fwer", to_json(r.fwer)},  {"cfwer", to_json(r.cfwer)},
          {"fdr", to_json(r.fdr)},    {"fdr_full", to_json(r.fdr_full)},
          {"mean_s_full", to_json(r.mean_s_full)}};
}

void write_contingency_csv(const ContingencyReport& report, std::ostream& out) {
  static const char* labels[] = {"(0,0.2]", "(0.2,0.4]", "(0.4,0.6]", "(0.6,0.8]", "(0.8,1]"};
  out << "p1\\p2";
  for (const char* l : labels) out << ',' << l;
  out << ",total\n";
  out.precision(4);
  for (std::size_t r = 0; r < report.percent.size(); ++r) {
    out << labels[r];
    double total = 0.0;
    for (double v : report.percent[r]) {
      out << ',' << v;
      total += v;
    }
    out << ',' << total << '\n';
  }
}

std::pair<double, double> bivariate_selected_pvalues(double y1, double y2) {
  const double a = std::max(std::fabs(y1), std::fabs(y2)), b = std::min(std::fabs(y1), std::fabs(y2));
  const double ta = normal_sf(a), tb = normal_sf(b);
  // 1 - (1 - 2 Phi(-a))^2 and P(|Z| >= b | |Z| <= a), written to keep small tails accurate.
  const double p1 = 4.0 * ta - 4.0 * ta * ta;
  const double p2 = 2.0 * (tb - ta) / (1.0 - 2.0 * ta);
  return {p1, p2};
}

BivariateReport bivariate_experiment(std::size_t reps, std::uint64_t seed, unsigned workers) {
  std::vector<double> sat1(reps), sat2(reps), sel1(reps), sel2(reps);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const Dataset base(I, Eigen::VectorXd::Zero(2), 1.0);
  parallel_for(reps, workers, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(seed, r));
    std::normal_distribution<double> normal;
    Eigen::Vector2d y(normal(rng), normal(rng));
    const Dataset data = base.with_response(y);
    const ModelPath path = forward_stepwise_path(data, 2, {ActiveSet{}, FsCriterion::kResidualScore});
    sat1[r] = saturated_pvalue(data, path, 1);
    sat2[r] = saturated_pvalue(data, path, 2);
    std::tie(sel1[r], sel2[r]) = bivariate_selected_pvalues(y[0], y[1]);
  });
  BivariateReport out;
  out.reps = reps;
  out.saturated = contingency(sat1, sat2);
  out.selected = contingency(sel1, sel2);
  return out;
}

std::vector<double> counterexample_pvalues(const Eigen::Vector3d& y, double alpha) {
  const double z = normal_sf_inverse(alpha / 2.0);
  const double qz = central(z);
  const Eigen::Vector3d a = y.cwiseAbs();
  std::vector<double> p(3);
  p[0] = 1.0 - std::pow(central(a.maxCoeff()), 3);
  if (a[2] > z) {
    // E_1 = {1}: Y_2 free, Y_3 restricted to |Y_3| > z.
    const double m = std::max(a[1], a[2]);
    const double inner = std::max(0.0, central(m) - qz) / (1.0 - qz);
    p[1] = 1.0 - central(m) * inner;
  } else {
    // E_1 = {2}: Y_1 free, |Y_3| <= z.
    const double m = std::max(a[0], a[2]);
    p[1] = 1.0 - central(m) * std::min(1.0, central(m) / qz);
  }
  p[2] = 2.0 * normal_sf(a[2]);
  return p;
}

std::vector<double> orthogonal_stepwise_pvalues(const Eigen::VectorXd& y) {
  std::vector<double> a(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) a[static_cast<std::size_t>(i)] = std::fabs(y[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  std::vector<double> p;
  double upper = 1.0;  // P(|Z| < previous entrant)
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double ratio = std::min(1.0, central(a[k]) / upper);
    p.push_back(1.0 - std::pow(ratio, static_cast<double>(a.size() - k)));
    upper = central(a[k]);
  }
  return p;
}

CounterexampleReport counterexample_experiment(double alpha, double C, std::size_t reps, std::uint64_t seed,
                                               unsigned workers) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw RangeError("alpha must lie in (0, 1)");
  if (reps == 0) throw RangeError("reps must be positive");
  const double z = normal_sf_inverse(alpha / 2.0);
  const std::vector<Index> truth = C != 0.0 ? std::vector<Index>{1} : std::vector<Index>{};
  std::vector<unsigned char> error(reps), control_error(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(seed, r));
    std::normal_distribution<double> normal;
    const Eigen::Vector3d y(normal(rng), C + normal(rng), normal(rng));
    const std::vector<Index> order =
        std::fabs(y[2]) > z ? std::vector<Index>{0, 1, 2} : std::vector<Index>{1, 0, 2};
    const std::size_t k_hat = basic_stop(counterexample_pvalues(y, alpha), alpha).k_hat;
    error[r] = k_hat > completion_index(order, truth);

    std::vector<Index> fs{0, 1, 2};
    std::sort(fs.begin(), fs.end(), [&](Index i, Index j) { return std::fabs(y[i]) > std::fabs(y[j]); });
    const std::size_t k_ctrl = basic_stop(orthogonal_stepwise_pvalues(y), alpha).k_hat;
    control_error[r] = k_ctrl > completion_index(fs, truth);
  });
  CounterexampleReport out;
  out.alpha = alpha;
  out.C = C;
  out.reps = reps;
  out.fwer = proportion(static_cast<std::size_t>(std::count(error.begin(), error.end(), 1)), reps);
  out.control_fwer =
      proportion(static_cast<std::size_t>(std::count(control_error.begin(), control_error.end(), 1)), reps);
  out.limit = 2.0 * alpha - alpha * alpha;
  return out;
}

SparseReport sparse_experiment(const SimConfig& config) {
  config.validate();
  const std::size_t M = config.methods.size();
  struct Trial {
    std::vector<std::vector<double>> pvalues;  // per method
    std::vector<std::vector<Index>> order;     // per method
    std::vector<Index> support;
    std::size_t failures = 0;
  };
  std::vector<Trial> trials(config.reps);
  const bool need_lasso = std::find(config.methods.begin(), config.methods.end(), PValueMethod::kNextEntry) !=
                          config.methods.end();

  parallel_for(config.reps, config.workers, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(config.seed, r));
    const SimulatedData sim = generate_design(config, rng);
    const ModelPath fs = forward_stepwise_path(sim.data, config.steps, {ActiveSet{}, FsCriterion::kResidualScore});
    std::optional<LassoPath> lasso;
    if (need_lasso) lasso = lasso_path(sim.data, config.steps);
    Trial& t = trials[r];
    t.support = sim.support;
    for (std::size_t m = 0; m < M; ++m) {
      const PValueMethod method = config.methods[m];
      const ModelPath& path = method == PValueMethod::kNextEntry ? lasso->path : fs;
      const LassoKnots* knots = method == PValueMethod::kNextEntry ? &lasso->knots : nullptr;
      std::vector<double> pv;
      for (Index k = 1; k <= path.d(); ++k) {
        SamplerConfig sc;
        sc.budget = config.budget;
        sc.min_accepted = config.min_accepted;
        sc.chain_length = config.budget;
        sc.burn_in = std::min<std::size_t>(2000, config.budget);
        sc.seed = derive_seed(config.seed, r, m * 1000 + static_cast<std::uint64_t>(k));
        try {
          pv.push_back(compute_pvalue(sim.data, path, knots, method, k, sc).p);
        } catch (const Error&) {
          if (is_closed_form(method)) throw;
          pv.push_back(1.0);
          ++t.failures;
        }
      }
      t.pvalues.push_back(std::move(pv));
      t.order.push_back(path.entry_order());
    }
  });

  SparseReport report;
  report.config = config;
  for (const Trial& t : trials) report.failures += t.failures;
  for (std::size_t m = 0; m < M; ++m) {
    const std::string name = to_string(config.methods[m]);
    for (const std::string& rule : config.rules) {
      for (double alpha : config.alphas) {
        std::vector<TrialOutcome> outcomes;
        for (const Trial& t : trials) {
          TrialOutcome o;
          o.k_hat = apply_stopping_rule(rule, t.pvalues[m], alpha).k_hat;
          o.k0 = completion_index(t.order[m], t.support);
          o.selected = t.order[m];
          o.truth = t.support;
          outcomes.push_back(std::move(o));
        }
        MetricsRow row = compute_metrics(outcomes);
        row.method = name;
        row.rule = rule;
        row.alpha = alpha;
        report.metrics.push_back(std::move(row));
      }
    }
    NullStepSummary null;
    null.method = name;
    std::size_t small = 0, firsts = 0;
    for (const Trial& t : trials) {
      const std::size_t k0 = completion_index(t.order[m], t.support);
      const auto& pv = t.pvalues[m];
      if (k0 + 1 <= pv.size()) {
        ++firsts;
        small += pv[k0] <= 0.05;
      }
      if (k0 + 2 <= pv.size()) {
        null.first.push_back(pv[k0]);
        null.second.push_back(pv[k0 + 1]);
      }
    }
    null.small_fraction = firsts ? static_cast<double>(small) / static_cast<double>(firsts) : 0.0;
    if (null.first.size() >= 2) {
      null.ks_first_pvalue = ks_uniform(null.first).pvalue;
      null.ks_second_pvalue = ks_uniform(null.second).pvalue;
      null.correlation = pearson_correlation(null.first, null.second);
    }
    report.null_steps.push_back(std::move(null));
  }
  return report;
}

ChangepointNullReport changepoint_null_experiment(std::size_t length, std::size_t reps, std::size_t permutations,
                                                  std::uint64_t seed, unsigned workers) {
  if (length < 3) throw RangeError("series length must be at least 3");
  ChangepointNullReport out;
  out.reps = reps;
  out.length = length;
  out.p1.resize(reps);
  out.p2.resize(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(seed, r));
    std::normal_distribution<double> normal;
    std::vector<double> y(length);
    for (double& v : y) v = normal(rng);
    const Series series(std::move(y));
    const ChangepointPath path = greedy_changepoint_path(series, 2);
    PermutationConfig pc;
    pc.permutations = permutations;
    pc.min_accepted = 0;
    pc.seed = derive_seed(seed, r, 1);
    out.p1[r] = changepoint_pvalue(series, path, 1, pc, true).p;
    out.p2[r] = changepoint_pvalue(series, path, 2, pc, true).p;
  });
  out.ks_first_pvalue = ks_uniform(out.p1).pvalue;
  out.ks_second_pvalue = ks_uniform(out.p2).pvalue;
  out.correlation = pearson_correlation(out.p1, out.p2);
  return out;
}

nlohmann::json to_json(const BivariateReport& r) {
  return {{"experiment", "bivariate"},
          {"reps", r.reps},
          {"saturated", to_json(r.saturated)},
          {"selected", to_json(r.selected)}};
}

nlohmann::json to_json(const CounterexampleReport& r) {
  return {{"experiment", "counterexample"}, {"alpha", r.alpha}, {"C", r.C},
          {"reps", r.reps},                 {"fwer", to_json(r.fwer)},
          {"control_fwer", to_json(r.control_fwer)}, {"limit", r.limit}};
}

nlohmann::json to_json(const SparseReport& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (PValueMethod m : r.config.methods) methods.push_back(to_string(m));
  nlohmann::json rows = nlohmann::json::array();
  for (const MetricsRow& m : r.metrics) rows.push_back(to_json(m));
  nlohmann::json nulls = nlohmann::json::array();
  for (const NullStepSummary& s : r.null_steps) {
    nulls.push_back({{"method", s.method},
                     {"pairs", s.first.size()},
                     {"ks_first_pvalue", s.ks_first_pvalue},
                     {"ks_second_pvalue", s.ks_second_pvalue},
                     {"correlation", s.correlation},
                     {"small_fraction", s.small_fraction}});
  }
  const SimConfig& c = r.config;
  return {{"experiment", "sparse"},
          {"config",
           {{"n", c.n}, {"p", c.p}, {"pairwise_corr", c.pairwise_corr}, {"sparsity", c.sparsity},
            {"signal", c.signal}, {"sigma2", c.sigma2}, {"steps", c.steps}, {"reps", c.reps},
            {"alphas", c.alphas}, {"methods", methods}, {"rules", c.rules}, {"seed", c.seed},
            {"budget", c.budget}, {"min_accepted", c.min_accepted}}},
          {"metrics", rows},
          {"null_steps", nulls},
          {"failures", r.failures}};
}

nlohmann::json to_json(const ChangepointNullReport& r) {
  return {{"experiment", "changepoint-null"},
          {"reps", r.reps},
          {"length", r.length},
          {"ks_first_pvalue", r.ks_first_pvalue},
          {"ks_second_pvalue", r.ks_second_pvalue},
          {"correlation", r.correlation}};
}

}  // namespace seqsel
