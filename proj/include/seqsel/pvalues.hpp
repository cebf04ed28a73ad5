#pragma once
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqsel/paths.hpp"
#include "seqsel/samplers.hpp"

namespace seqsel {

enum class PValueMethod { kMaxT, kMaxZ, kMaxZIdentify, kNextEntry, kSaturated, kNominal };

std::string to_string(PValueMethod method);
PValueMethod parse_pvalue_method(const std::string& name);
/// Closed-form methods carry no Monte Carlo error.
bool is_closed_form(PValueMethod method);

struct PValueResult {
  double p = 1.0;
  double std_error = 0.0;
  double statistic = 0.0;
  /// Monte Carlo methods only.
  std::optional<SamplerMethod> sampler;
  std::size_t samples = 0;
  double acceptance_rate = 0.0;
};

struct PValueOptions {
  /// Next-entry on a grid: break ties uniformly instead of counting them.
  bool randomize = false;
  /// Saturated test; falls back to the dataset's variance.
  std::optional<double> sigma2;
  unsigned workers = 1;
};

/// (1 + #{null >= observed}) / (1 + N).
double tail_pvalue(const std::vector<double>& null_stats, double observed);

/// Step k tests use the conditioning event of step k-1. The knots are needed
/// when `path` is a lasso path.
PValueResult max_t_pvalue(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                          const LassoKnots* knots = nullptr);
PValueResult max_z_pvalue(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                          const LassoKnots* knots = nullptr);
/// Like max-z, keeping only null draws whose largest |z| belongs to j_k.
PValueResult max_z_identify_pvalue(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                                   const LassoKnots* knots = nullptr);
/// Rejects for large lambda_k. Null draws are classified by checking the
/// observed solution's KKT conditions on the knots in [lambda_k, lambda_{k-1}];
/// no lasso is re-solved.
PValueResult next_entry_pvalue(const Dataset& data, const LassoPath& lasso, Index k, const SamplerConfig& config,
                               bool randomize = false);

enum class EntryComparison { kBelow = -1, kEqual = 0, kAbove = 1 };

/// lambda_k(y*) versus lambda_k(y) for each column of `samples`, all drawn from
/// the step k-1 conditioning set.
std::vector<EntryComparison> next_entry_comparisons(const Dataset& data, const LassoPath& lasso, Index k,
                                                    const Eigen::MatrixXd& samples);

/// Closed-form truncated Gaussian test of the entrant's least squares
/// coefficient, conditioning on the signed choices through step k. Stepwise only.
double saturated_pvalue(const Dataset& data, const ModelPath& path, Index k,
                        std::optional<double> sigma2 = std::nullopt);

struct TruncationInterval {
  double lower = 0.0;
  double upper = 0.0;
  double observed = 0.0;
  /// sigma ||eta||.
  double scale = 1.0;
};
TruncationInterval saturated_interval(const Dataset& data, const ModelPath& path, Index k, double sigma2);
/// P(|T| >= |observed| | T in [lower, upper]) for T ~ N(0, scale^2).
double truncated_two_sided(const TruncationInterval& interval);

/// Two-sided t tail at the entrant's |t| with n - |E_{k-1}| - 2 degrees of freedom.
double nominal_pvalue(const Dataset& data, const ModelPath& path, Index k);

struct PValueSeries {
  PValueMethod method = PValueMethod::kMaxT;
  std::vector<Index> variables;
  std::vector<double> values;
  std::vector<double> mc_stderr;
  std::vector<double> statistics;
  std::vector<std::string> samplers;

  std::size_t size() const { return values.size(); }
};

/// One step; config.seed is used as given.
PValueResult compute_pvalue(const Dataset& data, const ModelPath& path, const LassoKnots* knots, PValueMethod method,
                            Index k, const SamplerConfig& config, const PValueOptions& options = {});

/// Every step of the path; step k uses seed derive_seed(config.seed, k).
PValueSeries compute_pvalues(const Dataset& data, const ModelPath& path, const LassoKnots* knots,
                             PValueMethod method, const SamplerConfig& config, const PValueOptions& options = {});

/// Columns step, variable, method, p, stderr, statistic.
void write_pvalue_csv(const PValueSeries& series, const Dataset& data, std::ostream& out);

}  // namespace seqsel
