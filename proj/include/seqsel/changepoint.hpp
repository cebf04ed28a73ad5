#pragma once
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace seqsel {

struct Series {
  std::vector<double> values;

  explicit Series(std::vector<double> v);
  std::size_t size() const { return values.size(); }
};

/// W(left, right). Must depend on each side only through its multiset of values.
struct TwoSampleStatistic {
  std::string name = "mean-difference";
  /// Empty: |mean_L - mean_R| sqrt(nL nR / (nL + nR)), evaluated from prefix sums.
  std::function<double(std::span<const double>, std::span<const double>)> fn;
};

/// Statistic for splitting the segment [begin, end) at `split` (left side
/// [begin, split)). Throws RangeError if a side is empty.
double two_sample_stat(const Series& series, std::size_t begin, std::size_t end, std::size_t split,
                       const TwoSampleStatistic& stat = {});

struct ChangepointStep {
  std::size_t split = 0;
  /// W*_k.
  double statistic = 0.0;
  /// Sorted splits after this step.
  std::vector<std::size_t> active;
};

struct ChangepointPath {
  std::vector<ChangepointStep> steps;
  std::size_t d() const { return steps.size(); }
  /// Sorted splits after k steps (k = 0 gives none).
  std::vector<std::size_t> active(std::size_t k) const;
};

/// Greedy path: step k adds the split in [1, T-1] maximizing W over the
/// current segments. Throws TieError on ties, RangeError when d > T - 1.
ChangepointPath greedy_changepoint_path(const Series& series, std::size_t d, const TwoSampleStatistic& stat = {});

/// Entry order of `splits` recovered from the segment contents alone: each
/// segment of `splits` may be given in any order.
std::vector<std::size_t> reconstruct_changepoints(const Series& series, const std::vector<std::size_t>& splits,
                                                  const TwoSampleStatistic& stat = {});

struct PermutationConfig {
  std::size_t permutations = 2000;
  std::size_t min_accepted = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct ChangepointPValue {
  double p = 1.0;
  double std_error = 0.0;
  double statistic = 0.0;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
};

/// Permutes within the segments of E_{k-1}, keeps permutations whose greedy
/// path reproduces E_{k-1}, and compares their W*_k with the observed one.
/// Permutation r uses seed derive_seed(config.seed, k, r). `randomize` breaks
/// ties uniformly. Throws LowAcceptanceError below min_accepted.
ChangepointPValue changepoint_pvalue(const Series& series, const ChangepointPath& path, std::size_t k,
                                     const PermutationConfig& config, bool randomize = false,
                                     const TwoSampleStatistic& stat = {});

}  // namespace seqsel
