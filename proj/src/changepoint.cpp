#include "seqsel/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "seqsel/errors.hpp"
#include "seqsel/parallel.hpp"
#include "seqsel/random.hpp"
#include "seqsel/stats.hpp"

namespace seqsel {
namespace {

constexpr double kTieTolerance = 1e-12;

bool same_value(double a, double b) { return std::fabs(a - b) <= kTieTolerance * std::max({1.0, std::fabs(a), std::fabs(b)}); }

class Evaluator {
 public:
  Evaluator(const std::vector<double>& y, const TwoSampleStatistic& stat) : y_(y), stat_(stat) {
    if (!stat_.fn) {
      prefix_.assign(y.size() + 1, 0.0);
      for (std::size_t i = 0; i < y.size(); ++i) prefix_[i + 1] = prefix_[i] + y[i];
    }
  }

  double operator()(std::size_t begin, std::size_t end, std::size_t split) const {
    if (stat_.fn) {
      return stat_.fn(std::span<const double>(y_.data() + begin, split - begin),
                      std::span<const double>(y_.data() + split, end - split));
    }
    const double nl = static_cast<double>(split - begin), nr = static_cast<double>(end - split);
    const double ml = (prefix_[split] - prefix_[begin]) / nl;
    const double mr = (prefix_[end] - prefix_[split]) / nr;
    return std::fabs(ml - mr) * std::sqrt(nl * nr / (nl + nr));
  }

 private:
  const std::vector<double>& y_;
  const TwoSampleStatistic& stat_;
  std::vector<double> prefix_;
};

struct Best {
  std::size_t split = 0;
  double value = -1.0;
  bool tied = false;
};

// Best split over the segments cut by `active` (sorted); candidates limited to
// `allowed` when given.
Best best_split(const Evaluator& eval, std::size_t T, const std::vector<std::size_t>& active,
                const std::vector<std::size_t>* allowed) {
  Best best;
  std::size_t begin = 0;
  for (std::size_t s = 0; s <= active.size(); ++s) {
    const std::size_t end = s < active.size() ? active[s] : T;
    auto consider = [&](std::size_t t) {
      const double w = eval(begin, end, t);
      if (best.value >= 0.0 && same_value(w, best.value)) {
        best.tied = true;
      } else if (w > best.value) {
        best = {t, w, false};
      }
    };
    if (allowed) {
      for (std::size_t t : *allowed)
        if (t > begin && t < end) consider(t);
    } else {
      for (std::size_t t = begin + 1; t < end; ++t) consider(t);
    }
    begin = end;
  }
  return best;
}

std::vector<std::size_t> insert_sorted(std::vector<std::size_t> v, std::size_t x) {
  v.insert(std::upper_bound(v.begin(), v.end(), x), x);
  return v;
}

// Greedy splits for `d` steps; nullopt on a tie.
std::optional<ChangepointPath> greedy(const std::vector<double>& y, std::size_t d, const TwoSampleStatistic& stat,
                                      const std::vector<std::size_t>* allowed) {
  const Evaluator eval(y, stat);
  ChangepointPath path;
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < d; ++k) {
    const Best b = best_split(eval, y.size(), active, allowed);
    if (b.tied) return std::nullopt;
    if (b.value < 0.0) break;
    active = insert_sorted(active, b.split);
    path.steps.push_back({b.split, b.value, active});
  }
  return path;
}

}  // namespace

Series::Series(std::vector<double> v) : values(std::move(v)) {
  if (values.size() < 2) throw RangeError("a series needs at least two values");
  for (double x : values)
    if (!std::isfinite(x)) throw RangeError("series values must be finite");
}

double two_sample_stat(const Series& series, std::size_t begin, std::size_t end, std::size_t split,
                       const TwoSampleStatistic& stat) {
  if (end > series.size() || !(begin < split && split < end)) {
    throw RangeError("split must leave both sides of the segment nonempty");
  }
  return Evaluator(series.values, stat)(begin, end, split);
}

std::vector<std::size_t> ChangepointPath::active(std::size_t k) const {
  if (k > steps.size()) throw RangeError("step exceeds the changepoint path length");
  return k == 0 ? std::vector<std::size_t>{} : steps[k - 1].active;
}

ChangepointPath greedy_changepoint_path(const Series& series, std::size_t d, const TwoSampleStatistic& stat) {
  if (d > series.size() - 1) throw RangeError("at most T - 1 changepoints");
  auto path = greedy(series.values, d, stat, nullptr);
  if (!path) throw TieError("two splits attain the same statistic");
  return *path;
}

std::vector<std::size_t> reconstruct_changepoints(const Series& series, const std::vector<std::size_t>& splits,
                                                  const TwoSampleStatistic& stat) {
  std::vector<std::size_t> sorted = splits;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
      (!sorted.empty() && (sorted.front() == 0 || sorted.back() >= series.size()))) {
    throw ReconstructionError("splits must be distinct and inside [1, T-1]");
  }
  // W only sees each side's values, so restricting the greedy search to the
  // recorded splits replays the original order.
  auto path = greedy(series.values, sorted.size(), stat, &sorted);
  if (!path || path->d() != sorted.size()) throw ReconstructionError("recorded splits do not form a greedy path");
  std::vector<std::size_t> order;
  for (const auto& s : path->steps) order.push_back(s.split);
  return order;
}

ChangepointPValue changepoint_pvalue(const Series& series, const ChangepointPath& path, std::size_t k,
                                     const PermutationConfig& config, bool randomize,
                                     const TwoSampleStatistic& stat) {
  if (k < 1 || k > path.d()) throw RangeError("step outside the changepoint path");
  if (config.permutations == 0) throw ConfigurationError("permutations must be positive");
  const std::vector<std::size_t> conditioned = path.active(k - 1);
  const double observed = path.steps[k - 1].statistic;
  const std::size_t T = series.size();

  // 0: rejected, 1: below, 2: equal, 3: above.
  std::vector<unsigned char> outcome(config.permutations, 0);
  parallel_for(config.permutations, config.workers, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(config.seed, k, r));
    std::vector<double> y = series.values;
    std::size_t begin = 0;
    for (std::size_t s = 0; s <= conditioned.size(); ++s) {
      const std::size_t end = s < conditioned.size() ? conditioned[s] : T;
      std::shuffle(y.begin() + static_cast<std::ptrdiff_t>(begin), y.begin() + static_cast<std::ptrdiff_t>(end), rng);
      begin = end;
    }
    std::vector<std::size_t> reached;
    if (k > 1) {
      const auto replay = greedy(y, k - 1, stat, nullptr);
      if (!replay || replay->d() != k - 1) return;
      reached = replay->steps.back().active;
      if (reached != conditioned) return;
    }
    const Best b = best_split(Evaluator(y, stat), T, conditioned, nullptr);
    if (b.value < 0.0) return;
    outcome[r] = same_value(b.value, observed) ? 2 : (b.value > observed ? 3 : 1);
  });

  ChangepointPValue out;
  out.statistic = observed;
  out.proposed = config.permutations;
  std::size_t above = 0, equal = 0;
  for (unsigned char o : outcome) {
    out.accepted += o != 0;
    above += o == 3;
    equal += o == 2;
  }
  if (out.accepted < config.min_accepted) {
    throw LowAcceptanceError("too few permutations reproduce the conditioning splits", out.accepted, out.proposed);
  }
  const double N = static_cast<double>(out.accepted);
  if (randomize) {
    Rng rng = make_rng(derive_seed(config.seed, k, config.permutations));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    out.p = (static_cast<double>(above) + unif(rng) * (1.0 + static_cast<double>(equal))) / (N + 1.0);
  } else {
    out.p = (1.0 + static_cast<double>(above + equal)) / (N + 1.0);
  }
  out.std_error = out.accepted ? binomial_se(static_cast<double>(above + equal) / N, out.accepted) : 0.5;
  return out;
}

}  // namespace seqsel
