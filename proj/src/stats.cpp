#include "seqsel/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "seqsel/errors.hpp"

namespace seqsel {

double mean(const std::vector<double>& x) {
  if (x.empty()) throw RangeError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double binomial_se(double p, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw RangeError("KS test on an empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sq = std::sqrt(n);
  return {d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)};
}

KsResult ks_uniform(const std::vector<double>& x) {
  return ks_test(x, [](double v) { return std::clamp(v, 0.0, 1.0); });
}

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw RangeError("correlation needs two samples of equal length >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double batch_means_se(const std::vector<double>& x, std::size_t batches) {
  if (batches < 2 || x.size() < batches) throw InsufficientSamplesError("too few draws for batch means");
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    means[b] = std::accumulate(x.begin() + b * len, x.begin() + (b + 1) * len, 0.0) / static_cast<double>(len);
  }
  const double m = mean(means);
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

std::vector<std::vector<std::size_t>> contingency_table(const std::vector<double>& x, const std::vector<double>& y,
                                                        std::size_t bins) {
  if (x.size() != y.size()) throw RangeError("contingency table needs paired samples");
  auto cell = [bins](double v) {
    const double scaled = std::ceil(v * static_cast<double>(bins)) - 1.0;
    return static_cast<std::size_t>(std::clamp(scaled, 0.0, static_cast<double>(bins - 1)));
  };
  std::vector<std::vector<std::size_t>> table(bins, std::vector<std::size_t>(bins, 0));
  for (std::size_t i = 0; i < x.size(); ++i) ++table[cell(x[i])][cell(y[i])];
  return table;
}

ChiSquareResult chi_square_independence(const std::vector<double>& x, const std::vector<double>& y,
                                        std::size_t bins) {
  const auto table = contingency_table(x, y, bins);
  const double total = static_cast<double>(x.size());
  std::vector<double> rows(bins, 0.0), cols(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j) {
      rows[i] += table[i][j];
      cols[j] += table[i][j];
    }
  ChiSquareResult out;
  std::size_t used_rows = 0, used_cols = 0;
  for (std::size_t i = 0; i < bins; ++i) used_rows += rows[i] > 0;
  for (std::size_t j = 0; j < bins; ++j) used_cols += cols[j] > 0;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j) {
      const double expected = rows[i] * cols[j] / total;
      if (expected > 0.0) out.statistic += (table[i][j] - expected) * (table[i][j] - expected) / expected;
    }
  out.df = static_cast<double>((used_rows - 1) * (used_cols - 1));
  out.pvalue = out.df > 0 ? boost::math::gamma_q(0.5 * out.df, 0.5 * out.statistic) : 1.0;
  return out;
}

}  // namespace seqsel
