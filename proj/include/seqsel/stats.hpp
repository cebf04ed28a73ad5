#pragma once
#include <cstddef>
#include <functional>
#include <vector>

namespace seqsel {

double mean(const std::vector<double>& x);
double binomial_se(double p, std::size_t n);

struct KsResult {
  double statistic = 0.0;
  double pvalue = 1.0;
};

/// One-sample Kolmogorov-Smirnov test; the p-value uses the asymptotic
/// Kolmogorov law with Stephens' small-sample correction.
KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf);
KsResult ks_uniform(const std::vector<double>& x);
double kolmogorov_sf(double lambda);

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);

/// Standard error of the mean of a correlated sequence by non-overlapping batch
/// means; throws unless at least `batches` batches of length >= 1 fit.
double batch_means_se(const std::vector<double>& x, std::size_t batches = 20);

struct ChiSquareResult {
  double statistic = 0.0;
  double df = 0.0;
  double pvalue = 1.0;
};

/// Pearson chi-square test of independence of two [0,1] samples on a
/// bins x bins grid of equal-width cells.
ChiSquareResult chi_square_independence(const std::vector<double>& x, const std::vector<double>& y,
                                        std::size_t bins = 5);

/// Counts of (x, y) in the bins x bins grid; x indexes rows. Cells are (a, b]
/// except the first, which also holds 0.
std::vector<std::vector<std::size_t>> contingency_table(const std::vector<double>& x, const std::vector<double>& y,
                                                        std::size_t bins = 5);

}  // namespace seqsel
