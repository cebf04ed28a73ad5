#include "seqsel/distributions.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>

#include "seqsel/errors.hpp"

namespace seqsel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Robert (1995) exponential proposal for Z | Z >= a, a large.
double tail_draw(Rng& rng, double a, double b) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (std::isfinite(b) && b - a < 1.0 / a) {
    // Narrow interval: uniform proposal, density ratio bounded by 1.
    for (;;) {
      const double x = a + (b - a) * unif(rng);
      if (unif(rng) <= std::exp(-0.5 * (x * x - a * a))) return x;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  std::exponential_distribution<double> expo(rate);
  for (;;) {
    const double x = a + expo(rng);
    if (x > b) continue;
    const double d = x - rate;
    if (unif(rng) <= std::exp(-0.5 * d * d)) return x;
  }
}

// Standard normal restricted to [a, b] with a >= 0.
double right_side_draw(Rng& rng, double a, double b) {
  if (a > 30.0) return tail_draw(rng, a, b);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double qa = normal_sf(a);
  const double qb = normal_sf(b);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double q = qa - unif(rng) * (qa - qb);
    if (q <= 0.0) continue;
    double x = normal_sf_inverse(q);
    if (x < a) x = a;
    if (x > b) x = b;
    return x;
  }
  return a;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double log_normal_sf(double x) {
  if (x == kInf) return -kInf;
  if (x < 0.0) return std::log1p(-normal_sf(-x));
  if (x < 35.0) return std::log(normal_sf(x));
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - kLogSqrt2Pi - std::log(x) + std::log(series);
}

double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_sf_inverse(double q) {
  if (q <= 0.0) return kInf;
  if (q >= 1.0) return -kInf;
  return kSqrt2 * boost::math::erfc_inv(2.0 * q);
}

double log_normal_interval_mass(double lo, double hi) {
  if (!(lo < hi)) return -kInf;
  if (lo >= 0.0) {
    const double la = log_normal_sf(lo);
    const double lb = log_normal_sf(hi);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (hi <= 0.0) return log_normal_interval_mass(-hi, -lo);
  // Interval straddles zero; the mass is at least of order min(|lo|, hi).
  return std::log(1.0 - normal_sf(hi) - normal_sf(-lo));
}

double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0)) throw RangeError("truncated_normal: standard deviation must be positive");
  if (!(lo <= hi)) throw InfeasibleError("truncated_normal: empty truncation interval");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  if (a == b) return lo;
  double z;
  if (a >= 0.0) {
    z = right_side_draw(rng, a, b);
  } else if (b <= 0.0) {
    z = -right_side_draw(rng, -b, -a);
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double pa = normal_cdf(a);
    const double pb = normal_cdf(b);
    z = normal_quantile(pa + unif(rng) * (pb - pa));
    if (z < a) z = a;
    if (z > b) z = b;
  }
  return mean + sd * z;
}

double student_t_two_sided(double observed, double df) {
  if (!(df > 0.0)) throw RangeError("student_t_two_sided: degrees of freedom must be positive");
  const double t = std::fabs(observed);
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace seqsel
