#pragma once
#include "seqsel/random.hpp"

namespace seqsel {

double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate far into the right tail.
double normal_sf(double x);
/// log(1 - Phi(x)); finite for all finite x.
double log_normal_sf(double x);
double normal_quantile(double p);
/// Inverse of the upper tail: returns x with normal_sf(x) = q.
double normal_sf_inverse(double q);

/// log P(lo <= Z <= hi) for standard normal Z (lo < hi, infinities allowed).
double log_normal_interval_mass(double lo, double hi);

/// Draw from N(mean, sd^2) restricted to [lo, hi]. Stable for truncation points
/// far in the tails.
double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

/// P(|T| >= |observed|) for T ~ t_df.
double student_t_two_sided(double observed, double df);

}  // namespace seqsel
