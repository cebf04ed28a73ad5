#pragma once
#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace seqsel {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream identified by (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  return derive_seed(derive_seed(seed, stream), substream);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

inline Eigen::VectorXd standard_normal_vector(Eigen::Index m, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = normal(rng);
  return z;
}

/// Uniform direction on the unit sphere in R^m.
inline Eigen::VectorXd random_unit_vector(Eigen::Index m, Rng& rng) {
  for (;;) {
    Eigen::VectorXd z = standard_normal_vector(m, rng);
    const double norm = z.norm();
    if (norm > 1e-300) return z / norm;
  }
}

}  // namespace seqsel
