#pragma once
#include <Eigen/Dense>
#include <cstdint>

#include "seqsel/core_model.hpp"
#include "seqsel/random.hpp"

namespace testing {

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index p, seqsel::Rng& rng) {
  Eigen::MatrixXd X(n, p);
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = normal(rng);
  return X;
}

inline seqsel::Dataset random_dataset(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                      std::optional<double> sigma2 = std::nullopt) {
  seqsel::Rng rng = seqsel::make_rng(seed);
  Eigen::MatrixXd X = gaussian_matrix(n, p, rng);
  Eigen::VectorXd y = seqsel::standard_normal_vector(n, rng);
  return seqsel::Dataset(std::move(X), std::move(y), sigma2);
}

// Residual of y after regressing on the given columns, from the normal equations.
inline Eigen::VectorXd normal_equation_residual(const Eigen::MatrixXd& XE, const Eigen::VectorXd& y) {
  if (XE.cols() == 0) return y;
  const Eigen::VectorXd b = (XE.transpose() * XE).ldlt().solve(XE.transpose() * y);
  return y - XE * b;
}

}  // namespace testing
