#pragma once
#include <optional>
#include <string>
#include <vector>

#include "seqsel/core_model.hpp"

namespace seqsel {

enum class PathAlgorithm { kForwardStepwise, kLasso };

std::string to_string(PathAlgorithm algorithm);
/// Accepts "fs", "forward-stepwise", "lasso".
PathAlgorithm parse_algorithm(const std::string& name);

struct PathStep {
  Index k = 0;
  Index entered = -1;
  ActiveSet active_after;
  /// |t*| of the entrant for stepwise, lambda_k for the lasso.
  double statistic = 0.0;
  /// Stepwise only: |X_j'r| / ||P_E^perp X_j||, the quantity maximized at this step.
  double score = 0.0;
  SufficientStat suff_stat;
};

struct ModelPath {
  PathAlgorithm algorithm = PathAlgorithm::kForwardStepwise;
  /// E_0; fixed before any data-driven step (e.g. the intercept).
  ActiveSet initial;
  std::vector<PathStep> steps;
  /// Steps asked for; larger than d() when the path stopped early.
  Index requested = 0;

  Index d() const { return static_cast<Index>(steps.size()); }
  bool truncated() const { return d() < requested; }
  /// E_k for k in [0, d].
  const ActiveSet& active(Index k) const;
  const PathStep& step(Index k) const;
  /// Entrants j_1, ..., j_d.
  std::vector<Index> entry_order() const;
};

/// How the stepwise entrant is chosen. All three pick the same variable; the
/// two slow variants exist to cross-check the fast one.
enum class FsCriterion {
  kResidualScore,  // max |X_j'r| / ||P_E^perp X_j|| on an incremental basis
  kMinRss,         // min RSS(E + j) by a fresh QR fit per candidate
  kMaxAbsT,        // max |t_{j,E}|
};

struct ForwardStepwiseOptions {
  /// E_0. When unset: {intercept} if the dataset has one, else empty.
  std::optional<ActiveSet> initial;
  FsCriterion criterion = FsCriterion::kResidualScore;
};

ActiveSet default_initial_set(const Dataset& data);

/// Greedy RSS path of length d. Throws RangeError if d > min(n - |E_0|, p - |E_0|)
/// and TieError on an exact tie; returns a shorter path if every remaining
/// candidate is collinear with the active set.
ModelPath forward_stepwise_path(const Dataset& data, Index d, const ForwardStepwiseOptions& options = {});

struct LassoKnot {
  double lambda = 0.0;
  /// Active (nonzero) set on the segment just below lambda.
  std::vector<Index> active;
  /// Full-length coefficient vector theta^lambda.
  Eigen::VectorXd beta;
};

struct LassoKnots {
  /// Strictly decreasing in lambda.
  std::vector<LassoKnot> knots;
  /// false when the knots are the points of a finite grid.
  bool exact = true;
};

struct LassoPath {
  ModelPath path;
  LassoKnots knots;
};

/// Ever-active lasso path. With no grid the exact homotopy is followed until
/// `max_steps` variables have entered (or the path ends); with a grid the exact
/// solution is evaluated at the grid values only and lambda_k is the first grid
/// value at which the ever-active set grows. Throws NonUniqueSolutionError when
/// an active Gram block is singular, TieError on simultaneous entries.
LassoPath lasso_path(const Dataset& data, Index max_steps = -1,
                     const std::optional<std::vector<double>>& grid = std::nullopt);

/// Lasso solution at lambda read off the exact knots (piecewise linear).
Eigen::VectorXd lasso_solution_at(const LassoKnots& knots, double lambda, Index p);

/// Entry order of the variables in `active` (ignoring its order) recovered from
/// X and `suff` alone. For stepwise, an intercept flagged in `active` is treated
/// as E_0 and left out of the result. Throws ReconstructionError when the pair
/// could not have come from the named algorithm.
std::vector<Index> reconstruct_subpath(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                       PathAlgorithm algorithm);

}  // namespace seqsel
