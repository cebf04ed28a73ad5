#pragma once
#include <json.hpp>
#include <vector>

#include "seqsel/core_model.hpp"
#include "seqsel/paths.hpp"

namespace seqsel {

/// {y : gamma y >= u} together with the equalities eq_matrix y = u_eq
/// (eq_matrix = X_E'). For the unsigned constraints, the rows come in pairs
/// +X_j' >= lower_j and -X_j' >= -upper_j for each inactive j.
struct SelectionPolytope {
  Eigen::MatrixXd gamma;
  Eigen::VectorXd u;
  ActiveSet active;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd u_eq;
  std::vector<Index> inactive;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  /// Lasso bounds taken over grid values only (conservative).
  bool grid_only = false;
  /// Rows encode the signed stepwise choices in y-space (no equalities needed).
  bool sign_conditioned = false;

  Index rows() const { return gamma.rows(); }
  /// gamma y >= u - tol, componentwise.
  bool contains(const Eigen::VectorXd& y, double tol = 0.0) const;
  /// Smallest slack min_i (gamma y - u)_i; +inf with no rows.
  double slack(const Eigen::VectorXd& y) const;
};

struct FsConstraintOptions {
  /// Condition on the full signed sequence of choices through step k instead
  /// of the sufficient-statistic event. Used by the saturated test.
  bool condition_on_signs = false;
};

/// Selection event of the first k stepwise steps given X_{E_k}'y. Depends on y
/// only through the recorded (E_k, U_k).
SelectionPolytope fs_constraints(const Dataset& data, const ModelPath& path, Index k,
                                 const FsConstraintOptions& options = {});

/// Event {ever-active set at lambda_k is E_k} given X_{E_k}'y, from the lasso
/// knots with lambda >= lambda_k. Infinite bounds drop their row.
SelectionPolytope lasso_constraints(const Dataset& data, const ModelPath& path, const LassoKnots& knots, Index k);
inline SelectionPolytope lasso_constraints(const Dataset& data, const LassoPath& lasso, Index k) {
  return lasso_constraints(data, lasso.path, lasso.knots, k);
}

/// Polytope for whichever algorithm produced `path`; lasso needs its knots.
SelectionPolytope selection_constraints(const Dataset& data, const ModelPath& path, const LassoKnots* knots, Index k);

nlohmann::json to_json(const SelectionPolytope& polytope);

}  // namespace seqsel
