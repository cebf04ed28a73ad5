#include "seqsel/polytope.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "seqsel/errors.hpp"

namespace seqsel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd restrict_stat(const Eigen::VectorXd& u, const std::vector<Index>& position,
                              const std::vector<Index>& vars) {
  Eigen::VectorXd out(static_cast<Index>(vars.size()));
  for (std::size_t i = 0; i < vars.size(); ++i) out[static_cast<Index>(i)] = u[position[static_cast<std::size_t>(vars[i])]];
  return out;
}

// Rows +X_j' >= lower_j and -X_j' >= -upper_j, skipping infinite bounds.
void assemble_rows(const Dataset& data, SelectionPolytope& poly) {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (std::size_t c = 0; c < poly.inactive.size(); ++c) {
    const Eigen::RowVectorXd xj = data.X().col(poly.inactive[c]).transpose();
    const double lo = poly.lower[static_cast<Index>(c)], hi = poly.upper[static_cast<Index>(c)];
    if (std::isfinite(lo)) {
      rows.push_back(xj);
      rhs.push_back(lo);
    }
    if (std::isfinite(hi)) {
      rows.push_back(-xj);
      rhs.push_back(-hi);
    }
  }
  poly.gamma.resize(static_cast<Index>(rows.size()), data.n());
  poly.u.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    poly.gamma.row(static_cast<Index>(r)) = rows[r];
    poly.u[static_cast<Index>(r)] = rhs[r];
  }
}

void set_equalities(const Dataset& data, const ActiveSet& E, const Eigen::VectorXd& u_eq, SelectionPolytope& poly) {
  poly.active = E;
  poly.eq_matrix = select_columns(data.X(), E.entries).transpose();
  poly.u_eq = u_eq;
  poly.inactive.clear();
  for (Index j = 0; j < data.p(); ++j)
    if (!E.contains(j)) poly.inactive.push_back(j);
}

SelectionPolytope fs_signed(const Dataset& data, const ModelPath& path, Index k) {
  const Eigen::MatrixXd& X = data.X();
  SelectionPolytope poly;
  poly.sign_conditioned = true;
  set_equalities(data, path.active(k), sufficient_stat(data, path.active(k)).xty, poly);

  std::vector<Eigen::VectorXd> rows;
  ActiveBasis basis(data.n(), path.active(k).size());
  for (Index e : path.initial.entries) basis.add(X.col(e));
  for (Index i = 0; i < k; ++i) {
    const ActiveSet& after = path.active(i + 1);
    const Index j = path.step(i + 1).entered;
    const Eigen::VectorXd rj = basis.residual(X.col(j));
    const double s = rj.dot(data.y()) >= 0.0 ? 1.0 : -1.0;
    const Eigen::VectorXd a = s * rj / rj.norm();
    rows.push_back(a);
    for (Index m = 0; m < data.p(); ++m) {
      if (after.contains(m)) continue;
      const Eigen::VectorXd rm = basis.residual(X.col(m));
      const double norm = rm.norm();
      if (norm <= kDegenerateTolerance * X.col(m).norm()) continue;
      rows.push_back(a - rm / norm);
      rows.push_back(a + rm / norm);
    }
    basis.add(X.col(j));
  }
  poly.gamma.resize(static_cast<Index>(rows.size()), data.n());
  for (std::size_t r = 0; r < rows.size(); ++r) poly.gamma.row(static_cast<Index>(r)) = rows[r].transpose();
  poly.u = Eigen::VectorXd::Zero(static_cast<Index>(rows.size()));
  return poly;
}

}  // namespace

bool SelectionPolytope::contains(const Eigen::VectorXd& y, double tol) const {
  if (y.size() != gamma.cols() && gamma.rows() > 0) throw RangeError("contains: vector length does not match n");
  return slack(y) >= -tol;
}

double SelectionPolytope::slack(const Eigen::VectorXd& y) const {
  if (gamma.rows() == 0) return kInf;
  return (gamma * y - u).minCoeff();
}

SelectionPolytope fs_constraints(const Dataset& data, const ModelPath& path, Index k,
                                 const FsConstraintOptions& options) {
  if (path.algorithm != PathAlgorithm::kForwardStepwise) throw ConfigurationError("fs_constraints needs a stepwise path");
  if (k < 0 || k > path.d()) throw RangeError("step " + std::to_string(k) + " exceeds the path length");
  if (options.condition_on_signs) return fs_signed(data, path, k);

  const Eigen::MatrixXd& X = data.X();
  const ActiveSet& Ek = path.active(k);
  const Eigen::VectorXd u = k == 0 ? sufficient_stat(data, Ek).xty : path.step(k).suff_stat.xty;
  std::vector<Index> position(static_cast<std::size_t>(data.p()), -1);
  for (Index c = 0; c < Ek.size(); ++c) position[static_cast<std::size_t>(Ek.entries[static_cast<std::size_t>(c)])] = c;

  SelectionPolytope poly;
  set_equalities(data, Ek, u, poly);
  const Index m = static_cast<Index>(poly.inactive.size());
  poly.lower = Eigen::VectorXd::Constant(m, -kInf);
  poly.upper = Eigen::VectorXd::Constant(m, kInf);

  ActiveBasis basis(data.n(), Ek.size());
  for (Index e : path.initial.entries) basis.add(X.col(e));
  for (Index i = 0; i < k; ++i) {
    // Fitted values of step i, computed from u alone.
    const ActiveSet& Ei = path.active(i);
    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(data.n());
    if (!Ei.empty()) {
      const Eigen::MatrixXd XEi = select_columns(X, Ei.entries);
      const Eigen::VectorXd coef = (XEi.transpose() * XEi).ldlt().solve(restrict_stat(u, position, Ei.entries));
      fitted = XEi * coef;
    }
    const Index j = path.step(i + 1).entered;
    const double c_star = std::fabs(u[position[static_cast<std::size_t>(j)]] - X.col(j).dot(fitted)) /
                          basis.residual(X.col(j)).norm();
    for (Index c = 0; c < m; ++c) {
      const Index v = poly.inactive[static_cast<std::size_t>(c)];
      const double w = basis.residual(X.col(v)).norm();
      if (w <= kDegenerateTolerance * X.col(v).norm()) continue;
      const double offset = X.col(v).dot(fitted);
      poly.lower[c] = std::max(poly.lower[c], offset - c_star * w);
      poly.upper[c] = std::min(poly.upper[c], offset + c_star * w);
    }
    basis.add(X.col(j));
  }
  assemble_rows(data, poly);
  return poly;
}

SelectionPolytope lasso_constraints(const Dataset& data, const ModelPath& path, const LassoKnots& knots, Index k) {
  if (path.algorithm != PathAlgorithm::kLasso) throw ConfigurationError("lasso_constraints needs a lasso path");
  if (k < 0 || k > path.d()) throw RangeError("step " + std::to_string(k) + " exceeds the path length");
  const ActiveSet& Ek = path.active(k);
  double threshold = kInf;
  if (k > 0) {
    threshold = path.step(k).statistic;
  } else if (!knots.exact && !knots.knots.empty()) {
    threshold = knots.knots.front().lambda;
  }

  SelectionPolytope poly;
  poly.grid_only = !knots.exact;
  set_equalities(data, Ek, k == 0 ? sufficient_stat(data, Ek).xty : path.step(k).suff_stat.xty, poly);
  const Index m = static_cast<Index>(poly.inactive.size());
  poly.lower = Eigen::VectorXd::Constant(m, -kInf);
  poly.upper = Eigen::VectorXd::Constant(m, kInf);
  for (const LassoKnot& knot : knots.knots) {
    if (knot.lambda < threshold) continue;
    const Eigen::VectorXd fitted = data.X() * knot.beta;
    for (Index c = 0; c < m; ++c) {
      const double o = data.X().col(poly.inactive[static_cast<std::size_t>(c)]).dot(fitted);
      poly.lower[c] = std::max(poly.lower[c], o - knot.lambda);
      poly.upper[c] = std::min(poly.upper[c], o + knot.lambda);
    }
  }
  assemble_rows(data, poly);
  return poly;
}

SelectionPolytope selection_constraints(const Dataset& data, const ModelPath& path, const LassoKnots* knots, Index k) {
  if (path.algorithm == PathAlgorithm::kForwardStepwise) return fs_constraints(data, path, k);
  if (!knots) throw ConfigurationError("lasso constraints need the path knots");
  return lasso_constraints(data, path, *knots, k);
}

nlohmann::json to_json(const SelectionPolytope& poly) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  auto vec = [&](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
    return a;
  };
  nlohmann::json gamma = nlohmann::json::array();
  for (Index r = 0; r < poly.gamma.rows(); ++r) gamma.push_back(vec(poly.gamma.row(r).transpose()));
  return {
      {"gamma", gamma},
      {"u", vec(poly.u)},
      {"active", poly.active.entries},
      {"includes_intercept", poly.active.includes_intercept},
      {"u_eq", vec(poly.u_eq)},
      {"inactive", poly.inactive},
      {"lower", vec(poly.lower)},
      {"upper", vec(poly.upper)},
      {"grid_only", poly.grid_only},
      {"sign_conditioned", poly.sign_conditioned},
  };
}

}  // namespace seqsel
