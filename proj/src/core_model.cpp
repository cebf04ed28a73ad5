#include "seqsel/core_model.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqsel/errors.hpp"

namespace seqsel {

Dataset::Dataset(Eigen::MatrixXd X, Eigen::VectorXd y, std::optional<double> sigma2,
                 std::vector<std::string> column_names)
    : y_(std::move(y)), sigma2_(sigma2), names_(std::move(column_names)) {
  if (X.rows() < 1 || X.cols() < 1) throw RangeError("dataset needs n >= 1 and p >= 1");
  if (y_.size() != X.rows()) {
    throw RangeError("response length " + std::to_string(y_.size()) + " does not match n = " +
                     std::to_string(X.rows()));
  }
  if (!X.allFinite() || !y_.allFinite()) throw RangeError("dataset contains non-finite values");
  if (sigma2_ && !(*sigma2_ > 0.0)) throw RangeError("noise variance must be positive");
  if (!names_.empty() && static_cast<Index>(names_.size()) != X.cols()) {
    throw RangeError("column_names must have one entry per column");
  }
  X_ = std::make_shared<const Eigen::MatrixXd>(std::move(X));
}

std::string Dataset::column_name(Index j) const {
  if (j >= 0 && j < static_cast<Index>(names_.size())) return names_[static_cast<std::size_t>(j)];
  if (intercept_ && *intercept_ == j) return "(Intercept)";
  return "x" + std::to_string(j);
}

Dataset Dataset::with_response(Eigen::VectorXd y) const {
  if (y.size() != n()) throw RangeError("with_response: response length does not match n");
  Dataset out = *this;
  out.y_ = std::move(y);
  return out;
}

Dataset Dataset::with_sigma2(std::optional<double> sigma2) const {
  if (sigma2 && !(*sigma2 > 0.0)) throw RangeError("noise variance must be positive");
  Dataset out = *this;
  out.sigma2_ = sigma2;
  return out;
}

Dataset Dataset::with_intercept() const {
  if (intercept_) return *this;
  Eigen::MatrixXd Xi(n(), p() + 1);
  Xi.col(0).setOnes();
  Xi.rightCols(p()) = X();
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p() + 1));
  names.emplace_back("(Intercept)");
  for (Index j = 0; j < p(); ++j) names.push_back(column_name(j));
  Dataset out(std::move(Xi), y_, sigma2_, std::move(names));
  out.intercept_ = 0;
  return out;
}

Dataset Dataset::with_normalized_columns() const {
  Eigen::MatrixXd Xn = X();
  for (Index j = 0; j < Xn.cols(); ++j) {
    const double norm = Xn.col(j).norm();
    if (norm == 0.0) throw SingularDesignError("cannot normalize an all-zero column " + column_name(j));
    Xn.col(j) /= norm;
  }
  Dataset out(std::move(Xn), y_, sigma2_, names_);
  out.intercept_ = intercept_;
  return out;
}

bool ActiveSet::contains(Index j) const {
  return std::find(entries.begin(), entries.end(), j) != entries.end();
}

ActiveSet ActiveSet::with(Index j) const {
  ActiveSet out = *this;
  out.entries.push_back(j);
  return out;
}

void ActiveSet::validate(Index p) const {
  std::vector<Index> sorted = entries;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw RangeError("active set has repeated entries");
  }
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= p)) {
    throw RangeError("active set index outside [0, p)");
  }
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = X.col(cols[c]);
  return out;
}

SufficientStat sufficient_stat(const Dataset& data, const ActiveSet& active) {
  active.validate(data.p());
  SufficientStat s;
  s.xty.resize(active.size());
  for (Index c = 0; c < active.size(); ++c) {
    s.xty[c] = data.X().col(active.entries[static_cast<std::size_t>(c)]).dot(data.y());
  }
  if (!data.sigma2()) s.y_norm_sq = data.y().squaredNorm();
  return s;
}

LeastSquaresFit fit_least_squares(const Dataset& data, const ActiveSet& active) {
  active.validate(data.p());
  LeastSquaresFit fit;
  if (active.empty()) {
    fit.rss = data.y().squaredNorm();
    return fit;
  }
  const Eigen::MatrixXd XE = select_columns(data.X(), active.entries);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(XE);
  qr.setThreshold(kDegenerateTolerance);
  if (qr.rank() < XE.cols()) {
    throw SingularDesignError("columns of X_E are linearly dependent (rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(XE.cols()) + ")");
  }
  fit.coefficients = qr.solve(data.y());
  fit.rss = (data.y() - XE * fit.coefficients).squaredNorm();
  return fit;
}

double t_statistic(const Dataset& data, const ActiveSet& active, Index j) {
  active.validate(data.p());
  if (j < 0 || j >= data.p()) throw RangeError("t_statistic: variable index out of range");
  if (active.contains(j)) throw RangeError("t_statistic: variable already active");
  const Index df = data.n() - active.size() - 1;
  if (df <= 0) throw RangeError("t_statistic: needs n > |E| + 1");
  const LeastSquaresFit base = fit_least_squares(data, active);
  const LeastSquaresFit grown = fit_least_squares(data, active.with(j));
  const double coef = grown.coefficients[grown.coefficients.size() - 1];
  const double sign = coef < 0.0 ? -1.0 : 1.0;
  const double scale = std::max(data.y().squaredNorm(), std::numeric_limits<double>::min());
  if (grown.rss <= 1e-28 * scale) {
    if (coef == 0.0) return 0.0;
    return sign * std::numeric_limits<double>::infinity();
  }
  const double drop = std::max(0.0, base.rss - grown.rss);
  return sign * std::sqrt(static_cast<double>(df) * drop / grown.rss);
}

double z_statistic(const Dataset& data, const ActiveSet& active, Index j) {
  if (!data.sigma2()) throw ConfigurationError("z_statistic requires a known noise variance");
  active.validate(data.p());
  if (j < 0 || j >= data.p()) throw RangeError("z_statistic: variable index out of range");
  if (active.contains(j)) throw RangeError("z_statistic: variable already active");
  ActiveBasis basis(data.n(), active.size());
  for (Index e : active.entries) {
    if (!basis.add(data.X().col(e))) throw SingularDesignError("columns of X_E are linearly dependent");
  }
  const Eigen::VectorXd xj = data.X().col(j);
  const Eigen::VectorXd xr = basis.residual(xj);
  const double xr_norm = xr.norm();
  if (xr_norm < kDegenerateTolerance * xj.norm()) {
    throw DegenerateVariableError("variable " + data.column_name(j) + " is collinear with the active set");
  }
  const Eigen::VectorXd r = basis.residual(data.y());
  return xr.dot(r) / (std::sqrt(*data.sigma2()) * xr_norm);
}

ActiveBasis::ActiveBasis(Index n, Index capacity) : Q_(n, std::max<Index>(capacity, 1)) {}

Eigen::VectorXd ActiveBasis::residual(const Eigen::VectorXd& v) const {
  if (rank_ == 0) return v;
  const auto Q = Q_.leftCols(rank_);
  Eigen::VectorXd r = v - Q * (Q.transpose() * v);
  r -= Q * (Q.transpose() * r);
  return r;
}

bool ActiveBasis::add(const Eigen::VectorXd& x) {
  const double scale = x.norm();
  if (scale == 0.0) return false;
  Eigen::VectorXd v = residual(x);
  const double norm = v.norm();
  if (norm < kDegenerateTolerance * scale) return false;
  if (rank_ == Q_.cols()) Q_.conservativeResize(Eigen::NoChange, 2 * Q_.cols());
  Q_.col(rank_) = v / norm;
  ++rank_;
  return true;
}

}  // namespace seqsel
