#pragma once
#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace seqsel {

using Index = Eigen::Index;

/// Relative tolerance below which a residualized column counts as collinear
/// with the active set.
inline constexpr double kDegenerateTolerance = 1e-10;

/// Fixed design X (n x p), response y, optionally the known noise variance.
/// The design is shared between copies, so swapping in a new response is
/// cheap.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd X, Eigen::VectorXd y, std::optional<double> sigma2 = std::nullopt,
          std::vector<std::string> column_names = {});

  const Eigen::MatrixXd& X() const { return *X_; }
  const Eigen::VectorXd& y() const { return y_; }
  const std::optional<double>& sigma2() const { return sigma2_; }
  const std::vector<std::string>& column_names() const { return names_; }
  Index n() const { return X_->rows(); }
  Index p() const { return X_->cols(); }
  /// Column holding the all-ones intercept, when one was added.
  std::optional<Index> intercept_column() const { return intercept_; }

  std::string column_name(Index j) const;

  /// Same design and variance, new response.
  Dataset with_response(Eigen::VectorXd y) const;
  Dataset with_sigma2(std::optional<double> sigma2) const;
  /// Prepends an all-ones column (index 0) named "(Intercept)".
  Dataset with_intercept() const;
  /// Rescales every column to unit Euclidean norm.
  Dataset with_normalized_columns() const;

 private:
  std::shared_ptr<const Eigen::MatrixXd> X_;
  Eigen::VectorXd y_;
  std::optional<double> sigma2_;
  std::vector<std::string> names_;
  std::optional<Index> intercept_;
};

/// Ordered active set; entry order is selection order.
struct ActiveSet {
  std::vector<Index> entries;
  bool includes_intercept = false;

  Index size() const { return static_cast<Index>(entries.size()); }
  bool empty() const { return entries.empty(); }
  bool contains(Index j) const;
  ActiveSet with(Index j) const;
  /// Throws RangeError unless entries are distinct and inside [0, p).
  void validate(Index p) const;
};

/// X_E'y and, when the noise variance is unknown, ||y||^2.
struct SufficientStat {
  Eigen::VectorXd xty;
  std::optional<double> y_norm_sq;
};

/// Columns of X listed in `cols`, in that order.
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<Index>& cols);

SufficientStat sufficient_stat(const Dataset& data, const ActiveSet& active);

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;
  double rss = 0.0;
};

/// Least squares of y on X_E via column-pivoted QR. Throws SingularDesignError
/// when X_E is rank deficient.
LeastSquaresFit fit_least_squares(const Dataset& data, const ActiveSet& active);

/// Adjusted t-statistic of j given E, signed by j's fitted coefficient:
/// t^2 = (n-|E|-1)(RSS(E) - RSS(E+j)) / RSS(E+j). Returns +-infinity when
/// RSS(E+j) vanishes.
double t_statistic(const Dataset& data, const ActiveSet& active, Index j);

/// X_j'(y - X_E b) / (sigma ||P_E^perp X_j||). Requires a known variance.
double z_statistic(const Dataset& data, const ActiveSet& active, Index j);

/// Orthonormal basis of span(X_E), grown one column at a time by
/// Gram-Schmidt with reorthogonalization.
class ActiveBasis {
 public:
  explicit ActiveBasis(Index n, Index capacity = 0);

  Index rank() const { return rank_; }
  Eigen::Ref<const Eigen::MatrixXd> basis() const { return Q_.leftCols(rank_); }
  /// P_E^perp v.
  Eigen::VectorXd residual(const Eigen::VectorXd& v) const;
  /// Adds x to the span; returns false (and leaves the basis unchanged) if x
  /// is numerically inside it.
  bool add(const Eigen::VectorXd& x);

 private:
  Eigen::MatrixXd Q_;
  Index rank_ = 0;
};

}  // namespace seqsel
