#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "seqsel/errors.hpp"
#include "seqsel/polytope.hpp"

using namespace seqsel;

namespace {

// Resample y* with X_E'y* = X_E'y, at the observed residual scale.
struct Resampler {
  Eigen::VectorXd fitted;
  Eigen::MatrixXd P;  // projector onto the orthocomplement of span(X_E)
  double scale;

  Resampler(const Dataset& data, const ActiveSet& E) {
    const Index n = data.n();
    P = Eigen::MatrixXd::Identity(n, n);
    if (!E.empty()) {
      const Eigen::MatrixXd XE = select_columns(data.X(), E.entries);
      P -= XE * (XE.transpose() * XE).inverse() * XE.transpose();
    }
    fitted = data.y() - P * data.y();
    scale = (P * data.y()).norm() / std::sqrt(static_cast<double>(n - E.size()));
  }
  Eigen::VectorXd draw(Rng& rng) const { return fitted + P * (scale * standard_normal_vector(fitted.size(), rng)); }
};

bool same_prefix(const std::vector<Index>& a, const std::vector<Index>& b, Index k) {
  return std::equal(a.begin(), a.begin() + k, b.begin());
}

}  // namespace

TEST_CASE("stepwise bounds on the identity design") {
  Dataset data(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(5, 1, -2));
  const ModelPath path = forward_stepwise_path(data, 1);
  const SelectionPolytope poly = fs_constraints(data, path, 1);
  CHECK(poly.inactive == std::vector<Index>{1, 2});
  for (Index c = 0; c < 2; ++c) {
    CHECK(poly.lower[c] == doctest::Approx(-5.0));
    CHECK(poly.upper[c] == doctest::Approx(5.0));
  }
  CHECK(poly.rows() == 4);
  CHECK(poly.contains(data.y()));
  Eigen::Vector3d pushed = data.y();
  pushed[2] = 5.0 + 1e-3;
  CHECK_FALSE(poly.contains(pushed));
  CHECK_THROWS_AS(fs_constraints(data, path, 2), RangeError);
}

TEST_CASE("first-step stepwise rows are +-X_j'y <= max |X_m'y|") {
  const Dataset data = testing::random_dataset(12, 5, 11).with_normalized_columns();
  const ModelPath path = forward_stepwise_path(data, 1);
  const SelectionPolytope poly = fs_constraints(data, path, 1);
  CHECK(poly.rows() == 2 * (5 - 1));
  const double top = (data.X().transpose() * data.y()).cwiseAbs().maxCoeff();
  for (Index r = 0; r < poly.rows(); ++r) CHECK(poly.u[r] == doctest::Approx(-top));
}

TEST_CASE("stepwise polytope membership matches a path rerun") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset data = testing::random_dataset(15, 5, 40 + seed);
    const ModelPath path = forward_stepwise_path(data, 3);
    const SelectionPolytope poly = fs_constraints(data, path, 3);
    CHECK(poly.rows() == 2 * (5 - 3));
    CHECK(poly.contains(data.y()));
    Resampler resampler(data, path.active(3));
    Rng rng = make_rng(seed);
    int agree = 0, inside = 0;
    for (int s = 0; s < 10000; ++s) {
      const Eigen::VectorXd y = resampler.draw(rng);
      const bool in = poly.contains(y);
      const bool rerun = same_prefix(forward_stepwise_path(data.with_response(y), 3).entry_order(), path.entry_order(), 3);
      agree += in == rerun;
      inside += in;
    }
    CHECK(agree == 10000);
    CHECK(inside > 0);
  }
}

TEST_CASE("lasso bounds on the identity design") {
  Dataset data(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(2.9, 2.5));
  const LassoPath lp = lasso_path(data);
  const SelectionPolytope poly = lasso_constraints(data, lp, 1);
  REQUIRE(poly.inactive == std::vector<Index>{1});
  CHECK(poly.lower[0] == doctest::Approx(-2.9));
  CHECK(poly.upper[0] == doctest::Approx(2.9));
  CHECK(poly.contains(data.y()));
  CHECK(lasso_constraints(data, lp, 0).rows() == 0);
}

TEST_CASE("lasso polytope membership matches a path rerun") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset data = testing::random_dataset(15, 5, 80 + seed);
    const LassoPath lp = lasso_path(data, 3);
    const SelectionPolytope poly = lasso_constraints(data, lp, 3);
    CHECK(poly.rows() <= 2 * (5 - 3));
    CHECK(poly.contains(data.y()));
    Resampler resampler(data, lp.path.active(3));
    Rng rng = make_rng(seed);
    int agree = 0, inside = 0;
    for (int s = 0; s < 10000; ++s) {
      const Eigen::VectorXd y = resampler.draw(rng);
      const bool in = poly.contains(y);
      const auto order = lasso_path(data.with_response(y), 3).path.entry_order();
      const bool rerun = order.size() == 3 && same_prefix(order, lp.path.entry_order(), 3);
      agree += in == rerun;
      inside += in;
    }
    CHECK(agree == 10000);
    CHECK(inside > 0);
  }
}

TEST_CASE("sign-conditioned stepwise polytope") {
  Dataset data(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(2.9, 2.5));
  const ModelPath path = forward_stepwise_path(data, 2);
  const SelectionPolytope poly = fs_constraints(data, path, 1, {true});
  CHECK(poly.sign_conditioned);
  CHECK(poly.rows() == 3);
  CHECK(poly.contains(data.y()));
  CHECK_FALSE(poly.contains(Eigen::Vector2d(2.5, 2.9)));
  CHECK_FALSE(poly.contains(Eigen::Vector2d(-2.9, 2.5)));

  const Dataset random = testing::random_dataset(20, 6, 5);
  const ModelPath rp = forward_stepwise_path(random, 3);
  const SelectionPolytope signed_poly = fs_constraints(random, rp, 3, {true});
  CHECK(signed_poly.contains(random.y()));
  CHECK(signed_poly.rows() == (1 + 2 * 5) + (1 + 2 * 4) + (1 + 2 * 3));
}

TEST_CASE("polytope serializes to json") {
  Dataset data(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(5, 1, -2));
  const ModelPath path = forward_stepwise_path(data, 1);
  const auto doc = to_json(fs_constraints(data, path, 1));
  CHECK(doc["gamma"].size() == 4);
  CHECK(doc["lower"][0].get<double>() == doctest::Approx(-5.0));
  CHECK(doc["active"][0].get<int>() == 0);
}
