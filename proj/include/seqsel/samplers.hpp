#pragma once
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "seqsel/core_model.hpp"
#include "seqsel/polytope.hpp"
#include "seqsel/random.hpp"

namespace seqsel {

enum class SamplerMethod { kAcceptReject, kHitAndRun };
std::string to_string(SamplerMethod method);

/// Gaussian on the hyperplane {X_E'y = u} (known variance) or uniform on its
/// intersection with the sphere {||y||^2 = s} (unknown variance).
enum class NullLaw { kGaussian, kSphere };

struct SamplerConfig {
  std::size_t budget = 75000;
  std::size_t min_accepted = 300;
  std::size_t burn_in = 2000;
  std::size_t thin = 5;
  /// Retained hit-and-run draws.
  std::size_t chain_length = 5000;
  std::uint64_t seed = 0;
  /// Force one method; unset means accept/reject with hit-and-run fallback.
  std::optional<SamplerMethod> method;

  void validate() const;
};

/// Parameterizes the conditional law as y = y0 + Q z with Q an orthonormal
/// basis of span(X_E)^perp. Constraints become A z >= b with A = gamma Q.
/// Both the constraints and X'y depend on z only through w = V'z, V spanning
/// the row space of [X'Q; A]; accept/reject proposes w directly.
class SamplerGeometry {
 public:
  SamplerGeometry(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                  const SelectionPolytope& polytope, NullLaw law);

  NullLaw law() const { return law_; }
  Index n() const { return y0_.size(); }
  Index dim() const { return Q_.cols(); }
  Index reduced_dim() const { return V_.cols(); }
  double sigma() const { return sigma_; }
  double radius() const { return radius_; }
  const Eigen::VectorXd& y0() const { return y0_; }
  const Eigen::MatrixXd& basis() const { return Q_; }
  const Eigen::MatrixXd& constraint_matrix() const { return A_; }
  const Eigen::VectorXd& constraint_offset() const { return b_; }

  /// Exact draw of w under the unconstrained law.
  Eigen::VectorXd propose_reduced(Rng& rng) const;
  bool feasible_reduced(const Eigen::VectorXd& w, double tol = 0.0) const;
  bool feasible_z(const Eigen::VectorXd& z, double tol = 0.0) const;
  Eigen::VectorXd reduce(const Eigen::VectorXd& z) const { return V_.transpose() * z; }
  /// X'y for the point with reduced coordinates w.
  Eigen::VectorXd inner_products(const Eigen::VectorXd& w) const { return xty0_ + XQV_ * w; }
  /// w -> X'(y - y0) = X'P_E^perp y, a p x reduced_dim() matrix.
  const Eigen::MatrixXd& residual_inner_products() const { return XQV_; }
  /// Full response: the complement of w is drawn from its conditional law.
  Eigen::VectorXd embed(const Eigen::VectorXd& w, Rng& rng) const;
  Eigen::VectorXd embed_z(const Eigen::VectorXd& z) const { return y0_ + Q_ * z; }
  /// z coordinates of a point on the hyperplane (rescaled onto the sphere).
  Eigen::VectorXd coordinates(const Eigen::VectorXd& y) const;

 private:
  NullLaw law_;
  double sigma_ = 1.0;
  double radius_ = 0.0;
  Eigen::VectorXd y0_;
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd V_;
  Eigen::MatrixXd Vc_;
  Eigen::MatrixXd AV_;
  Eigen::MatrixXd XQV_;
  Eigen::VectorXd xty0_;
};

/// Counts from one sampling run.
struct SamplerRun {
  SamplerMethod method = SamplerMethod::kAcceptReject;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  /// Hit-and-run moves whose feasible set came out empty.
  std::size_t stalled = 0;
  double acceptance_rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

/// Receives the reduced coordinates of each retained draw.
using DrawVisitor = std::function<void(const Eigen::VectorXd& w)>;

/// `budget` proposals; every feasible one is passed to the visitor.
SamplerRun accept_reject(const SamplerGeometry& geometry, const SamplerConfig& config, const DrawVisitor& visit);

/// Chain from z_start: burn_in moves, then chain_length draws every `thin` moves.
SamplerRun hit_and_run(const SamplerGeometry& geometry, const SamplerConfig& config, const Eigen::VectorXd& z_start,
                       const DrawVisitor& visit);

/// One move in z coordinates.
Eigen::VectorXd hit_and_run_move(const Eigen::VectorXd& z, const SamplerGeometry& geometry, Rng& rng,
                                 bool* stalled = nullptr);
/// One move for a full response vector.
Eigen::VectorXd hit_and_run_step(const Eigen::VectorXd& current, const SamplerGeometry& geometry, Rng& rng);

/// Accept/reject, switching to hit-and-run started at `observed` when fewer than
/// min_accepted draws survive; `reset` is called before the switch.
SamplerRun hybrid(const SamplerGeometry& geometry, const SamplerConfig& config, const Eigen::VectorXd& observed,
                  const DrawVisitor& visit, const std::function<void()>& reset);

struct NullSampleSet {
  /// One sample per column (n x N).
  Eigen::MatrixXd samples;
  SamplerMethod method = SamplerMethod::kAcceptReject;
  double acceptance_rate = 0.0;
  std::size_t effective_count = 0;
  std::size_t proposed = 0;

  Index size() const { return samples.cols(); }
};

/// Accept/reject only; throws LowAcceptanceError below min_accepted.
NullSampleSet sample_hyperplane_gaussian(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                         const SelectionPolytope& polytope, const SamplerConfig& config);
NullSampleSet sample_sphere_uniform(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                    const SelectionPolytope& polytope, const SamplerConfig& config);
/// Law chosen from suff: sphere when it carries ||y||^2, Gaussian otherwise.
NullSampleSet hybrid_sample(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                            const SelectionPolytope& polytope, const SamplerConfig& config);

/// Header "y1,...,yn", one sample per row.
void write_samples_csv(const NullSampleSet& set, std::ostream& out);

}  // namespace seqsel
