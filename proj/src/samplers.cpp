#include "seqsel/samplers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "seqsel/distributions.hpp"
#include "seqsel/errors.hpp"

namespace seqsel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Feasibility slack allowed for the starting point of a chain; covers rounding
// in the change of coordinates.
double start_tolerance(const SamplerGeometry& g) {
  const double scale = g.constraint_offset().size() ? g.constraint_offset().cwiseAbs().maxCoeff() : 0.0;
  return 1e-8 * (1.0 + scale);
}

struct Arc {
  double lo, hi;
};

// Chain state: z and the cached A z.
struct ChainState {
  Eigen::VectorXd z;
  Eigen::VectorXd Az;
};

bool gaussian_move(ChainState& s, const SamplerGeometry& g, Rng& rng) {
  const Eigen::MatrixXd& A = g.constraint_matrix();
  const Eigen::VectorXd nu = random_unit_vector(g.dim(), rng);
  double lo = -kInf, hi = kInf;
  Eigen::VectorXd Anu;
  if (A.rows() > 0) {
    Anu = A * nu;
    for (Index i = 0; i < A.rows(); ++i) {
      const double slack = std::max(0.0, s.Az[i] - g.constraint_offset()[i]);
      const double d = Anu[i];
      if (d > 0.0) {
        lo = std::max(lo, -slack / d);
      } else if (d < 0.0) {
        hi = std::min(hi, -slack / d);
      }
    }
    if (lo > hi) return false;
  }
  const double t = truncated_normal(rng, -nu.dot(s.z), g.sigma(), lo, hi);
  s.z += t * nu;
  if (A.rows() > 0) s.Az += t * Anu;
  return true;
}

bool sphere_move(ChainState& s, const SamplerGeometry& g, Rng& rng) {
  const Eigen::MatrixXd& A = g.constraint_matrix();
  const double R = g.radius();
  const Index m = g.dim();
  if (m < 2) return true;  // the "sphere" is two points; nothing to move along
  const Eigen::VectorXd theta = s.z / R;
  Eigen::VectorXd w;
  for (;;) {
    w = standard_normal_vector(m, rng);
    w -= theta * theta.dot(w);
    const double norm = w.norm();
    if (norm > 1e-12) {
      w /= norm;
      break;
    }
  }
  std::vector<Arc> blocked;
  Eigen::VectorXd beta;
  if (A.rows() > 0) {
    beta = A * w;
    for (Index i = 0; i < A.rows(); ++i) {
      // R (alpha cos phi + beta sin phi) >= b_i, i.e. rho cos(phi - delta) >= h.
      const double alpha = s.Az[i] / R;
      const double h = g.constraint_offset()[i] / R;
      const double rho = std::hypot(alpha, beta[i]);
      if (h <= -rho) continue;
      if (h >= rho) return false;
      const double delta = std::atan2(beta[i], alpha);
      const double half = std::numbers::pi - std::acos(h / rho);
      double start = std::fmod(delta + std::numbers::pi - half, kTwoPi);
      if (start < 0.0) start += kTwoPi;
      const double end = start + 2.0 * half;
      if (end > kTwoPi) {
        blocked.push_back({start, kTwoPi});
        blocked.push_back({0.0, end - kTwoPi});
      } else {
        blocked.push_back({start, end});
      }
    }
  }
  std::sort(blocked.begin(), blocked.end(), [](const Arc& a, const Arc& b) { return a.lo < b.lo; });
  std::vector<Arc> open;
  double cursor = 0.0;
  for (const Arc& arc : blocked) {
    if (arc.lo > cursor) open.push_back({cursor, arc.lo});
    cursor = std::max(cursor, arc.hi);
  }
  if (cursor < kTwoPi) open.push_back({cursor, kTwoPi});
  double total = 0.0;
  for (const Arc& arc : open) total += arc.hi - arc.lo;
  if (!(total > 0.0)) return false;
  std::uniform_real_distribution<double> unif(0.0, total);
  double target = unif(rng);
  double phi = open.back().hi;
  for (const Arc& arc : open) {
    const double len = arc.hi - arc.lo;
    if (target <= len) {
      phi = arc.lo + target;
      break;
    }
    target -= len;
  }
  const double c = std::cos(phi), sn = std::sin(phi);
  s.z = R * (c * theta + sn * w);
  if (A.rows() > 0) s.Az = c * s.Az + sn * R * beta;
  return true;
}

bool move(ChainState& s, const SamplerGeometry& g, Rng& rng) {
  return g.law() == NullLaw::kGaussian ? gaussian_move(s, g, rng) : sphere_move(s, g, rng);
}

ChainState start_state(const SamplerGeometry& g, const Eigen::VectorXd& z) {
  ChainState s{z, g.constraint_matrix() * z};
  return s;
}

void refresh(ChainState& s, const SamplerGeometry& g) {
  if (g.law() == NullLaw::kSphere) {
    const double norm = s.z.norm();
    if (norm > 0.0) s.z *= g.radius() / norm;
  }
  s.Az = g.constraint_matrix() * s.z;
}

NullSampleSet collect(const SamplerGeometry& g, const SamplerConfig& config, const Eigen::VectorXd& observed,
                      bool allow_fallback) {
  std::vector<Eigen::VectorXd> draws;
  Rng embed_rng = make_rng(derive_seed(config.seed, 3));
  auto visit = [&](const Eigen::VectorXd& w) { draws.push_back(g.embed(w, embed_rng)); };
  SamplerRun run;
  if (allow_fallback) {
    run = hybrid(g, config, observed, visit, [&] { draws.clear(); });
  } else if (config.method == SamplerMethod::kHitAndRun) {
    run = hit_and_run(g, config, g.coordinates(observed), visit);
  } else {
    run = accept_reject(g, config, visit);
    if (run.accepted < config.min_accepted) {
      throw LowAcceptanceError("accept/reject kept " + std::to_string(run.accepted) + " of " +
                                   std::to_string(run.proposed) + " proposals, fewer than " +
                                   std::to_string(config.min_accepted),
                               run.accepted, run.proposed);
    }
  }
  NullSampleSet out;
  out.method = run.method;
  out.proposed = run.proposed;
  out.acceptance_rate = run.acceptance_rate();
  out.effective_count = draws.size();
  out.samples.resize(g.n(), static_cast<Index>(draws.size()));
  for (std::size_t i = 0; i < draws.size(); ++i) out.samples.col(static_cast<Index>(i)) = draws[i];
  return out;
}

}  // namespace

std::string to_string(SamplerMethod method) {
  return method == SamplerMethod::kHitAndRun ? "hit-and-run" : "accept-reject";
}

void SamplerConfig::validate() const {
  if (budget == 0 || min_accepted == 0 || thin == 0 || chain_length == 0) {
    throw ConfigurationError("sampler budget, min_accepted, thin and chain_length must be positive");
  }
  if (min_accepted > budget) throw ConfigurationError("min_accepted exceeds the proposal budget");
}

SamplerGeometry::SamplerGeometry(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                 const SelectionPolytope& polytope, NullLaw law)
    : law_(law) {
  active.validate(data.p());
  const Index n = data.n(), k = active.size();
  if (suff.xty.size() != k) throw RangeError("sufficient statistic length does not match |E|");
  if (k >= n) throw RangeError("no residual degrees of freedom left to sample");
  if (polytope.rows() > 0 && polytope.gamma.cols() != n) throw RangeError("polytope dimension does not match n");

  y0_ = Eigen::VectorXd::Zero(n);
  if (k > 0) {
    const Eigen::MatrixXd XE = select_columns(data.X(), active.entries);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(XE);
    rank_check.setThreshold(kDegenerateTolerance);
    if (rank_check.rank() < k) throw SingularDesignError("columns of X_E are linearly dependent");
    y0_ = XE * (XE.transpose() * XE).ldlt().solve(suff.xty);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(XE);
    const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    Q_ = full.rightCols(n - k);
  } else {
    Q_ = Eigen::MatrixXd::Identity(n, n);
  }
  const Index m = Q_.cols();

  if (law_ == NullLaw::kGaussian) {
    if (!data.sigma2()) throw ConfigurationError("the Gaussian null law needs a known noise variance");
    sigma_ = std::sqrt(*data.sigma2());
  } else {
    if (!suff.y_norm_sq) throw ConfigurationError("the sphere null law needs ||y||^2 in the sufficient statistic");
    const double r2 = *suff.y_norm_sq - y0_.squaredNorm();
    if (!(r2 > 1e-12 * std::max(*suff.y_norm_sq, std::numeric_limits<double>::min()))) {
      throw InfeasibleError("degenerate sphere: ||y||^2 does not exceed the squared norm of its projection");
    }
    radius_ = std::sqrt(r2);
  }

  if (polytope.rows() > 0) {
    A_ = polytope.gamma * Q_;
    b_ = polytope.u - polytope.gamma * y0_;
  } else {
    A_.resize(0, m);
    b_.resize(0);
  }
  const Eigen::MatrixXd QtX = Q_.transpose() * data.X();
  Eigen::MatrixXd M(m, QtX.cols() + A_.rows());
  M << QtX, A_.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> span(M);
  span.setThreshold(1e-10);
  const Index r = span.rank();
  const Eigen::MatrixXd full = span.householderQ() * Eigen::MatrixXd::Identity(m, m);
  V_ = full.leftCols(r);
  Vc_ = full.rightCols(m - r);
  AV_ = A_ * V_;
  XQV_ = QtX.transpose() * V_;
  xty0_ = data.X().transpose() * y0_;
}

Eigen::VectorXd SamplerGeometry::propose_reduced(Rng& rng) const {
  const Index r = reduced_dim();
  Eigen::VectorXd a = standard_normal_vector(r, rng);
  if (law_ == NullLaw::kGaussian) return sigma_ * a;
  const Index rest = dim() - r;
  double tail = 0.0;
  if (rest > 0) {
    std::gamma_distribution<double> chi2(0.5 * static_cast<double>(rest), 2.0);
    tail = chi2(rng);
  }
  const double norm = std::sqrt(a.squaredNorm() + tail);
  return norm > 0.0 ? Eigen::VectorXd(radius_ * a / norm) : a;
}

bool SamplerGeometry::feasible_reduced(const Eigen::VectorXd& w, double tol) const {
  if (AV_.rows() == 0) return true;
  return (AV_ * w - b_).minCoeff() >= -tol;
}

bool SamplerGeometry::feasible_z(const Eigen::VectorXd& z, double tol) const {
  if (A_.rows() == 0) return true;
  return (A_ * z - b_).minCoeff() >= -tol;
}

Eigen::VectorXd SamplerGeometry::embed(const Eigen::VectorXd& w, Rng& rng) const {
  Eigen::VectorXd z = V_ * w;
  const Index rest = Vc_.cols();
  if (rest > 0) {
    if (law_ == NullLaw::kGaussian) {
      z += Vc_ * (sigma_ * standard_normal_vector(rest, rng));
    } else {
      const double remaining = std::sqrt(std::max(0.0, radius_ * radius_ - w.squaredNorm()));
      z += Vc_ * (remaining * random_unit_vector(rest, rng));
    }
  }
  return y0_ + Q_ * z;
}

Eigen::VectorXd SamplerGeometry::coordinates(const Eigen::VectorXd& y) const {
  if (y.size() != n()) throw RangeError("response length does not match n");
  Eigen::VectorXd z = Q_.transpose() * (y - y0_);
  if (law_ == NullLaw::kSphere) {
    const double norm = z.norm();
    if (norm > 0.0) z *= radius_ / norm;
  }
  return z;
}

SamplerRun accept_reject(const SamplerGeometry& geometry, const SamplerConfig& config, const DrawVisitor& visit) {
  config.validate();
  Rng rng = make_rng(derive_seed(config.seed, 1));
  SamplerRun run;
  run.method = SamplerMethod::kAcceptReject;
  for (std::size_t i = 0; i < config.budget; ++i) {
    const Eigen::VectorXd w = geometry.propose_reduced(rng);
    if (geometry.feasible_reduced(w)) {
      ++run.accepted;
      visit(w);
    }
  }
  run.proposed = config.budget;
  return run;
}

SamplerRun hit_and_run(const SamplerGeometry& geometry, const SamplerConfig& config, const Eigen::VectorXd& z_start,
                       const DrawVisitor& visit) {
  config.validate();
  if (!geometry.feasible_z(z_start, start_tolerance(geometry))) {
    throw InfeasibleError("hit-and-run start point violates the selection constraints (internal inconsistency)");
  }
  Rng rng = make_rng(derive_seed(config.seed, 2));
  ChainState state = start_state(geometry, z_start);
  SamplerRun run;
  run.method = SamplerMethod::kHitAndRun;
  const std::size_t total = config.burn_in + config.chain_length * config.thin;
  for (std::size_t step = 1; step <= total; ++step) {
    if (!move(state, geometry, rng)) ++run.stalled;
    if (step % 256 == 0) refresh(state, geometry);
    if (step > config.burn_in && (step - config.burn_in) % config.thin == 0) {
      ++run.accepted;
      visit(geometry.reduce(state.z));
    }
  }
  run.proposed = total;
  return run;
}

Eigen::VectorXd hit_and_run_move(const Eigen::VectorXd& z, const SamplerGeometry& geometry, Rng& rng, bool* stalled) {
  ChainState state = start_state(geometry, z);
  const bool moved = move(state, geometry, rng);
  if (stalled) *stalled = !moved;
  return state.z;
}

Eigen::VectorXd hit_and_run_step(const Eigen::VectorXd& current, const SamplerGeometry& geometry, Rng& rng) {
  return geometry.embed_z(hit_and_run_move(geometry.coordinates(current), geometry, rng));
}

SamplerRun hybrid(const SamplerGeometry& geometry, const SamplerConfig& config, const Eigen::VectorXd& observed,
                  const DrawVisitor& visit, const std::function<void()>& reset) {
  if (config.method == SamplerMethod::kHitAndRun) {
    return hit_and_run(geometry, config, geometry.coordinates(observed), visit);
  }
  SamplerRun run = accept_reject(geometry, config, visit);
  if (config.method == SamplerMethod::kAcceptReject || run.accepted >= config.min_accepted) return run;
  reset();
  return hit_and_run(geometry, config, geometry.coordinates(observed), visit);
}

NullSampleSet sample_hyperplane_gaussian(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                         const SelectionPolytope& polytope, const SamplerConfig& config) {
  const SamplerGeometry g(data, active, suff, polytope, NullLaw::kGaussian);
  return collect(g, config, data.y(), false);
}

NullSampleSet sample_sphere_uniform(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                    const SelectionPolytope& polytope, const SamplerConfig& config) {
  const SamplerGeometry g(data, active, suff, polytope, NullLaw::kSphere);
  return collect(g, config, data.y(), false);
}

NullSampleSet hybrid_sample(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                            const SelectionPolytope& polytope, const SamplerConfig& config) {
  const SamplerGeometry g(data, active, suff, polytope, suff.y_norm_sq ? NullLaw::kSphere : NullLaw::kGaussian);
  return collect(g, config, data.y(), true);
}

void write_samples_csv(const NullSampleSet& set, std::ostream& out) {
  const Index n = set.samples.rows();
  for (Index i = 0; i < n; ++i) out << (i ? "," : "") << "y" << (i + 1);
  out << '\n';
  out.precision(17);
  for (Index s = 0; s < set.samples.cols(); ++s) {
    for (Index i = 0; i < n; ++i) out << (i ? "," : "") << set.samples(i, s);
    out << '\n';
  }
}

}  // namespace seqsel
