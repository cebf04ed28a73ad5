#include "seqsel/paths.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "seqsel/errors.hpp"

namespace seqsel {
namespace {

constexpr double kTieTolerance = 1e-12;
// Events closer than this (relatively) to the current lambda are the event
// just processed, seen again through rounding.
constexpr double kEventTolerance = 1e-10;

struct Best {
  Index index = -1;
  double value = -std::numeric_limits<double>::infinity();
  double runner_up = -std::numeric_limits<double>::infinity();

  void offer(Index j, double v) {
    if (v > value) {
      runner_up = value;
      value = v;
      index = j;
    } else if (v > runner_up) {
      runner_up = v;
    }
  }
  bool tied() const {
    return index >= 0 && std::isfinite(runner_up) && runner_up >= value - kTieTolerance * std::fabs(value);
  }
};

struct Homotopy {
  std::vector<LassoKnot> knots;
  // First entries into the ever-active set: (variable, lambda).
  std::vector<std::pair<Index, double>> entries;
};

Eigen::MatrixXd gram_block(const Eigen::MatrixXd& G, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = G(rows[r], cols[c]);
  return out;
}

// LARS with the lasso modification on the Gram matrix G = X'X and c = X'y.
// On the current segment beta_A(lambda) = a - lambda b; an inactive j has
// correlation alpha_j + lambda gamma_j and joins where that reaches +-lambda.
Homotopy run_homotopy(const Eigen::MatrixXd& G, const Eigen::VectorXd& c, Index max_entries, double floor) {
  const Index p = c.size();
  Homotopy out;
  if (p == 0) return out;
  Best first;
  for (Index j = 0; j < p; ++j) first.offer(j, std::fabs(c[j]));
  if (first.value <= 0.0) return out;
  if (first.tied()) throw TieError("two variables attain the largest |X_j'y|; the lasso path is not unique");

  double lambda = first.value;
  std::vector<Index> active{first.index};
  std::vector<double> signs{c[first.index] > 0 ? 1.0 : -1.0};
  std::vector<char> ever(static_cast<std::size_t>(p), 0);
  ever[static_cast<std::size_t>(first.index)] = 1;
  out.entries.emplace_back(first.index, lambda);
  out.knots.push_back({lambda, active, Eigen::VectorXd::Zero(p)});

  const Index max_iterations = 20 * p + 100;
  for (Index iter = 0; iter < max_iterations; ++iter) {
    if (max_entries >= 0 && static_cast<Index>(out.entries.size()) >= max_entries) return out;
    const Index m = static_cast<Index>(active.size());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m), b = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd GjA;
    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
    if (m > 0) {
      const Eigen::MatrixXd GAA = gram_block(G, active, active);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(GAA, Eigen::EigenvaluesOnly);
      const double hi = eig.eigenvalues().maxCoeff();
      if (!(eig.eigenvalues().minCoeff() > 1e-12 * hi)) {
        throw NonUniqueSolutionError(
            "active Gram block is singular; the lasso solution is not unique (requires X_A of full column rank)");
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(GAA);
      Eigen::VectorXd cA(m), s(m);
      for (Index i = 0; i < m; ++i) {
        cA[i] = c[active[static_cast<std::size_t>(i)]];
        s[i] = signs[static_cast<std::size_t>(i)];
      }
      a = ldlt.solve(cA);
      b = ldlt.solve(s);
      GjA = gram_block(G, all, active);
    }
    const double ceiling = lambda * (1.0 - kEventTolerance);
    Best next;
    Index next_sign = 0;
    bool next_is_join = false;
    auto consider = [&](Index j, double at, bool join, int sgn) {
      if (at > next.value) {
        next_is_join = join;
        next_sign = sgn;
      }
      next.offer(j, at);
    };
    auto admissible = [&](double at) { return at > floor && at < ceiling; };
    for (Index j = 0; j < p; ++j) {
      if (std::find(active.begin(), active.end(), j) != active.end()) continue;
      const double alpha = m > 0 ? c[j] - GjA.row(j).dot(a) : c[j];
      const double gamma = m > 0 ? GjA.row(j).dot(b) : 0.0;
      // Only the first crossing of +-lambda matters for j.
      double at = -std::numeric_limits<double>::infinity();
      int sign = 0;
      for (int sgn : {1, -1}) {
        const double denom = sgn - gamma;
        if (denom == 0.0) continue;
        const double root = alpha / denom;
        if (admissible(root) && root > at) {
          at = root;
          sign = sgn;
        }
      }
      if (sign != 0) consider(j, at, true, sign);
    }
    for (Index i = 0; i < m; ++i) {
      if (b[i] == 0.0) continue;
      const double root = a[i] / b[i];
      if (admissible(root)) consider(active[static_cast<std::size_t>(i)], root, false, 0);
    }

    if (next.index < 0) {
      if (floor > 0.0) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        for (Index i = 0; i < m; ++i) beta[active[static_cast<std::size_t>(i)]] = a[i] - floor * b[i];
        out.knots.push_back({floor, active, beta});
      }
      return out;
    }
    if (next.tied()) throw TieError("two lasso path events occur at the same lambda");

    lambda = next.value;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (Index i = 0; i < m; ++i) beta[active[static_cast<std::size_t>(i)]] = a[i] - lambda * b[i];
    if (next_is_join) {
      active.push_back(next.index);
      signs.push_back(static_cast<double>(next_sign));
      if (!ever[static_cast<std::size_t>(next.index)]) {
        ever[static_cast<std::size_t>(next.index)] = 1;
        out.entries.emplace_back(next.index, lambda);
      }
    } else {
      const auto pos = std::find(active.begin(), active.end(), next.index) - active.begin();
      active.erase(active.begin() + pos);
      signs.erase(signs.begin() + pos);
      beta[next.index] = 0.0;
    }
    out.knots.push_back({lambda, active, beta});
  }
  throw NonUniqueSolutionError("lasso homotopy did not terminate; the path is degenerate");
}

double rss_scale(const Eigen::VectorXd& y) {
  return std::max(y.squaredNorm(), std::numeric_limits<double>::min());
}

}  // namespace

std::string to_string(PathAlgorithm algorithm) {
  return algorithm == PathAlgorithm::kLasso ? "lasso" : "forward-stepwise";
}

PathAlgorithm parse_algorithm(const std::string& name) {
  if (name == "fs" || name == "forward-stepwise" || name == "stepwise") return PathAlgorithm::kForwardStepwise;
  if (name == "lasso") return PathAlgorithm::kLasso;
  throw ConfigurationError("unknown path algorithm '" + name + "'");
}

const ActiveSet& ModelPath::active(Index k) const {
  if (k < 0 || k > d()) throw RangeError("step " + std::to_string(k) + " outside [0, " + std::to_string(d()) + "]");
  return k == 0 ? initial : steps[static_cast<std::size_t>(k - 1)].active_after;
}

const PathStep& ModelPath::step(Index k) const {
  if (k < 1 || k > d()) throw RangeError("step " + std::to_string(k) + " outside [1, " + std::to_string(d()) + "]");
  return steps[static_cast<std::size_t>(k - 1)];
}

std::vector<Index> ModelPath::entry_order() const {
  std::vector<Index> order;
  order.reserve(steps.size());
  for (const auto& s : steps) order.push_back(s.entered);
  return order;
}

ActiveSet default_initial_set(const Dataset& data) {
  ActiveSet e;
  if (data.intercept_column()) {
    e.entries.push_back(*data.intercept_column());
    e.includes_intercept = true;
  }
  return e;
}

ModelPath forward_stepwise_path(const Dataset& data, Index d, const ForwardStepwiseOptions& options) {
  const ActiveSet initial = options.initial.value_or(default_initial_set(data));
  initial.validate(data.p());
  const Index n = data.n(), p = data.p();
  const Index limit = std::min(n - initial.size(), p - initial.size());
  if (d < 0 || d > limit) {
    throw RangeError("forward stepwise: d = " + std::to_string(d) + " exceeds min(n - |E0|, p - |E0|) = " +
                     std::to_string(limit));
  }
  const Eigen::MatrixXd& X = data.X();
  ModelPath path;
  path.algorithm = PathAlgorithm::kForwardStepwise;
  path.initial = initial;
  path.requested = d;

  ActiveBasis basis(n, initial.size() + d);
  for (Index e : initial.entries) {
    if (!basis.add(X.col(e))) throw SingularDesignError("initial active set is rank deficient");
  }
  // Columns of X residualized against the current basis.
  Eigen::MatrixXd R(n, p);
  for (Index j = 0; j < p; ++j) R.col(j) = basis.residual(X.col(j));
  Eigen::VectorXd r = basis.residual(data.y());
  const Eigen::VectorXd col_norms = X.colwise().norm();
  const double scale = rss_scale(data.y());

  ActiveSet E = initial;
  for (Index k = 1; k <= d; ++k) {
    Best best;
    double best_score = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (E.contains(j)) continue;
      const double nr = R.col(j).norm();
      if (nr <= kDegenerateTolerance * col_norms[j]) continue;
      const double score = std::fabs(R.col(j).dot(r)) / nr;
      switch (options.criterion) {
        case FsCriterion::kResidualScore:
          best.offer(j, score);
          break;
        case FsCriterion::kMinRss:
          best.offer(j, -fit_least_squares(data, E.with(j)).rss);
          break;
        case FsCriterion::kMaxAbsT:
          best.offer(j, std::fabs(t_statistic(data, E, j)));
          break;
      }
      if (best.index == j) best_score = score;
    }
    if (best.index < 0) break;
    if (best.tied()) {
      throw TieError("forward stepwise: two candidates tie at step " + std::to_string(k));
    }
    const Index j = best.index;
    const double rss_before = r.squaredNorm();
    if (!basis.add(X.col(j))) break;
    const Eigen::VectorXd q = basis.basis().col(basis.rank() - 1);
    R.noalias() -= q * (q.transpose() * R);
    r -= q * q.dot(r);
    const double rss_after = r.squaredNorm();
    const Index df = n - E.size() - 1;
    double statistic;
    if (rss_after <= 1e-28 * scale || df <= 0) {
      statistic = std::numeric_limits<double>::infinity();
    } else {
      statistic = std::sqrt(static_cast<double>(df) * std::max(0.0, rss_before - rss_after) / rss_after);
    }
    E = E.with(j);
    PathStep step;
    step.k = k;
    step.entered = j;
    step.active_after = E;
    step.statistic = statistic;
    step.score = best_score;
    step.suff_stat = sufficient_stat(data, E);
    path.steps.push_back(std::move(step));
  }
  return path;
}

Eigen::VectorXd lasso_solution_at(const LassoKnots& knots, double lambda, Index p) {
  const auto& ks = knots.knots;
  if (ks.empty() || lambda >= ks.front().lambda) return Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    const double hi = ks[i].lambda, lo = ks[i + 1].lambda;
    if (lambda <= hi && lambda >= lo) {
      const double w = (lambda - lo) / (hi - lo);
      return w * ks[i].beta + (1.0 - w) * ks[i + 1].beta;
    }
  }
  if (lambda == ks.back().lambda) return ks.back().beta;
  throw RangeError("lambda below the computed part of the lasso path");
}

LassoPath lasso_path(const Dataset& data, Index max_steps, const std::optional<std::vector<double>>& grid) {
  if (data.intercept_column()) {
    throw UnsupportedError("the lasso path is defined without an intercept column; center the data instead");
  }
  const Eigen::MatrixXd& X = data.X();
  const Index p = data.p();
  const Eigen::MatrixXd G = X.transpose() * X;
  const Eigen::VectorXd c = X.transpose() * data.y();

  LassoPath out;
  ModelPath& path = out.path;
  path.algorithm = PathAlgorithm::kLasso;

  auto add_step = [&](Index j, double lambda, const ActiveSet& before) {
    PathStep step;
    step.k = path.d() + 1;
    step.entered = j;
    step.active_after = before.with(j);
    step.statistic = lambda;
    step.suff_stat = sufficient_stat(data, step.active_after);
    path.steps.push_back(std::move(step));
  };

  if (!grid) {
    const Homotopy h = run_homotopy(G, c, max_steps, 0.0);
    out.knots.knots = h.knots;
    out.knots.exact = true;
    for (const auto& [j, lambda] : h.entries) add_step(j, lambda, path.active(path.d()));
    path.requested = max_steps >= 0 ? max_steps : path.d();
    return out;
  }

  const std::vector<double>& lambdas = *grid;
  if (lambdas.empty()) throw RangeError("lasso grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!std::isfinite(lambdas[i]) || !(lambdas[i] > 0.0)) throw RangeError("lasso grid values must be finite and positive");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) throw RangeError("lasso grid must be strictly decreasing");
  }
  LassoKnots exact;
  exact.knots = run_homotopy(G, c, -1, lambdas.back()).knots;
  out.knots.exact = false;

  std::vector<char> ever(static_cast<std::size_t>(p), 0);
  for (std::size_t g = 0; g < lambdas.size(); ++g) {
    const Eigen::VectorXd beta = lasso_solution_at(exact, lambdas[g], p);
    LassoKnot knot{lambdas[g], {}, beta};
    std::vector<Index> fresh;
    for (Index j = 0; j < p; ++j) {
      if (beta[j] == 0.0) continue;
      knot.active.push_back(j);
      if (!ever[static_cast<std::size_t>(j)]) {
        ever[static_cast<std::size_t>(j)] = 1;
        fresh.push_back(j);
      }
    }
    if (g == 0) {
      path.initial.entries = fresh;
    } else if (fresh.size() > 1) {
      throw TieError("several variables enter between consecutive grid values; refine the grid");
    } else if (fresh.size() == 1) {
      if (max_steps >= 0 && path.d() >= max_steps) break;
      add_step(fresh.front(), lambdas[g], path.active(path.d()));
    }
    out.knots.knots.push_back(std::move(knot));
  }
  path.requested = max_steps >= 0 ? max_steps : path.d();
  return out;
}

std::vector<Index> reconstruct_subpath(const Dataset& data, const ActiveSet& active, const SufficientStat& suff,
                                       PathAlgorithm algorithm) {
  try {
    active.validate(data.p());
  } catch (const RangeError& e) {
    throw ReconstructionError(e.what());
  }
  const Index m = active.size();
  if (suff.xty.size() != m) throw ReconstructionError("sufficient statistic length does not match |E|");
  if (m == 0) return {};
  const Eigen::MatrixXd XE = select_columns(data.X(), active.entries);
  const Eigen::MatrixXd G = XE.transpose() * XE;
  const Eigen::VectorXd& u = suff.xty;

  Eigen::LDLT<Eigen::MatrixXd> full(G);
  if (full.info() != Eigen::Success || !(full.vectorD().minCoeff() > 1e-12 * full.vectorD().maxCoeff())) {
    throw ReconstructionError("X_E is rank deficient");
  }
  if (suff.y_norm_sq) {
    const double proj = u.dot(full.solve(u));
    if (*suff.y_norm_sq < proj * (1.0 - 1e-10)) {
      throw ReconstructionError("||y||^2 is smaller than the norm of its projection onto span(X_E)");
    }
  }

  std::vector<Index> order;
  if (algorithm == PathAlgorithm::kLasso) {
    Homotopy h;
    try {
      h = run_homotopy(G, u, m, 0.0);
    } catch (const Error& e) {
      throw ReconstructionError(std::string("restricted lasso path failed: ") + e.what());
    }
    if (static_cast<Index>(h.entries.size()) != m) {
      throw ReconstructionError("restricted lasso path does not activate every variable of E");
    }
    for (const auto& [local, lambda] : h.entries) order.push_back(active.entries[static_cast<std::size_t>(local)]);
    return order;
  }

  std::vector<Index> chosen;
  if (active.includes_intercept) {
    const auto ic = data.intercept_column();
    const auto it = ic ? std::find(active.entries.begin(), active.entries.end(), *ic) : active.entries.end();
    if (it == active.entries.end()) throw ReconstructionError("intercept flagged but not in the active set");
    chosen.push_back(it - active.entries.begin());
  }
  while (static_cast<Index>(chosen.size()) < m) {
    const Index c = static_cast<Index>(chosen.size());
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    Eigen::VectorXd uC(c);
    if (c > 0) {
      ldlt.compute(gram_block(G, chosen, chosen));
      for (Index i = 0; i < c; ++i) uC[i] = u[chosen[static_cast<std::size_t>(i)]];
    }
    Best best;
    for (Index local = 0; local < m; ++local) {
      if (std::find(chosen.begin(), chosen.end(), local) != chosen.end()) continue;
      double num = u[local], den = G(local, local);
      if (c > 0) {
        const Eigen::MatrixXd GCm = gram_block(G, chosen, {local});
        const Eigen::VectorXd w = ldlt.solve(GCm.col(0));
        num -= w.dot(uC);
        den -= GCm.col(0).dot(w);
      }
      if (!(den > kDegenerateTolerance * kDegenerateTolerance * G(local, local))) continue;
      best.offer(local, num * num / den);
    }
    if (best.index < 0) throw ReconstructionError("no admissible variable left while reconstructing");
    if (best.tied()) throw ReconstructionError("tie while reconstructing the stepwise order");
    chosen.push_back(best.index);
    order.push_back(active.entries[static_cast<std::size_t>(best.index)]);
  }
  return order;
}

}  // namespace seqsel
