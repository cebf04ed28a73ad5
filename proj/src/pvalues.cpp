#include "seqsel/pvalues.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "seqsel/distributions.hpp"
#include "seqsel/errors.hpp"
#include "seqsel/parallel.hpp"
#include "seqsel/polytope.hpp"
#include "seqsel/stats.hpp"

namespace seqsel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Conditioning data for the step-k test: event and statistics of step k-1.
struct StepContext {
  ActiveSet E;
  SufficientStat suff;
  SelectionPolytope polytope;
};

StepContext step_context(const Dataset& data, const ModelPath& path, const LassoKnots* knots, Index k, NullLaw law) {
  if (k < 1 || k > path.d()) throw RangeError("step " + std::to_string(k) + " outside [1, " + std::to_string(path.d()) + "]");
  StepContext ctx;
  ctx.E = path.active(k - 1);
  ctx.suff.xty = k == 1 ? sufficient_stat(data, ctx.E).xty : path.step(k - 1).suff_stat.xty;
  if (law == NullLaw::kSphere) ctx.suff.y_norm_sq = data.y().squaredNorm();
  ctx.polytope = selection_constraints(data, path, knots, k - 1);
  return ctx;
}

// Candidates j outside E with their residual norms ||P_E^perp X_j||.
struct Candidates {
  std::vector<Index> index;
  Eigen::VectorXd norm;
  Eigen::VectorXd observed;  // X_j'P_E^perp y
};

Candidates candidates(const Dataset& data, const ActiveSet& E) {
  ActiveBasis basis(data.n(), E.size());
  for (Index e : E.entries) basis.add(data.X().col(e));
  const Eigen::VectorXd r = basis.residual(data.y());
  Candidates c;
  std::vector<double> norms, observed;
  for (Index j = 0; j < data.p(); ++j) {
    if (E.contains(j)) continue;
    const Eigen::VectorXd xr = basis.residual(data.X().col(j));
    const double nr = xr.norm();
    if (nr <= kDegenerateTolerance * data.X().col(j).norm()) continue;
    c.index.push_back(j);
    norms.push_back(nr);
    observed.push_back(xr.dot(r));
  }
  if (c.index.empty()) throw DegenerateVariableError("no non-degenerate candidate variable left");
  c.norm = Eigen::Map<Eigen::VectorXd>(norms.data(), static_cast<Index>(norms.size()));
  c.observed = Eigen::Map<Eigen::VectorXd>(observed.data(), static_cast<Index>(observed.size()));
  return c;
}

// Rows of the reduced inner-product map for the candidates, divided by their norms.
Eigen::MatrixXd standardized_map(const SamplerGeometry& g, const Candidates& c) {
  Eigen::MatrixXd S(static_cast<Index>(c.index.size()), g.reduced_dim());
  for (std::size_t i = 0; i < c.index.size(); ++i) {
    S.row(static_cast<Index>(i)) = g.residual_inner_products().row(c.index[i]) / c.norm[static_cast<Index>(i)];
  }
  return S;
}

struct Tally {
  std::vector<double> indicator;
  SamplerRun run;
};

PValueResult finish(const Tally& t, double statistic, double numerator_extra = 1.0) {
  const std::size_t N = t.indicator.size();
  if (N == 0) {
    throw InsufficientSamplesError("no null draws survived; raise the budget or use hit-and-run");
  }
  double count = 0.0;
  for (double v : t.indicator) count += v;
  PValueResult out;
  out.p = std::min(1.0, (numerator_extra + count) / (1.0 + static_cast<double>(N)));
  const double phat = count / static_cast<double>(N);
  if (t.run.method == SamplerMethod::kHitAndRun && N >= 40) {
    out.std_error = batch_means_se(t.indicator, 20);
  } else {
    out.std_error = binomial_se(phat, N);
  }
  out.statistic = statistic;
  out.sampler = t.run.method;
  out.samples = N;
  out.acceptance_rate = t.run.acceptance_rate();
  return out;
}

// Runs the sampler and records 1{draw is at least as extreme} per retained draw.
template <class Extreme>
Tally tally(const SamplerGeometry& g, const SamplerConfig& config, const Eigen::VectorXd& observed, Extreme extreme) {
  Tally t;
  t.run = hybrid(
      g, config, observed,
      [&](const Eigen::VectorXd& w) {
        const int e = extreme(w);
        if (e >= 0) t.indicator.push_back(static_cast<double>(e));
      },
      [&] { t.indicator.clear(); });
  return t;
}

PValueResult max_z_impl(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                        const LassoKnots* knots, bool identify) {
  if (!data.sigma2()) throw ConfigurationError("max-z needs a known noise variance");
  const StepContext ctx = step_context(data, path, knots, k, NullLaw::kGaussian);
  const SamplerGeometry g(data, ctx.E, ctx.suff, ctx.polytope, NullLaw::kGaussian);
  const Candidates c = candidates(data, ctx.E);
  const Eigen::MatrixXd S = standardized_map(g, c);
  const double sigma = std::sqrt(*data.sigma2());
  const Eigen::VectorXd z_obs = c.observed.cwiseQuotient(c.norm).cwiseAbs() / sigma;
  const double observed = z_obs.maxCoeff();
  Index entrant = -1;
  if (identify) {
    const auto it = std::find(c.index.begin(), c.index.end(), path.step(k).entered);
    if (it == c.index.end()) throw DegenerateVariableError("entrant is degenerate for its active set");
    entrant = it - c.index.begin();
  }
  const Tally t = tally(g, config, data.y(), [&](const Eigen::VectorXd& w) {
    Index arg = 0;
    const double stat = (S * w).cwiseAbs().maxCoeff(&arg) / sigma;
    if (identify && arg != entrant) return -1;
    return stat >= observed ? 1 : 0;
  });
  if (identify && t.indicator.empty()) {
    throw InsufficientSamplesError("no null draw selects the observed entrant");
  }
  return finish(t, observed);
}

const LassoKnots& require_knots(const ModelPath& path, const LassoKnots* knots) {
  if (path.algorithm != PathAlgorithm::kLasso) throw ConfigurationError("next-entry needs a lasso path");
  if (!knots) throw ConfigurationError("next-entry needs the lasso knots");
  return *knots;
}

// Inner products X_j'X theta^lambda at the knots that decide whether a new
// variable enters between lambda_{k-1} and lambda_k.
struct EntryWindow {
  std::vector<double> lambdas;
  std::vector<Eigen::VectorXd> fitted;  // indexed like `inactive`
  std::vector<Index> inactive;
  double lambda_k = 0.0;
  bool exact = true;
};

EntryWindow entry_window(const Dataset& data, const ModelPath& path, const LassoKnots& knots, Index k) {
  if (k < 1 || k > path.d()) throw RangeError("step " + std::to_string(k) + " outside [1, " + std::to_string(path.d()) + "]");
  EntryWindow win;
  win.exact = knots.exact;
  win.lambda_k = path.step(k).statistic;
  double upper = kInf;
  if (k > 1) {
    upper = path.step(k - 1).statistic;
  } else if (!knots.exact && !knots.knots.empty()) {
    upper = knots.knots.front().lambda;
  }
  const ActiveSet& E = path.active(k - 1);
  for (Index j = 0; j < data.p(); ++j)
    if (!E.contains(j)) win.inactive.push_back(j);
  for (const LassoKnot& knot : knots.knots) {
    if (knot.lambda < win.lambda_k) continue;
    if (knot.lambda > upper || (!knots.exact && knot.lambda >= upper)) continue;
    const Eigen::VectorXd fit = data.X() * knot.beta;
    Eigen::VectorXd f(static_cast<Index>(win.inactive.size()));
    for (std::size_t i = 0; i < win.inactive.size(); ++i) f[static_cast<Index>(i)] = data.X().col(win.inactive[i]).dot(fit);
    win.lambdas.push_back(knot.lambda);
    win.fitted.push_back(std::move(f));
  }
  return win;
}

// xty holds X_j'y* for the inactive variables, in window order.
EntryComparison classify(const EntryWindow& win, const Eigen::VectorXd& xty) {
  bool at_k = false;
  for (std::size_t i = 0; i < win.lambdas.size(); ++i) {
    const double worst = (xty - win.fitted[i]).cwiseAbs().maxCoeff();
    if (worst > win.lambdas[i]) {
      if (win.exact || win.lambdas[i] > win.lambda_k) return EntryComparison::kAbove;
      at_k = true;
    }
  }
  return at_k ? EntryComparison::kEqual : EntryComparison::kBelow;
}

PValueResult next_entry_impl(const Dataset& data, const ModelPath& path, const LassoKnots& knots, Index k,
                             const SamplerConfig& config, bool randomize) {
  const NullLaw law = data.sigma2() ? NullLaw::kGaussian : NullLaw::kSphere;
  const StepContext ctx = step_context(data, path, &knots, k, law);
  const SamplerGeometry g(data, ctx.E, ctx.suff, ctx.polytope, law);
  const EntryWindow win = entry_window(data, path, knots, k);
  Eigen::MatrixXd map(static_cast<Index>(win.inactive.size()), g.reduced_dim());
  Eigen::VectorXd base(static_cast<Index>(win.inactive.size()));
  const Eigen::VectorXd xty0 = data.X().transpose() * g.y0();
  for (std::size_t i = 0; i < win.inactive.size(); ++i) {
    map.row(static_cast<Index>(i)) = g.residual_inner_products().row(win.inactive[i]);
    base[static_cast<Index>(i)] = xty0[win.inactive[i]];
  }
  std::size_t equal = 0;
  const Tally t = tally(g, config, data.y(), [&](const Eigen::VectorXd& w) {
    const EntryComparison cmp = classify(win, base + map * w);
    equal += cmp == EntryComparison::kEqual;
    return cmp == EntryComparison::kBelow ? 0 : 1;
  });
  PValueResult out = finish(t, win.lambda_k);
  if (randomize && !win.exact) {
    // Ties (draws entering at the same grid value, plus the observed point)
    // are split uniformly.
    double above = 0.0;
    for (double v : t.indicator) above += v;
    above -= static_cast<double>(equal);
    Rng rng = make_rng(derive_seed(config.seed, 4));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    out.p = (above + unif(rng) * (1.0 + static_cast<double>(equal))) / (1.0 + static_cast<double>(t.indicator.size()));
  }
  return out;
}

}  // namespace

std::string to_string(PValueMethod method) {
  switch (method) {
    case PValueMethod::kMaxT: return "max-t";
    case PValueMethod::kMaxZ: return "max-z";
    case PValueMethod::kMaxZIdentify: return "max-z-identify";
    case PValueMethod::kNextEntry: return "next-entry";
    case PValueMethod::kSaturated: return "saturated";
    case PValueMethod::kNominal: return "nominal";
  }
  return "unknown";
}

PValueMethod parse_pvalue_method(const std::string& name) {
  for (PValueMethod m : {PValueMethod::kMaxT, PValueMethod::kMaxZ, PValueMethod::kMaxZIdentify,
                         PValueMethod::kNextEntry, PValueMethod::kSaturated, PValueMethod::kNominal}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigurationError("unknown p-value method '" + name + "'");
}

bool is_closed_form(PValueMethod method) {
  return method == PValueMethod::kSaturated || method == PValueMethod::kNominal;
}

double tail_pvalue(const std::vector<double>& null_stats, double observed) {
  const auto count = std::count_if(null_stats.begin(), null_stats.end(), [&](double v) { return v >= observed; });
  return (1.0 + static_cast<double>(count)) / (1.0 + static_cast<double>(null_stats.size()));
}

PValueResult max_t_pvalue(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                          const LassoKnots* knots) {
  const StepContext ctx = step_context(data, path, knots, k, NullLaw::kSphere);
  const SamplerGeometry g(data, ctx.E, ctx.suff, ctx.polytope, NullLaw::kSphere);
  const Candidates c = candidates(data, ctx.E);
  const Eigen::MatrixXd S = standardized_map(g, c);
  // With X_E'y and ||y||^2 fixed, |t*| is increasing in a = max_j (X_j'P^perp y)^2 / ||P^perp X_j||^2.
  const double a_obs = c.observed.cwiseQuotient(c.norm).cwiseAbs2().maxCoeff();
  const double rss = g.radius() * g.radius();
  const double df = static_cast<double>(data.n() - ctx.E.size() - 1);
  const double statistic = (df > 0.0 && rss > a_obs) ? std::sqrt(df * a_obs / (rss - a_obs)) : kInf;
  const Tally t = tally(g, config, data.y(), [&](const Eigen::VectorXd& w) {
    return (S * w).cwiseAbs2().maxCoeff() >= a_obs ? 1 : 0;
  });
  return finish(t, statistic);
}

PValueResult max_z_pvalue(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                          const LassoKnots* knots) {
  return max_z_impl(data, path, k, config, knots, false);
}

PValueResult max_z_identify_pvalue(const Dataset& data, const ModelPath& path, Index k, const SamplerConfig& config,
                                   const LassoKnots* knots) {
  return max_z_impl(data, path, k, config, knots, true);
}

PValueResult next_entry_pvalue(const Dataset& data, const LassoPath& lasso, Index k, const SamplerConfig& config,
                               bool randomize) {
  return next_entry_impl(data, lasso.path, require_knots(lasso.path, &lasso.knots), k, config, randomize);
}

std::vector<EntryComparison> next_entry_comparisons(const Dataset& data, const LassoPath& lasso, Index k,
                                                    const Eigen::MatrixXd& samples) {
  const EntryWindow win = entry_window(data, lasso.path, require_knots(lasso.path, &lasso.knots), k);
  if (samples.rows() != data.n()) throw RangeError("samples must have n rows");
  const Eigen::MatrixXd XI = select_columns(data.X(), win.inactive);
  std::vector<EntryComparison> out;
  out.reserve(static_cast<std::size_t>(samples.cols()));
  for (Index s = 0; s < samples.cols(); ++s) out.push_back(classify(win, XI.transpose() * samples.col(s)));
  return out;
}

TruncationInterval saturated_interval(const Dataset& data, const ModelPath& path, Index k, double sigma2) {
  if (path.algorithm != PathAlgorithm::kForwardStepwise) {
    throw UnsupportedError("the saturated test is implemented for stepwise paths only");
  }
  if (!(sigma2 > 0.0)) throw RangeError("noise variance must be positive");
  if (k < 1 || k > path.d()) throw RangeError("step " + std::to_string(k) + " outside [1, " + std::to_string(path.d()) + "]");
  const ActiveSet& E = path.active(k - 1);
  ActiveBasis basis(data.n(), E.size());
  for (Index e : E.entries) basis.add(data.X().col(e));
  const Eigen::VectorXd r = basis.residual(data.X().col(path.step(k).entered));
  const double r2 = r.squaredNorm();
  // eta'y is the entrant's least squares coefficient in E_k.
  const Eigen::VectorXd eta = r / r2;
  const double eta2 = 1.0 / r2;
  const double observed = eta.dot(data.y());
  const Eigen::VectorXd z = data.y() - eta * (observed / eta2);
  const Eigen::VectorXd direction = eta / eta2;

  const SelectionPolytope poly = fs_constraints(data, path, k, {true});
  const Eigen::VectorXd coef = poly.gamma * direction;
  const Eigen::VectorXd rhs = poly.u - poly.gamma * z;
  TruncationInterval out;
  out.lower = -kInf;
  out.upper = kInf;
  out.observed = observed;
  out.scale = std::sqrt(sigma2 * eta2);
  for (Index i = 0; i < coef.size(); ++i) {
    const double tiny = 1e-13 * poly.gamma.row(i).norm() * direction.norm();
    if (coef[i] > tiny) {
      out.lower = std::max(out.lower, rhs[i] / coef[i]);
    } else if (coef[i] < -tiny) {
      out.upper = std::min(out.upper, rhs[i] / coef[i]);
    } else if (rhs[i] > 1e-9 * (1.0 + std::fabs(poly.u[i]))) {
      throw InfeasibleError("saturated test: a constraint excludes the whole line");
    }
  }
  if (out.lower > out.upper) throw InfeasibleError("saturated test: empty truncation interval");
  return out;
}

double truncated_two_sided(const TruncationInterval& iv) {
  const double a = iv.lower / iv.scale, b = iv.upper / iv.scale, x = std::fabs(iv.observed) / iv.scale;
  if (x == 0.0) return 1.0;
  const double den = log_normal_interval_mass(a, b);
  if (den == -kInf) throw InfeasibleError("saturated test: truncation interval has no mass");
  const double left = log_normal_interval_mass(a, std::min(b, -x));
  const double right = log_normal_interval_mass(std::max(a, x), b);
  return std::clamp(std::exp(log_add(left, right) - den), 0.0, 1.0);
}

double saturated_pvalue(const Dataset& data, const ModelPath& path, Index k, std::optional<double> sigma2) {
  const std::optional<double> s2 = sigma2 ? sigma2 : data.sigma2();
  if (!s2) throw ConfigurationError("the saturated test needs a known noise variance");
  return truncated_two_sided(saturated_interval(data, path, k, *s2));
}

double nominal_pvalue(const Dataset& data, const ModelPath& path, Index k) {
  const PathStep& step = path.step(k);
  const ActiveSet& E = path.active(k - 1);
  const Index df = data.n() - E.size() - 2;
  if (df <= 0) throw RangeError("nominal test needs n > |E| + 2");
  const double t = path.algorithm == PathAlgorithm::kForwardStepwise ? step.statistic
                                                                       : std::fabs(t_statistic(data, E, step.entered));
  return student_t_two_sided(t, static_cast<double>(df));
}

PValueResult compute_pvalue(const Dataset& data, const ModelPath& path, const LassoKnots* knots, PValueMethod method,
                            Index k, const SamplerConfig& config, const PValueOptions& options) {
  switch (method) {
    case PValueMethod::kMaxT: return max_t_pvalue(data, path, k, config, knots);
    case PValueMethod::kMaxZ: return max_z_pvalue(data, path, k, config, knots);
    case PValueMethod::kMaxZIdentify: return max_z_identify_pvalue(data, path, k, config, knots);
    case PValueMethod::kNextEntry:
      return next_entry_impl(data, path, require_knots(path, knots), k, config, options.randomize);
    case PValueMethod::kSaturated: {
      const std::optional<double> s2 = options.sigma2 ? options.sigma2 : data.sigma2();
      if (!s2) throw ConfigurationError("the saturated test needs a known noise variance");
      const TruncationInterval iv = saturated_interval(data, path, k, *s2);
      PValueResult r;
      r.p = truncated_two_sided(iv);
      r.statistic = iv.observed / iv.scale;
      return r;
    }
    case PValueMethod::kNominal: {
      PValueResult r;
      r.p = nominal_pvalue(data, path, k);
      r.statistic = path.algorithm == PathAlgorithm::kForwardStepwise
                        ? path.step(k).statistic
                        : std::fabs(t_statistic(data, path.active(k - 1), path.step(k).entered));
      return r;
    }
  }
  throw ConfigurationError("unknown p-value method");
}

PValueSeries compute_pvalues(const Dataset& data, const ModelPath& path, const LassoKnots* knots,
                             PValueMethod method, const SamplerConfig& config, const PValueOptions& options) {
  const std::size_t d = static_cast<std::size_t>(path.d());
  std::vector<PValueResult> results(d);
  parallel_for(d, options.workers, [&](std::size_t i) {
    const Index k = static_cast<Index>(i) + 1;
    SamplerConfig cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(k));
    results[i] = compute_pvalue(data, path, knots, method, k, cfg, options);
  });
  PValueSeries series;
  series.method = method;
  for (std::size_t i = 0; i < d; ++i) {
    series.variables.push_back(path.steps[i].entered);
    series.values.push_back(results[i].p);
    series.mc_stderr.push_back(is_closed_form(method) ? 0.0 : results[i].std_error);
    series.statistics.push_back(results[i].statistic);
    series.samplers.push_back(results[i].sampler ? to_string(*results[i].sampler) : "closed-form");
  }
  return series;
}

void write_pvalue_csv(const PValueSeries& series, const Dataset& data, std::ostream& out) {
  out << "step,variable,method,p,stderr,statistic\n";
  out.precision(10);
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << (i + 1) << ',' << data.column_name(series.variables[i]) << ',' << to_string(series.method) << ','
        << series.values[i] << ',' << series.mc_stderr[i] << ',' << series.statistics[i] << '\n';
  }
}

}  // namespace seqsel
