#include "seqsel/stopping.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>

#include "seqsel/errors.hpp"

namespace seqsel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const std::vector<double>& pvals, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw RangeError("alpha must lie in (0, 1)");
  for (double p : pvals)
    if (!(p >= 0.0 && p <= 1.0)) throw RangeError("p-values must lie in [0, 1]");
}

StoppingResult running_average(const std::vector<double>& pvals, double alpha,
                               const std::function<double(double)>& h) {
  StoppingResult out;
  out.alpha = alpha;
  double sum = 0.0;
  for (std::size_t k = 0; k < pvals.size(); ++k) {
    sum += h(pvals[k]);
    const double avg = std::isinf(sum) ? kInf : sum / static_cast<double>(k + 1);
    out.trace.push_back(avg);
    if (avg <= alpha) out.k_hat = k + 1;
  }
  return out;
}

double forward_h(double p) { return p >= 1.0 ? kInf : -std::log1p(-p); }

}  // namespace

StoppingResult basic_stop(const std::vector<double>& pvals, double alpha) {
  check_inputs(pvals, alpha);
  StoppingResult out;
  out.kind = StoppingKind::kBasic;
  out.rule = "basic";
  out.alpha = alpha;
  out.trace = pvals;
  out.k_hat = pvals.size();
  for (std::size_t k = 0; k < pvals.size(); ++k) {
    if (pvals[k] > alpha) {
      out.k_hat = k;
      break;
    }
  }
  return out;
}

StoppingResult forward_stop(const std::vector<double>& pvals, double alpha) {
  check_inputs(pvals, alpha);
  StoppingResult out = running_average(pvals, alpha, forward_h);
  out.kind = StoppingKind::kForward;
  out.rule = "forward";
  return out;
}

StoppingResult accumulation_stop(const std::vector<double>& pvals, double alpha, const AccumulationFunction& h) {
  check_inputs(pvals, alpha);
  StoppingResult out = running_average(pvals, alpha, h.h);
  out.kind = StoppingKind::kAccumulation;
  out.rule = "accumulation(" + h.name + ")";
  return out;
}

AccumulationFunction register_accumulation(std::string name, std::function<double(double)> h) {
  for (int i = 0; i <= 1000; ++i) {
    const double v = h(i / 1000.0);
    if (std::isnan(v) || v < 0.0) throw ConfigurationError("accumulation function '" + name + "' is negative");
  }
  // tanh-sinh copes with the integrable log singularity at 1 and with jumps.
  boost::math::quadrature::tanh_sinh<double> integrator;
  double integral = 0.0;
  try {
    integral = integrator.integrate(h, 0.0, 1.0);
  } catch (const std::exception&) {
    integral = std::numeric_limits<double>::quiet_NaN();
  }
  if (!(std::fabs(integral - 1.0) <= 1e-6)) {
    throw ConfigurationError("accumulation function '" + name + "' does not integrate to 1 (got " +
                             std::to_string(integral) + ")");
  }
  return {std::move(name), std::move(h)};
}

AccumulationFunction builtin_accumulation(const std::string& name, double C) {
  if (name == "forward") return register_accumulation(name, forward_h);
  if (name == "double") return register_accumulation(name, [](double p) { return 2.0 * p; });
  if (!(C > 1.0)) throw RangeError("accumulation constant C must exceed 1");
  const double cut = 1.0 - 1.0 / C;
  if (name == "seqstep") {
    // The jump is integrated piecewise; tanh-sinh alone would miss it by more than the tolerance.
    boost::math::quadrature::tanh_sinh<double> integrator;
    auto h = [C, cut](double p) { return p > cut ? C : 0.0; };
    const double integral = integrator.integrate([C](double) { return C; }, cut, 1.0);
    if (std::fabs(integral - 1.0) > 1e-6) throw ConfigurationError("seqstep does not integrate to 1");
    return {name, h};
  }
  if (name == "hingeexp") {
    auto h = [C, cut](double p) {
      if (p <= cut) return 0.0;
      if (p >= 1.0) return kInf;
      return C * std::log(1.0 / (C * (1.0 - p)));
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double integral = integrator.integrate(h, cut, 1.0);
    if (std::fabs(integral - 1.0) > 1e-6) throw ConfigurationError("hingeexp does not integrate to 1");
    return {name, h};
  }
  throw ConfigurationError("unknown accumulation function '" + name + "'");
}

std::vector<std::string> builtin_accumulation_names() { return {"forward", "double", "seqstep", "hingeexp"}; }

StoppingResult apply_stopping_rule(const std::string& rule, const std::vector<double>& pvals, double alpha) {
  if (rule == "basic") return basic_stop(pvals, alpha);
  if (rule == "forward") return forward_stop(pvals, alpha);
  return accumulation_stop(pvals, alpha, builtin_accumulation(rule));
}

}  // namespace seqsel
