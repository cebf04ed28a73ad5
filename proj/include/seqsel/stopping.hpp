#pragma once
#include <functional>
#include <string>
#include <vector>

namespace seqsel {

enum class StoppingKind { kBasic, kForward, kAccumulation };

/// Nonnegative function on [0,1] with unit integral.
struct AccumulationFunction {
  std::string name;
  std::function<double(double)> h;
};

struct StoppingResult {
  StoppingKind kind = StoppingKind::kBasic;
  /// "basic", "forward" or "accumulation(<h>)".
  std::string rule;
  double alpha = 0.05;
  std::size_t k_hat = 0;
  /// Basic: p_k. Otherwise the running average of h(p_i).
  std::vector<double> trace;
};

/// Stop before the first p_k > alpha.
StoppingResult basic_stop(const std::vector<double>& pvals, double alpha);
/// Largest k with -(1/k) sum_{i<=k} log(1 - p_i) <= alpha.
StoppingResult forward_stop(const std::vector<double>& pvals, double alpha);
/// Largest k with (1/k) sum_{i<=k} h(p_i) <= alpha.
StoppingResult accumulation_stop(const std::vector<double>& pvals, double alpha, const AccumulationFunction& h);

/// Checks h >= 0 on a grid and its integral over [0,1] against 1 (tolerance
/// 1e-6); throws ConfigurationError otherwise.
AccumulationFunction register_accumulation(std::string name, std::function<double(double)> h);

/// Built-ins: "forward" (-log(1-p)), "double" (2p), "seqstep" (C 1{p > 1 - 1/C})
/// and "hingeexp" (C log(1/(C(1-p))) 1{p > 1 - 1/C}), with C = 2 unless given.
AccumulationFunction builtin_accumulation(const std::string& name, double C = 2.0);
std::vector<std::string> builtin_accumulation_names();

/// "basic", "forward" or an accumulation built-in name.
StoppingResult apply_stopping_rule(const std::string& rule, const std::vector<double>& pvals, double alpha);

}  // namespace seqsel
