// Command-line front end: paths, p-values, stopping rules and the canned experiments.
#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "seqsel/errors.hpp"
#include "seqsel/io.hpp"
#include "seqsel/parallel.hpp"
#include "seqsel/paths.hpp"
#include "seqsel/pvalues.hpp"
#include "seqsel/simulation.hpp"
#include "seqsel/stopping.hpp"

#ifndef SEQSEL_VERSION
#define SEQSEL_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqsel;

namespace {

struct Common {
  unsigned workers = default_workers();
  std::optional<std::uint64_t> seed;

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("SEQSEL_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigurationError("SEQSEL_SEED must be a nonnegative integer");
      }
    }
    return 0;
  }
};

struct DataArgs {
  std::string input;
  std::string response = "y";
  bool intercept = false;
  std::optional<double> sigma2;
  std::string algorithm = "fs";
  int steps = 20;
  std::vector<double> grid;
  std::string out;
};

struct SamplerArgs {
  std::string method = "max-t";
  std::size_t budget = 75000;
  std::size_t min_accepted = 300;
  std::size_t burn_in = 2000;
  std::size_t thin = 5;
  std::size_t chain_length = 5000;
  std::string sampler = "auto";
  bool randomize = false;
};

struct StopArgs {
  std::string input;
  std::string column = "p";
  std::string rule = "forward";
  double alpha = 0.1;
  std::string out;
};

struct ExperimentArgs {
  std::string name;
  std::optional<std::size_t> reps;
  std::vector<double> alphas;
  double C = 10.0;
  std::string out = ".";
  std::size_t budget = 2000;
  int steps = 7;
  int n = 50;
  int p = 10;
  int sparsity = 3;
  double signal = 5.0;
  double corr = 0.3;
  std::size_t length = 60;
  std::size_t permutations = 500;
};

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["seed"] = seed;
    doc_["versions"] = {{"seqsel", SEQSEL_VERSION},
                        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                      std::to_string(EIGEN_MINOR_VERSION)},
                        {"boost", BOOST_LIB_VERSION},
                        {"compiler", __VERSION__}};
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    doc_["started"] = buf;
  }
  json& config() { return doc_["config"]; }
  void add_output(const std::string& path) { doc_["outputs"].push_back(path); }
  void write(const std::string& path) {
    doc_["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << doc_.dump(2) << '\n';
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  return out;
}

// Writes `body` to `out_path` plus its manifest, or to stdout when no path is given.
template <class Body>
void emit(const std::string& out_path, Manifest& manifest, Body&& body) {
  if (out_path.empty()) {
    body(std::cout);
    return;
  }
  {
    std::ofstream out = open_output(out_path);
    body(out);
  }
  manifest.add_output(out_path);
  manifest.write(out_path + ".manifest.json");
}

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("input", a.input, "CSV with a header row")->required();
  cmd->add_option("--response", a.response, "response column (name or 0-based index)")->capture_default_str();
  cmd->add_flag("--intercept", a.intercept, "prepend an intercept column; it starts in the model");
  cmd->add_option("--sigma2", a.sigma2, "known noise variance");
  cmd->add_option("--algorithm", a.algorithm, "fs or lasso")->capture_default_str();
  cmd->add_option("--steps", a.steps, "path length d")->capture_default_str();
  cmd->add_option("--grid", a.grid, "lasso lambda grid (decreasing)")->delimiter(',');
  cmd->add_option("--out", a.out, "output CSV (stdout when omitted)");
}

struct FittedPath {
  Dataset data;
  ModelPath path;
  std::optional<LassoKnots> knots;
};

FittedPath fit_path(const DataArgs& a) {
  DatasetCsvOptions opts;
  opts.response = a.response;
  opts.intercept = a.intercept;
  opts.sigma2 = a.sigma2;
  Dataset data = dataset_from_csv(read_csv_file(a.input), opts);
  if (a.steps < 1) throw RangeError("--steps must be positive");
  const PathAlgorithm algorithm = parse_algorithm(a.algorithm);
  if (algorithm == PathAlgorithm::kLasso) {
    std::optional<std::vector<double>> grid;
    if (!a.grid.empty()) grid = a.grid;
    LassoPath lasso = lasso_path(data, a.steps, grid);
    return {std::move(data), std::move(lasso.path), std::move(lasso.knots)};
  }
  const Index start = default_initial_set(data).size();
  const Index room = std::min(data.n(), data.p()) - start;
  const Index d = std::min<Index>(a.steps, std::max<Index>(room, 0));
  ModelPath path = forward_stepwise_path(data, d);
  return {std::move(data), std::move(path), std::nullopt};
}

json data_config(const DataArgs& a) {
  json c = {{"input", a.input},         {"response", a.response}, {"intercept", a.intercept},
            {"algorithm", a.algorithm}, {"steps", a.steps},       {"grid", a.grid}};
  c["sigma2"] = a.sigma2 ? json(*a.sigma2) : json(nullptr);
  return c;
}

void run_path(const Common& common, const DataArgs& a) {
  Manifest manifest("path", common.resolved_seed());
  manifest.config() = data_config(a);
  const FittedPath fit = fit_path(a);
  emit(a.out, manifest, [&](std::ostream& out) { write_path_csv(fit.path, fit.data, out); });
}

void run_pvalues(const Common& common, const DataArgs& a, const SamplerArgs& s) {
  const std::uint64_t seed = common.resolved_seed();
  Manifest manifest("pvalues", seed);
  json cfg = data_config(a);
  cfg["method"] = s.method;
  cfg["budget"] = s.budget;
  cfg["min_accepted"] = s.min_accepted;
  cfg["burn_in"] = s.burn_in;
  cfg["thin"] = s.thin;
  cfg["chain_length"] = s.chain_length;
  cfg["sampler"] = s.sampler;
  cfg["randomize"] = s.randomize;
  cfg["workers"] = common.workers;
  manifest.config() = cfg;

  const PValueMethod method = parse_pvalue_method(s.method);
  const FittedPath fit = fit_path(a);
  SamplerConfig config;
  config.budget = s.budget;
  config.min_accepted = s.min_accepted;
  config.burn_in = s.burn_in;
  config.thin = s.thin;
  config.chain_length = s.chain_length;
  config.seed = seed;
  if (s.sampler == "accept-reject") {
    config.method = SamplerMethod::kAcceptReject;
  } else if (s.sampler == "hit-and-run") {
    config.method = SamplerMethod::kHitAndRun;
  } else if (s.sampler != "auto") {
    throw ConfigurationError("--sampler must be auto, accept-reject or hit-and-run");
  }
  config.validate();
  PValueOptions options;
  options.randomize = s.randomize;
  options.workers = common.workers;
  const PValueSeries series =
      compute_pvalues(fit.data, fit.path, fit.knots ? &*fit.knots : nullptr, method, config, options);
  emit(a.out, manifest, [&](std::ostream& out) { write_pvalue_csv(series, fit.data, out); });
}

void run_stop(const Common& common, const StopArgs& a) {
  Manifest manifest("stop", common.resolved_seed());
  manifest.config() = {{"input", a.input}, {"column", a.column}, {"rule", a.rule}, {"alpha", a.alpha}};
  const CsvTable table = read_csv_file(a.input);
  const std::vector<double> p = table.numeric_column(table.column(a.column));
  const StoppingResult result = apply_stopping_rule(a.rule, p, a.alpha);
  std::cout << "k_hat=" << result.k_hat << '\n';
  emit(a.out, manifest, [&](std::ostream& out) {
    for (const auto& h : table.header) out << h << ',';
    out << "trace,selected,last\n";
    out.precision(10);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      for (const auto& cell : table.rows[r]) out << cell << ',';
      out << result.trace[r] << ',' << (r < result.k_hat ? 1 : 0) << ',' << (r + 1 == result.k_hat ? "*" : "")
          << '\n';
    }
  });
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out = open_output(path.string());
  out << doc.dump(2) << '\n';
}

void run_experiment(const Common& common, const ExperimentArgs& a) {
  const std::uint64_t seed = common.resolved_seed();
  Manifest manifest("experiment " + a.name, seed);
  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create '" + a.out + "'");
  json cfg = {{"name", a.name}, {"workers", common.workers}};
  std::vector<fs::path> outputs;

  if (a.name == "bivariate") {
    const std::size_t reps = a.reps.value_or(100000);
    cfg["reps"] = reps;
    const BivariateReport r = bivariate_experiment(reps, seed, common.workers);
    {
      std::ofstream out = open_output((dir / "saturated_table.csv").string());
      write_contingency_csv(r.saturated, out);
    }
    {
      std::ofstream out = open_output((dir / "selected_table.csv").string());
      write_contingency_csv(r.selected, out);
    }
    write_json(dir / "summary.json", to_json(r));
    outputs = {dir / "saturated_table.csv", dir / "selected_table.csv", dir / "summary.json"};
  } else if (a.name == "counterexample") {
    const std::size_t reps = a.reps.value_or(100000);
    const double alpha = a.alphas.empty() ? 0.05 : a.alphas.front();
    cfg["reps"] = reps;
    cfg["alpha"] = alpha;
    cfg["C"] = a.C;
    const CounterexampleReport r = counterexample_experiment(alpha, a.C, reps, seed, common.workers);
    write_json(dir / "summary.json", to_json(r));
    outputs = {dir / "summary.json"};
  } else if (a.name == "sparse") {
    SimConfig c;
    c.n = a.n;
    c.p = a.p;
    c.sparsity = a.sparsity;
    c.signal = a.signal;
    c.pairwise_corr = a.corr;
    c.steps = a.steps;
    c.reps = a.reps.value_or(500);
    if (!a.alphas.empty()) c.alphas = a.alphas;
    c.budget = a.budget;
    c.seed = seed;
    c.workers = common.workers;
    const SparseReport r = sparse_experiment(c);
    {
      std::ofstream out = open_output((dir / "metrics.csv").string());
      write_metrics_csv(r.metrics, out);
    }
    {
      std::ofstream out = open_output((dir / "null_pvalues.csv").string());
      out << "method,trial,p_first_null,p_second_null\n";
      out.precision(10);
      for (const NullStepSummary& s : r.null_steps)
        for (std::size_t i = 0; i < s.first.size(); ++i)
          out << s.method << ',' << i << ',' << s.first[i] << ',' << s.second[i] << '\n';
    }
    const json summary = to_json(r);
    cfg["simulation"] = summary["config"];
    write_json(dir / "summary.json", summary);
    outputs = {dir / "metrics.csv", dir / "null_pvalues.csv", dir / "summary.json"};
  } else if (a.name == "changepoint-null") {
    const std::size_t reps = a.reps.value_or(500);
    cfg["reps"] = reps;
    cfg["length"] = a.length;
    cfg["permutations"] = a.permutations;
    const ChangepointNullReport r = changepoint_null_experiment(a.length, reps, a.permutations, seed, common.workers);
    {
      std::ofstream out = open_output((dir / "pvalues.csv").string());
      out << "rep,p1,p2\n";
      out.precision(10);
      for (std::size_t i = 0; i < r.p1.size(); ++i) out << i << ',' << r.p1[i] << ',' << r.p2[i] << '\n';
    }
    write_json(dir / "summary.json", to_json(r));
    outputs = {dir / "pvalues.csv", dir / "summary.json"};
  } else {
    throw ConfigurationError("unknown experiment '" + a.name + "'");
  }
  manifest.config() = cfg;
  for (const auto& p : outputs) {
    manifest.add_output(p.string());
    std::cout << p.string() << '\n';
  }
  manifest.write((dir / "manifest.json").string());
}

int fail(const std::string& code, const std::string& kind, const std::string& message, int status) {
  std::cerr << "error code=" << code << " kind=" << kind << " exit=" << status << " message=" << json(message).dump()
            << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective sequential model selection"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--workers", common.workers, "worker threads (default: available parallelism)");
  app.add_option("--seed", common.seed, "random seed (default: $SEQSEL_SEED, else 0)");
  app.set_version_flag("--version", SEQSEL_VERSION);

  DataArgs path_args;
  CLI::App* path_cmd = app.add_subcommand("path", "compute a model path");
  add_data_options(path_cmd, path_args);

  DataArgs pv_args;
  SamplerArgs sampler_args;
  CLI::App* pv_cmd = app.add_subcommand("pvalues", "selective p-values for every step of a path");
  add_data_options(pv_cmd, pv_args);
  pv_cmd->add_option("--method", sampler_args.method,
                     "max-t, max-z, max-z-identify, next-entry, saturated or nominal")
      ->capture_default_str();
  pv_cmd->add_option("--samples,--budget", sampler_args.budget, "accept/reject proposals")->capture_default_str();
  pv_cmd->add_option("--min-accepted", sampler_args.min_accepted, "fall back to hit-and-run below this")
      ->capture_default_str();
  pv_cmd->add_option("--burn-in", sampler_args.burn_in)->capture_default_str();
  pv_cmd->add_option("--thin", sampler_args.thin)->capture_default_str();
  pv_cmd->add_option("--chain-length", sampler_args.chain_length)->capture_default_str();
  pv_cmd->add_option("--sampler", sampler_args.sampler, "auto, accept-reject or hit-and-run")->capture_default_str();
  pv_cmd->add_flag("--randomize", sampler_args.randomize, "break grid ties uniformly (next-entry)");

  StopArgs stop_args;
  CLI::App* stop_cmd = app.add_subcommand("stop", "apply a stopping rule to a p-value column");
  stop_cmd->add_option("input", stop_args.input, "CSV with a p-value column")->required();
  stop_cmd->add_option("--column", stop_args.column, "p-value column (name or index)")->capture_default_str();
  stop_cmd->add_option("--rule", stop_args.rule, "basic, forward, or an accumulation function")
      ->capture_default_str();
  stop_cmd->add_option("--alpha", stop_args.alpha)->capture_default_str();
  stop_cmd->add_option("--out", stop_args.out, "annotated CSV (stdout when omitted)");

  ExperimentArgs exp_args;
  CLI::App* exp_cmd = app.add_subcommand("experiment", "run a canned simulation");
  exp_cmd->add_option("name", exp_args.name, "bivariate, counterexample, sparse or changepoint-null")->required();
  exp_cmd->add_option("--reps", exp_args.reps);
  exp_cmd->add_option("--alpha", exp_args.alphas, "level(s)")->delimiter(',');
  exp_cmd->add_option("--C", exp_args.C, "counterexample signal")->capture_default_str();
  exp_cmd->add_option("--out", exp_args.out, "output directory")->capture_default_str();
  exp_cmd->add_option("--budget", exp_args.budget, "sparse: proposals per p-value")->capture_default_str();
  exp_cmd->add_option("--steps", exp_args.steps, "sparse: path length")->capture_default_str();
  exp_cmd->add_option("--n", exp_args.n)->capture_default_str();
  exp_cmd->add_option("--p", exp_args.p)->capture_default_str();
  exp_cmd->add_option("--sparsity", exp_args.sparsity)->capture_default_str();
  exp_cmd->add_option("--signal", exp_args.signal)->capture_default_str();
  exp_cmd->add_option("--corr", exp_args.corr)->capture_default_str();
  exp_cmd->add_option("--length", exp_args.length, "changepoint-null: series length")->capture_default_str();
  exp_cmd->add_option("--permutations", exp_args.permutations)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail("usage", "input", e.what(), 2);
  }

  try {
    if (common.workers == 0) throw RangeError("--workers must be positive");
    if (*path_cmd) run_path(common, path_args);
    if (*pv_cmd) run_pvalues(common, pv_args, sampler_args);
    if (*stop_cmd) run_stop(common, stop_args);
    if (*exp_cmd) run_experiment(common, exp_args);
  } catch (const Error& e) {
    const bool input = e.kind() == ErrorKind::kInput;
    return fail(e.code(), input ? "input" : "numerical", e.what(), input ? 2 : 3);
  } catch (const std::exception& e) {
    return fail("internal", "numerical", e.what(), 3);
  }
  return 0;
}
