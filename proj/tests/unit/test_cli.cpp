#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "seqsel/distributions.hpp"
#include "seqsel/errors.hpp"
#include "seqsel/io.hpp"

using namespace seqsel;
namespace fs = std::filesystem;

namespace {

const std::string kData = SEQSEL_TEST_DATA;
const std::string kCli = SEQSEL_CLI;

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

// Runs the CLI, capturing stdout and stderr through temporary files.
Run run(const std::string& args) {
  const fs::path dir = fs::temp_directory_path();
  const std::string out = (dir / "seqsel_cli_out.txt").string();
  const std::string err = (dir / "seqsel_cli_err.txt").string();
  const std::string cmd = kCli + " " + args + " >" + out + " 2>" + err;
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream o(out), e(err);
  std::stringstream so, se;
  so << o.rdbuf();
  se << e.rdbuf();
  r.out = so.str();
  r.err = se.str();
  return r;
}

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

}  // namespace

TEST_CASE("csv reader") {
  const CsvTable t = parse("# comment\na,\"b,c\"\n\n1,\"x,\"\"y\"\"\"\n");
  REQUIRE(t.header.size() == 2);
  CHECK(t.header[1] == "b,c");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][1] == "x,\"y\"");
  CHECK(t.column("1") == 1);
  CHECK_THROWS_AS(t.column("z"), ParseError);
  CHECK_THROWS_AS(parse("a,b\n1\n"), ParseError);
  CHECK_THROWS_AS(parse("a\nfoo\n").numeric_column(0), ParseError);
}

TEST_CASE("dataset from csv") {
  const CsvTable t = read_csv_file(kData + "/example1.csv");
  const Dataset d = dataset_from_csv(t, {"y", false, 1.0});
  CHECK(d.n() == 2);
  CHECK(d.p() == 2);
  CHECK(d.y()[0] == 2.9);
  CHECK(d.column_name(1) == "x2");
  DatasetCsvOptions missing;
  missing.response = "response";
  CHECK_THROWS_AS(dataset_from_csv(t, missing), ParseError);
}

TEST_CASE("path command") {
  const Run toy = run("path " + kData + "/identity3.csv");
  REQUIRE(toy.status == 0);
  const CsvTable t = parse(toy.out);
  CHECK(t.header == std::vector<std::string>{"step", "variable", "statistic"});
  REQUIRE(t.rows.size() == 3);
  // Identity design enters variables in order of |y_j| for y = (1, -3, 2).
  CHECK(t.rows[0][1] == "x2");
  CHECK(t.rows[1][1] == "x3");
  CHECK(t.rows[2][1] == "x1");

  const Run diabetes = run("path " + kData + "/diabetes64.csv --steps 20");
  REQUIRE(diabetes.status == 0);
  const CsvTable d = parse(diabetes.out);
  REQUIRE(d.rows.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(d.rows[i][0] == std::to_string(i + 1));

  const Run missing = run("path " + kData + "/example1.csv --response nope");
  CHECK(missing.status == 2);
  CHECK(missing.err.find("code=parse") != std::string::npos);
  CHECK(missing.err.find("nope") != std::string::npos);

  CHECK(run("path " + kData + "/does_not_exist.csv").status == 2);
  CHECK(run("path").status == 2);
}

TEST_CASE("pvalues command on the two-variable example") {
  const std::string base = "--seed 7 pvalues " + kData + "/example1.csv --sigma2 1";
  const Run maxz = run(base + " --method max-z --samples 100000");
  REQUIRE(maxz.status == 0);
  const CsvTable t = parse(maxz.out);
  const double p1 = std::stod(t.rows.at(0).at(t.column("p")));
  const double expected = 1.0 - std::pow(2.0 * normal_cdf(2.9) - 1.0, 2);
  CHECK(std::fabs(p1 - expected) < 0.002);

  const Run sat = run(base + " --method saturated");
  REQUIRE(sat.status == 0);
  const double s1 = std::stod(parse(sat.out).rows.at(0).at(3));
  CHECK(std::fabs(s1 - normal_cdf(-2.9) / normal_cdf(-2.5)) < 1e-3);

  CHECK(run(base + " --method max-z --samples 2000").out == run(base + " --method max-z --samples 2000").out);

  const Run no_variance = run("pvalues " + kData + "/example1.csv --method max-z");
  CHECK(no_variance.status == 2);
  CHECK(no_variance.err.find("code=configuration") != std::string::npos);
  CHECK(run(base + " --method bogus").status == 2);
}

TEST_CASE("stop command") {
  const std::string file = kData + "/diabetes_pvalues.csv";
  const Run maxt = run("stop " + file + " --column max_t --rule forward --alpha 0.1");
  REQUIRE(maxt.status == 0);
  CHECK(maxt.out.rfind("k_hat=8\n", 0) == 0);
  const CsvTable annotated = parse(maxt.out.substr(maxt.out.find('\n') + 1));
  const std::size_t last = annotated.column("last");
  for (std::size_t r = 0; r < annotated.rows.size(); ++r) CHECK((annotated.rows[r][last] == "*") == (r == 7));

  CHECK(run("stop " + file + " --column saturated").out.rfind("k_hat=3\n", 0) == 0);

  const fs::path ones = fs::temp_directory_path() / "seqsel_ones.csv";
  {
    std::ofstream o(ones);
    o << "p\n1\n1\n1\n";
  }
  CHECK(run("stop " + ones.string()).out.rfind("k_hat=0\n", 0) == 0);
  CHECK(run("stop " + file + " --column step --alpha 2").status == 2);
}

TEST_CASE("outputs carry a manifest") {
  const fs::path out = fs::temp_directory_path() / "seqsel_path.csv";
  fs::remove(out.string() + ".manifest.json");
  REQUIRE(run("--seed 5 path " + kData + "/identity3.csv --out " + out.string()).status == 0);
  std::ifstream m(out.string() + ".manifest.json");
  REQUIRE(m.good());
  const nlohmann::json doc = nlohmann::json::parse(m);
  CHECK(doc["command"] == "path");
  CHECK(doc["seed"] == 5);
  CHECK(doc["outputs"][0] == out.string());
  CHECK(doc.contains("versions"));
  CHECK(doc.contains("elapsed_seconds"));
}

TEST_CASE("experiment command") {
  const fs::path dir = fs::temp_directory_path() / "seqsel_experiment";
  fs::remove_all(dir);
  const Run r = run("--seed 1 experiment bivariate --reps 2000 --out " + dir.string());
  REQUIRE(r.status == 0);
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "saturated_table.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(run("experiment nonsense --out " + dir.string()).status == 2);
}
