#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

using perslab::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Data rows of a CSV report (metadata lines and header dropped).
std::vector<std::vector<std::string>> rows(const std::string& csv) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

}  // namespace

TEST_CASE("verify") {
  const auto ok = call({"verify"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("# all_passed=true") != std::string::npos);
  CHECK(ok.out.find("FAIL") == std::string::npos);

  const auto broken = call({"verify", "--perturb-rl", "1e-6"});
  CHECK(broken.code == 1);
  CHECK(broken.err.find("contiguous_r") != std::string::npos);

  CHECK(call({"verify", "--h", ""}).code == 2);
  CHECK(call({"verify", "--h", "0.3,abc"}).code == 2);
  CHECK(call({"verify", "--h", "0.25,0.75"}).code == 0);
}

TEST_CASE("corr-eval") {
  const auto r = call({"corr-eval", "--corr", "rl", "--h", "0.5", "--tau", "1"});
  REQUIRE(r.code == 0);
  const auto data = rows(r.out);
  REQUIRE(data.size() == 1);
  CHECK(std::stod(data[0][1]) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(r.out.find("# spec=RL_LAMPERTI(H=0.5,gamma=1)") != std::string::npos);

  const auto scaled = call({"corr-eval", "--corr", "ou", "--time-scale", "2", "--tau", "0,1,4", "--format", "json"});
  REQUIRE(scaled.code == 0);
  const auto doc = nlohmann::json::parse(scaled.out);
  REQUIRE(doc["records"].size() == 3);
  CHECK(doc["records"][0]["value"].get<double>() == 1.0);
  CHECK(doc["records"][2]["value"].get<double>() == doctest::Approx(std::exp(-2.0)));

  CHECK(call({"corr-eval", "--corr", "ifbm", "--tau", "1"}).code == 2);
  CHECK(call({"corr-eval", "--corr", "ifbm", "--h", "1.2", "--tau", "1"}).code == 2);
  CHECK(call({"corr-eval", "--corr", "ou", "--tau", "-1"}).code == 2);
  CHECK(call({"corr-eval", "--corr", "nope", "--tau", "1"}).code == 2);
}

TEST_CASE("corr-limit") {
  const auto r = call({"corr-limit", "--family", "IFBM", "--direction", "0", "--h", "0.1,0.05,0.02,0.01", "--tau", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("# gaps_decrease=true") != std::string::npos);
  const auto data = rows(r.out);
  REQUIRE(data.size() == 4);
  CHECK(std::stod(data[3][4]) <= 0.05);

  const auto up = call({"corr-limit", "--family", "IFBM", "--direction", "1", "--h", "0.99", "--tau", "1"});
  REQUIRE(up.code == 0);
  CHECK(std::stod(rows(up.out)[0][4]) <= 0.05);

  const auto rl = call({"corr-limit", "--family", "RL", "--h", "0.02", "--tau", "1", "--a", "1"});
  REQUIRE(rl.code == 0);
  const auto rl_rows = rows(rl.out);
  REQUIRE(rl_rows.size() == 1);
  CHECK(std::stod(rl_rows[0][4]) == doctest::Approx(1.0 - std::exp(-1.0)));
  CHECK(std::stod(rl_rows[0][5]) <= 0.05);

  CHECK(call({"corr-limit", "--family", "RL", "--direction", "1"}).code == 2);
  CHECK(call({"corr-limit", "--family", "OU"}).code == 2);
  CHECK(call({"corr-limit", "--direction", "sideways"}).code == 2);
}

TEST_CASE("drift-check") {
  const auto r = call({"drift-check", "--h", "0.3", "--eta", "0.7", "--t-max", "100"});
  CHECK(r.code == 0);
  CHECK(r.out.find("# nondecreasing=true") != std::string::npos);
  CHECK(r.out.find("# phi_at_one=1") != std::string::npos);
  CHECK(call({"drift-check", "--h", "0.3", "--eta", "0.9"}).code == 2);
}

TEST_CASE("sample output is deterministic") {
  const std::vector<std::string> args{"sample", "--corr", "ou", "--paths", "2", "--seed", "7", "--horizon", "1",
                                      "--grid-step", "0.1"};
  auto first = args, second = args;
  first.insert(first.end(), {"--out", "sample_a.csv"});
  second.insert(second.end(), {"--out", "sample_b.csv"});
  REQUIRE(call(first).code == 0);
  REQUIRE(call(second).code == 0);
  const auto a = slurp("sample_a.csv");
  CHECK(!a.empty());
  CHECK(a == slurp("sample_b.csv"));
  CHECK(rows(a).size() == 22);
  CHECK(a.find("# method=circulant") != std::string::npos);
  CHECK(a.find("# seed=7") != std::string::npos);
  CHECK(a.find("# clipped_mass=0") != std::string::npos);

  for (const char* process : {"fbm", "ifbm-lamperti", "rl"}) {
    CAPTURE(process);
    const auto r = call({"sample", "--process", process, "--h", "0.4", "--paths", "3", "--horizon", "1",
                         "--grid-step", "0.25", "--format", "json"});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["records"].size() == 15);
  }
  CHECK(call({"sample", "--process", "fbm", "--paths", "1"}).code == 2);
  CHECK(call({"sample", "--process", "brownian"}).code == 2);
}

TEST_CASE("estimate") {
  const std::vector<std::string> args{"estimate", "--corr", "ou", "--grid-step", "0.05", "--trials", "4000",
                                      "--seed", "3", "--t-min", "0.5", "--t-max", "2"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", "estimate_a.csv"});
  b.insert(b.end(), {"--out", "estimate_b.csv", "--workers", "2"});
  REQUIRE(call(a).code == 0);
  REQUIRE(call(b).code == 0);
  const auto text = slurp("estimate_a.csv");
  // The worker count does not enter the results.
  CHECK(text == slurp("estimate_b.csv"));
  CHECK(rows(text).size() == 4);
  CHECK(text.find("# theta_hat=") != std::string::npos);
  CHECK(text.find("# bias=upward-biased") != std::string::npos);

  const auto single = call({"estimate", "--horizon", "1", "--trials", "1000", "--grid-step", "0.1"});
  CHECK(single.code == 0);
  CHECK(single.out.find("# fit=") != std::string::npos);

  const auto big = call({"estimate", "--horizon", "1000", "--grid-step", "0.005", "--trials", "10"});
  CHECK(big.code == 2);
  CHECK(big.err.find("grid too large") != std::string::npos);
  CHECK(call({"estimate", "--t-max", "600", "--grid-step", "0.005", "--trials", "10"}).code == 2);
}

TEST_CASE("curve and figure1") {
  const auto c = call({"curve", "--family", "IFBM", "--h", "0.3,0.5", "--rescale", "h", "--grid-step", "0.05",
                       "--trials", "3000", "--t-min", "1", "--t-max", "3"});
  REQUIRE(c.code == 0);
  const auto data = rows(c.out);
  REQUIRE(data.size() == 2);
  CHECK(data[0][2] == "0.3");
  CHECK(data[1][5] == "ok");
  CHECK(call({"curve", "--family", "IFBM", "--h", "1.5"}).code == 2);
  CHECK(call({"curve", "--family", "XYZ", "--h", "0.5"}).code == 2);

  const auto f = call({"figure1", "--trials", "1500", "--grid-step", "0.05", "--t-min", "1", "--t-max", "2.5"});
  REQUIRE(f.code == 0);
  const auto fr = rows(f.out);
  int ifbm = 0, rl = 0, refs = 0;
  for (const auto& r : fr) {
    REQUIRE(r.size() == 7);
    if (r[0] == "IFBM") {
      ++ifbm;
      const double h = std::stod(r[1]);
      CHECK(std::stod(r[4]) == h * (1.0 - h));
    }
    if (r[0] == "RL" && r[6] != "reference") ++rl;
    if (r[6] == "reference") ++refs;
  }
  CHECK(ifbm == 9);
  CHECK(rl == 8);
  CHECK(refs >= 4);
  CHECK(f.out.find("COSH,inf") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"verify", "--format", "xml"}).code == 2);
  CHECK(call({"verify", "--help"}).code == 0);
}
