#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "krrlab_cli/cli.hpp"

namespace fs = std::filesystem;
using krrlab::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::string small_config() {
  return R"({"name":"cli","kernel":{"kind":"gaussian","params":{"ell":1.0,"sigma":1.0}},
             "d_list":[3,4,5,6],"trials":3,"test_m":100,"root_seed":7,
             "lambda_rule":{"kind":"theoretical_schedule","multiplier":0.5}})";
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("krrlab_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("rates at s = 1: exact and minimax columns coincide") {
  const auto r = call({"rates", "--s", "1", "--gamma-min", "0.2", "--gamma-max", "3.0", "--step", "0.1"});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  REQUIRE(rows.size() > 20);
  const auto& h = rows[0];
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i] == name) return i;
    FAIL("missing column " << name);
    return std::size_t{0};
  };
  const auto ed = col("exact_d_exp"), md = col("minimax_d_exp");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][ed]) == doctest::Approx(std::stod(rows[i][md])));
}

TEST_CASE("rates output is byte stable") {
  const std::vector<std::string> args = {"rates", "--s", "2", "--axis", "n", "--which", "both"};
  CHECK(call(args).out == call(args).out);
}

TEST_CASE("run rejects lambda = 0 with exit code 2") {
  const auto r = call({"run", "--kernel", R"({"kind":"gaussian","params":{"ell":1,"sigma":1}})", "--d", "3",
                       "--lambda", "0"});
  CHECK(r.code == 2);
  CHECK(r.err.find("lambda") != std::string::npos);
}

TEST_CASE("run prints a report") {
  const auto r = call({"run", "--kernel", R"({"kind":"mehler","params":{"theta":0.5}})", "--d", "2", "--n", "30",
                       "--lambda", "0.01", "--test-m", "200", "--seed", "3"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.dump().find("error") != std::string::npos);
  CHECK(r.out == call({"run", "--kernel", R"({"kind":"mehler","params":{"theta":0.5}})", "--d", "2", "--n", "30",
                       "--lambda", "0.01", "--test-m", "200", "--seed", "3"})
                     .out);
}

TEST_CASE("spectrum CSV") {
  const auto r = call({"spectrum", "--kernel", R"({"kind":"gaussian","params":{"ell":1,"sigma":1}})", "--d", "4",
                       "--lambda-grid", "0.1,0.01,0.001"});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == "lambda");
}

TEST_CASE("sweep persists results and prints a CSV") {
  const auto dir = scratch("sweep");
  const auto r = call({"sweep", "--config", small_config(), "--results-dir", dir.string(), "--workers", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("d,n,lambda,mean_error,stderr\n", 0) == 0);
  int json_files = 0;
  for (const auto& e : fs::directory_iterator(dir)) json_files += e.path().extension() == ".json";
  CHECK(json_files == 2);  // results and timing sidecar
  const auto again = call({"sweep", "--config", small_config(), "--results-dir", dir.string(), "--workers", "1"});
  CHECK(again.out == r.out);
  fs::remove_all(dir);
}

TEST_CASE("--seed and KRRLAB_SEED are equivalent") {
  const auto dir = scratch("seed");
  const auto flag = call({"sweep", "--config", small_config(), "--results-dir", dir.string(), "--seed", "4242"});
  ::setenv("KRRLAB_SEED", "4242", 1);
  const auto env = call({"sweep", "--config", small_config(), "--results-dir", dir.string()});
  ::unsetenv("KRRLAB_SEED");
  const auto plain = call({"sweep", "--config", small_config(), "--results-dir", dir.string()});
  REQUIRE(flag.code == 0);
  CHECK(flag.out == env.out);
  CHECK(flag.out != plain.out);
  fs::remove_all(dir);
}

TEST_CASE("unknown config field exits 2 and names the field") {
  auto j = nlohmann::json::parse(small_config());
  j["colour"] = "blue";
  const auto dir = scratch("bad");
  const auto r = call({"sweep", "--config", j.dump(), "--results-dir", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("config from a file and verify exit codes") {
  const auto dir = scratch("verify");
  fs::create_directories(dir);
  const auto cfg_path = dir / "cfg.json";
  auto j = nlohmann::json::parse(small_config());
  j["slope_tolerance"] = 1e-6;
  std::ofstream(cfg_path) << j.dump();
  const auto r = call({"verify", "--config", cfg_path.string(), "--results-dir", (dir / "out").string()});
  CHECK(r.code == 1);
  const auto rep = nlohmann::json::parse(r.out);
  CHECK(rep.at("pass") == false);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit 2") {
  CHECK(call({}).code == 2);
  CHECK(call({"nonsense"}).code == 2);
  CHECK(call({"rates"}).code == 2);
  CHECK(call({"sweep", "--config", "/nonexistent/cfg.json"}).code == 2);
  CHECK(call({"rates", "--s", "1", "--axis", "q"}).code == 2);
}
