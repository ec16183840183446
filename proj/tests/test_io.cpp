#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "zrp/experiments.hpp"
#include "zrp/report.hpp"

using namespace zrp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("zrp_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("format_g17 round-trips doubles exactly") {
  for (double v : {1.0 / 3.0, 0.1, 1e-17, 12345.678, -2.5e300, 0.0}) {
    REQUIRE(std::stod(format_g17(v)) == v);
  }
}

TEST_CASE("CsvWriter emits newline-terminated deterministic output") {
  fs::path dir = temp_dir("csv");
  {
    CsvWriter w(dir / "a.csv", {"x", "y"});
    w.row(1, 0.5);
    w.row(2L, std::string("hi"));
  }
  std::string content = slurp(dir / "a.csv");
  REQUIRE(content == "x,y\n1,0.5\n2,hi\n");
  REQUIRE(content.back() == '\n');
}

TEST_CASE("rate spec serialization round trip") {
  RateFunction p = parse_rate(rate_to_json(RateFunction::power(0.7)));
  REQUIRE(p.is_power());
  REQUIRE(p.alpha() == 0.7);
  RateFunction t = parse_rate(rate_to_json(RateFunction::table({1.0, 2.5})));
  REQUIRE_FALSE(t.is_power());
  REQUIRE(t(2) == 2.5);
  REQUIRE_THROWS_AS(parse_rate(nlohmann::json{{"form", "weird"}}),
                    InvalidArgument);
}

TEST_CASE("config parsing and validation") {
  nlohmann::json j = {{"experiment", "mix-curve"},
                      {"rate", {{"form", "power"}, {"alpha", 0.5}}},
                      {"n", 3},
                      {"m", 4},
                      {"seed", 12345678901234567890ull},
                      {"engine", "c2"},
                      {"paths", 10},
                      {"epsilon", 0.25}};
  ExperimentConfig c = parse_config(j);
  REQUIRE(c.experiment == "mix-curve");
  REQUIRE(c.n == 3);
  REQUIRE(c.seed == 12345678901234567890ull);
  REQUIRE(c.engine == "c2");

  REQUIRE_THROWS_AS(parse_config(nlohmann::json::object()), InvalidArgument);
  j["engine"] = "fast";
  REQUIRE_THROWS_AS(parse_config(j), InvalidArgument);
  j["engine"] = "c1";
  j["epsilon"] = 1.5;
  REQUIRE_THROWS_AS(parse_config(j), InvalidArgument);
  j["epsilon"] = 0.25;
  j["paths"] = 0;
  REQUIRE_THROWS_AS(parse_config(j), InvalidArgument);
}

TEST_CASE("config hash is stable and discriminating") {
  nlohmann::json a = {{"experiment", "gap-table"}, {"seed", 1}};
  nlohmann::json b = {{"experiment", "gap-table"}, {"seed", 2}};
  REQUIRE(config_hash(a) == config_hash(a));
  REQUIRE(config_hash(a) != config_hash(b));
}

TEST_CASE("experiment outputs are byte-identical under a fixed seed") {
  nlohmann::json j = {{"experiment", "dissolution"},
                      {"rate", {{"form", "power"}, {"alpha", 0.5}}},
                      {"n", 3},
                      {"m", 5},
                      {"paths", 200},
                      {"seed", 99}};
  fs::path d1 = temp_dir("det1"), d2 = temp_dir("det2");
  j["out"] = d1.string();
  run_experiment(parse_config(j));
  j["out"] = d2.string();
  run_experiment(parse_config(j));
  REQUIRE(slurp(d1 / "dissolution.csv") == slurp(d2 / "dissolution.csv"));
}

TEST_CASE("manifest carries the seed verbatim and the config echo") {
  fs::path dir = temp_dir("manifest");
  nlohmann::json j = {{"experiment", "gap-table"},
                      {"seed", 18446744073709551615ull},
                      {"out", dir.string()}};
  run_experiment(parse_config(j));
  nlohmann::json manifest;
  std::ifstream in(dir / "manifest.json");
  in >> manifest;
  REQUIRE(manifest.at("seed").get<std::uint64_t>() == 18446744073709551615ull);
  REQUIRE(manifest.at("config").at("experiment") == "gap-table");
  REQUIRE(manifest.at("config_hash").get<std::uint64_t>() ==
          config_hash(j));
  REQUIRE(manifest.contains("version"));
  REQUIRE(manifest.contains("wall_clock_unix_ms"));
}

TEST_CASE("CSV schemas round-trip through a parser") {
  fs::path dir = temp_dir("schema");
  nlohmann::json j = {{"experiment", "mix-curve"},
                      {"rate", {{"form", "power"}, {"alpha", 0.5}}},
                      {"n", 3},
                      {"m", 4},
                      {"out", dir.string()},
                      {"export_matrices", true}};
  run_experiment(parse_config(j));
  auto rows = parse_csv(dir / "mix_curve.csv");
  REQUIRE(rows.front() == std::vector<std::string>{"t", "tv"});
  REQUIRE(rows.size() > 2);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    REQUIRE(rows[r].size() == 2);
    double tv = std::stod(rows[r][1]);
    REQUIRE(tv >= 0.0);
    REQUIRE(tv <= 1.0);
  }
  auto pi_rows = parse_csv(dir / "pi.csv");
  double total = 0.0;
  for (std::size_t r = 1; r < pi_rows.size(); ++r)
    total += std::stod(pi_rows[r][1]);
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(fs::exists(dir / "q_triplets.txt"));
}

TEST_CASE("unknown experiment and bad start state are config errors") {
  nlohmann::json j = {{"experiment", "nope"}, {"n", 3}, {"m", 2}};
  REQUIRE_THROWS_AS(run_experiment(parse_config(j)), InvalidArgument);
  nlohmann::json k = {{"experiment", "mix-curve"},
                      {"rate", {{"form", "power"}, {"alpha", 1.0}}},
                      {"n", 3},
                      {"m", 2},
                      {"x", {5, 0, 0}},
                      {"out", temp_dir("bad").string()}};
  REQUIRE_THROWS_AS(run_experiment(parse_config(k)), InvalidArgument);
}

TEST_CASE("CLI exit codes", "[cli]") {
  // ctest runs from the build directory where the binary lives.
  if (!fs::exists("zrp")) {
    SUCCEED("CLI binary not adjacent; covered by direct invocation elsewhere");
    return;
  }
  int usage = std::system("./zrp > /dev/null 2>&1");
  REQUIRE(WEXITSTATUS(usage) == 2);
  int badcfg = std::system("./zrp mix-curve --config /nonexistent.json > /dev/null 2>&1");
  REQUIRE(WEXITSTATUS(badcfg) == 2);
  int ok = std::system("./zrp gap-table --out /tmp/zrp_cli_gap > /dev/null 2>&1");
  REQUIRE(WEXITSTATUS(ok) == 0);
}
