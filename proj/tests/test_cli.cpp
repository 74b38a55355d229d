#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jsrl/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = jsrl::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& child) const { return (path / child).string(); }
};

const std::vector<std::string> kSmallNet{"--hidden1", "6", "--hidden2", "8", "--ffn", "12,8,4"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("version") {
  const auto r = cli({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find("jobshop-rl-checkpoint v1") != std::string::npos);
}

TEST_CASE("gen writes deterministic files and a manifest") {
  TempDir tmp("jsrl_cli_gen");
  auto r = cli({"gen", "--jobs", "3", "--machines", "2", "--dist", "poisson:20", "--count", "4",
                "--seed", "1", "--out", tmp / "a"});
  REQUIRE(r.code == 0);
  r = cli({"gen", "--jobs", "3", "--machines", "2", "--dist", "poisson:20", "--count", "4",
           "--seed", "1", "--out", tmp / "b"});
  REQUIRE(r.code == 0);
  for (int i = 0; i < 4; ++i) {
    const std::string name = "3x2_1_" + std::to_string(i) + ".jssp";
    REQUIRE(fs::exists(tmp / ("a/" + name)));
    CHECK(slurp(tmp / ("a/" + name)) == slurp(tmp / ("b/" + name)));
  }
  CHECK(fs::exists(tmp / "a/manifest.csv"));
  CHECK(cli({"gen", "--jobs", "3", "--machines", "2", "--count", "0", "--out", tmp / "c"}).code ==
        2);
  CHECK(cli({"gen", "--jobs", "3", "--machines", "2", "--dist", "uniform", "--out", tmp / "c"})
            .code == 2);
  CHECK(cli({"gen", "--machines", "2"}).code == 2);
}

TEST_CASE("train, resume, solve, exact, bench, export") {
  TempDir tmp("jsrl_cli_flow");
  REQUIRE(cli({"gen", "--jobs", "3", "--machines", "3", "--dist", "gaussian:10:3", "--count", "5",
               "--seed", "2", "--out", tmp / "data"})
              .code == 0);

  auto r = cli(concat({"train", "--data", tmp / "data", "--episodes", "6", "--rollouts", "2",
                       "--time-unit", "10", "--workers", "1", "--out", tmp / "run"},
                      kSmallNet));
  REQUIRE(r.code == 0);
  const std::string log = slurp(tmp / "run/train_log.csv");
  CHECK(std::count(log.begin(), log.end(), '\n') == 7);
  REQUIRE(fs::exists(tmp / "run/checkpoint.json"));

  r = cli({"train", "--data", tmp / "data", "--resume", tmp / "run/checkpoint.json", "--episodes",
           "9", "--out", tmp / "run2"});
  REQUIRE(r.code == 0);
  const std::string log2 = slurp(tmp / "run2/train_log.csv");
  CHECK(std::count(log2.begin(), log2.end(), '\n') == 10);
  // phi is relative to the best return so far, everything else is kept verbatim
  auto without_phi = [](const std::string& text) {
    std::vector<std::string> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      std::vector<std::string> cells;
      std::istringstream row(line);
      for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
      cells.erase(cells.begin() + 4);
      std::string joined;
      for (const auto& c : cells) joined += c + ",";
      rows.push_back(joined);
    }
    return rows;
  };
  const auto before = without_phi(log), after = without_phi(log2);
  REQUIRE(after.size() == before.size() + 3);
  CHECK(std::equal(before.begin(), before.end(), after.begin()));
  CHECK(log2.find("\n8,") != std::string::npos);

  r = cli({"solve", "--checkpoint", tmp / "run/checkpoint.json", "--instance",
           tmp / "data/3x3_2_0.jssp", "--out", tmp / "solve"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("makespan=", 0) == 0);
  CHECK(slurp(tmp / "solve/3x3_2_0_schedule.csv").rfind("job,machine,start,completion\n", 0) == 0);

  r = cli({"exact", "--instance", tmp / "data/3x3_2_0.jssp", "--time-limit", "10", "--out",
           tmp / "exact"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("optimal=true") != std::string::npos);
  CHECK(r.out.find("nodes=") != std::string::npos);

  r = cli({"bench", "--data", tmp / "data", "--checkpoint", tmp / "run/checkpoint.json",
           "--time-limit", "5", "--mode", "quality", "--out", tmp / "bench"});
  REQUIRE(r.code == 0);
  const std::string records = slurp(tmp / "bench/records.csv");
  CHECK(std::count(records.begin(), records.end(), '\n') == 11);
  for (const char* f : {"summary.csv", "profile_time.csv", "profile_objective.csv"})
    CHECK(fs::exists(tmp / (std::string("bench/") + f)));

  r = cli({"export", "--instance", tmp / "data/3x3_2_0.jssp", "--out", tmp / "lp"});
  REQUIRE(r.code == 0);
  CHECK(slurp(tmp / "lp/3x3_2_0.lp").find("Binaries") != std::string::npos);
}

TEST_CASE("identical train invocations give identical artifacts") {
  TempDir tmp("jsrl_cli_repro");
  REQUIRE(cli({"gen", "--jobs", "3", "--machines", "2", "--count", "2", "--out", tmp / "d"})
              .code == 0);
  for (const char* out : {"a", "b"})
    REQUIRE(cli(concat({"train", "--data", tmp / "d", "--episodes", "4", "--rollouts", "2",
                        "--seed", "9", "--out", tmp / out},
                       kSmallNet))
                .code == 0);
  CHECK(slurp(tmp / "a/train_log.csv") == slurp(tmp / "b/train_log.csv"));
  CHECK(slurp(tmp / "a/checkpoint.json") == slurp(tmp / "b/checkpoint.json"));
}

TEST_CASE("configuration file with flags taking precedence") {
  TempDir tmp("jsrl_cli_config");
  std::ofstream(tmp / "jobshop.ini") << "[gen]\njobs = 2\nmachines = 2\ncount = 3\nseed = 4\n";
  auto r = cli({"--config", tmp / "jobshop.ini", "gen", "--count", "2", "--out", tmp / "g"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(tmp / "g/2x2_4_1.jssp"));
  CHECK_FALSE(fs::exists(tmp / "g/2x2_4_2.jssp"));
}

TEST_CASE("error exit codes") {
  TempDir tmp("jsrl_cli_errors");
  std::ofstream(tmp / "bad.jssp") << "2 2\n0 1 1 1\n";
  auto r = cli({"exact", "--instance", tmp / "bad.jssp", "--out", tmp / "o"});
  CHECK(r.code == 3);
  CHECK(r.err.rfind("error[data]:", 0) == 0);
  CHECK(r.err.find("line") != std::string::npos);

  r = cli({"solve", "--checkpoint", tmp / "missing.json", "--instance", tmp / "bad.jssp"});
  CHECK(r.code == 3);

  fs::create_directories(tmp.path / "empty");
  r = cli({"train", "--data", tmp / "empty", "--out", tmp / "o"});
  CHECK(r.code == 2);

  REQUIRE(cli({"gen", "--jobs", "2", "--machines", "2", "--out", tmp / "d"}).code == 0);
  r = cli({"train", "--data", tmp / "d", "--episodes", "0", "--out", tmp / "o"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error[config]:", 0) == 0);

  r = cli({"train", "--data", tmp / "d", "--episodes", "2", "--reward-scale", "1e-300", "--out",
           tmp / "nan", "--hidden1", "4", "--hidden2", "4", "--ffn", "4,3,2"});
  CHECK(r.code == 4);
  CHECK(fs::exists(tmp / "nan/diagnostic.json"));

  CHECK(cli({"frobnicate"}).code == 2);
}
