#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "madspip/bench.hpp"
#include "madspip/cli.hpp"

using namespace madspip;
using namespace madspip::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run(args, out, err);
  return {status, out.str(), err.str()};
}

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& tag) {
    path = fs::temp_directory_path() / ("madspip_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::vector<fs::path> files_with(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("seed and tau lists") {
  CHECK(parse_seeds("1-3,7") == std::vector<std::uint64_t>{1, 2, 3, 7});
  CHECK(parse_seeds("5") == std::vector<std::uint64_t>{5});
  CHECK_THROWS_AS(parse_seeds("3-1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_seeds("a"), std::invalid_argument);
  CHECK(parse_taus("0.1,0.001") == std::vector<double>{0.1, 0.001});
  CHECK(parse_taus("none").empty());
  CHECK(parse_taus("").empty());
  CHECK_THROWS_AS(parse_taus("0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_taus("-1e-3"), std::invalid_argument);
}

TEST_CASE("flags override the config file") {
  Scratch dir("config");
  std::ofstream(dir / "run.ini") << "budget = 300\nseeds = 1-4\nmode = pip\nno-search = true\n";
  std::ofstream(dir / "bad.ini") << "budget = 300\ncolour = blue\n";

  const CliConfig defaults = parse_args({"bench"});
  CHECK(defaults.budget == 1500);
  CHECK(defaults.seeds == "1-10");
  CHECK_FALSE(defaults.no_search);

  const CliConfig from_file = parse_args({"bench", "--config", dir / "run.ini"});
  CHECK(from_file.budget == 300);
  CHECK(from_file.seeds == "1-4");
  CHECK(from_file.mode == "pip");
  CHECK(from_file.no_search);

  const CliConfig both =
      parse_args({"bench", "--config", dir / "run.ini", "--budget", "50", "--seeds", "2"});
  CHECK(both.budget == 50);
  CHECK(both.seeds == "2");
  CHECK(both.mode == "pip");

  const CliConfig flags_only = parse_args({"bench", "--budget", "50"});
  CHECK(flags_only.budget == 50);
  CHECK(flags_only.seeds == "1-10");

  try {
    parse_args({"bench", "--config", dir / "bad.ini"});
    FAIL("unknown key accepted");
  } catch (const UsageError& e) {
    CHECK(e.status == 2);
  }
}

TEST_CASE("bad command lines") {
  CHECK(call({}).status == 2);
  CHECK(call({"frobnicate"}).status == 2);
  CHECK(call({"solve", "--budget", "0"}).status == 2);
  CHECK(call({"solve", "--bogus"}).status == 2);
  const Result help = call({"--help"});
  CHECK(help.status == 0);
  CHECK(help.out.find("--problem") != std::string::npos);
  CHECK(call({"solve"}).status == 2);
  CHECK(call({"solve", "--problem", "nope"}).status == 2);
  CHECK(call({"solve", "--problem", "unit-disk", "--mode", "slow"}).status == 2);
}

TEST_CASE("solve writes the history and prints a summary") {
  Scratch dir("solve");
  const Result r = call({"solve", "--problem", "unit-disk", "--x0", "infeas-0", "--budget", "200",
                         "--seed", "3", "--out", dir / "o", "--check-invariants"});
  CHECK(r.status == 0);
  CHECK(r.out.find("unit-disk") != std::string::npos);
  CHECK(r.err.find("invariant:") == std::string::npos);
  const fs::path file = fs::path(dir / "o") / "unit-disk__infeas-0__s3__pip.jsonl";
  REQUIRE(fs::exists(file));
  const RunTrace t = read_history(file);
  CHECK(t.evals.size() <= 200);
  CHECK(t.key.seed == 3);

  // literal starting point
  CHECK(call({"solve", "--problem", "unit-disk", "--x0", "0.1,0.1", "--budget", "20", "--out",
              dir / "o"})
            .status == 0);
  CHECK(fs::exists(fs::path(dir / "o") / "unit-disk__custom__s1__pip.jsonl"));
  // wrong dimension
  CHECK(call({"solve", "--problem", "unit-disk", "--x0", "0.1", "--out", dir / "o"}).status == 2);
}

TEST_CASE("solve rejects what it cannot run") {
  Scratch dir("reject");
  const Result eb = call({"solve", "--problem", "sphere-eq-5", "--mode", "extreme-barrier",
                          "--budget", "50", "--out", dir / "o"});
  CHECK(eb.status == 2);
  CHECK(eb.err.find("error") != std::string::npos);
  CHECK(call({"solve", "--problem", "unit-disk", "--eval-exe", "/bin/true", "--out", dir / "o"})
            .status == 2);
}

TEST_CASE("solve with an external blackbox") {
  Scratch dir("ext");
  {
    std::ofstream(dir / "bb.sh") << "#!/bin/sh\nread a b\n"
                                    "echo \"$a $b\" | awk '{print $1*$1+$2*$2, $1+$2-1}'\n";
    fs::permissions(dir / "bb.sh", fs::perms::owner_all);
    std::ofstream(dir / "p.txt") << "name = halfplane\nn = 2\nm = 1\np = 0\n"
                                    "lower = -2,-2\nupper = 2,2\nevaluator = bb.sh\nx0 = -1,-1\n";
  }
  const Result r = call({"solve", "--problem", dir / "p.txt", "--budget", "25", "--out", dir / "o"});
  CHECK(r.status == 0);
  CHECK(fs::exists(fs::path(dir / "o") / "halfplane__custom__s1__pip.jsonl"));
}

TEST_CASE("bench then profile") {
  Scratch dir("bench");
  const std::string out = dir / "runs";
  const Result b = call({"bench", "--problem", "unit-disk,sphere-eq-3", "--seeds", "1-2",
                         "--budget", "60", "--out", out, "--workers", "2"});
  CHECK(b.status == 0);
  // 2 problems x 2 x0 x 2 seeds x 2 modes; EB cannot start on sphere-eq-3
  CHECK(files_with(out, ".jsonl").size() == 16);
  CHECK(b.err.find("failed") != std::string::npos);

  // a second bench skips everything in the manifest
  const Result again = call({"bench", "--problem", "unit-disk,sphere-eq-3", "--seeds", "1-2",
                             "--budget", "60", "--out", out});
  CHECK(again.out.find("0 runs") != std::string::npos);

  const Result p = call({"profile", "--out", out});
  CHECK(p.status == 0);
  CHECK(fs::exists(fs::path(out) / "data_profile_tau0.1.csv"));
  CHECK(fs::exists(fs::path(out) / "data_profile_tau0.001.csv"));
  CHECK(fs::exists(fs::path(out) / "feasibility_profile.svg"));
  const auto curves = import_csv(fs::path(out) / "feasibility_profile.csv");
  REQUIRE(curves.size() == 2);
  CHECK(curves[1].label == "pip");
  CHECK(curves[1].fraction.back() == 1.0);

  Scratch only_feas("nofeas");
  fs::copy(out, only_feas / "runs");
  for (const auto& f : files_with(only_feas / "runs", ".csv")) fs::remove(f);
  CHECK(call({"profile", "--out", only_feas / "runs", "--tau", "none"}).status == 0);
  CHECK(files_with(only_feas / "runs", ".csv").size() == 1);

  // a corrupt history is skipped with a warning
  std::ofstream(fs::path(out) / "zz_corrupt.jsonl") << "{\"header\": tru\n";
  const Result warn = call({"profile", "--out", out});
  CHECK(warn.status == 0);
  CHECK(warn.err.find("warning: skipping zz_corrupt.jsonl") != std::string::npos);

  fs::create_directories(dir / "empty");
  CHECK(call({"profile", "--out", dir / "empty"}).status == 2);
  CHECK(call({"profile", "--out", dir / "absent"}).status == 2);
  CHECK(call({"profile", "--out", out, "--tau", "0"}).status == 2);
}

TEST_CASE("list prints the builtin problems") {
  const Result r = call({"list"});
  CHECK(r.status == 0);
  for (const char* name :
       {"unit-disk", "sphere-eq-5", "sphere-eq-3", "mixed-kkt", "maxabs-lin", "two-ring"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
  CHECK(r.out.find("n=5 m=0 p=1") != std::string::npos);
}
