#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dtn");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dtn::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / "dtn_test_cli";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::size_t lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("argument errors exit with 2") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"branch", "--domain", "disc", "--count", "1"}).code == 2);
  CHECK(invoke({"branch", "--domain", "disc", "--tol", "0.5"}).code == 2);
  CHECK(invoke({"branch", "--domain", "torus"}).code == 2);
  CHECK(invoke({"spectrum"}).code == 2);
  CHECK(invoke({"spectrum", "--domain", "disc", "--format", "xml"}).code == 2);
  CHECK(invoke({"model", "--seed", "12abc"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("spectrum CSV") {
  const auto r = invoke({"spectrum", "--domain", "square", "--e-max", "90"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("E,multiplicity,labels\n", 0) == 0);
  CHECK(lines(r.out) == 4);
  CHECK(r.out.find("\"(1,2);(2,1)\"") != std::string::npos);
  const auto j = invoke({"spectrum", "--domain", "ball", "--e-max", "40", "--format", "json"});
  REQUIRE(j.code == 0);
  const auto parsed = nlohmann::json::parse(j.out);
  CHECK(parsed.size() == 4);
  CHECK(parsed[0]["domain"] == "ball");
}

TEST_CASE("branch sweep rows, pole markers and determinism") {
  const std::vector<std::string> args{"branch", "--domain", "disc", "--z-min", "0", "--z-max", "5.783185962946785",
                                      "--count", "11", "--k", "0", "1"};
  const auto a = invoke(args), b = invoke(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("z,branch_k,value,tail_bound,pole_distance\n", 0) == 0);
  CHECK(lines(a.out) == 1 + 22);
  CHECK(a.out.find(",0,pole,,") != std::string::npos);
  CHECK(a.out.find(",1,pole,,") == std::string::npos);
}

TEST_CASE("configuration file with flag override") {
  const auto cfg = scratch("sweep.cfg");
  {
    std::ofstream f(cfg);
    f << "domain=ball\nz-min=-3\nz-max=3\ncount=4\n";
  }
  const auto r = invoke({"--config", cfg.string(), "branch", "--count", "6"});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out) == 7);
  CHECK(r.out.find("\n-3,0,") != std::string::npos);
}

TEST_CASE("--out writes the artifact atomically; bad path exits with 1") {
  const auto path = scratch("spectrum.csv");
  std::filesystem::remove(path);
  const auto r = invoke({"spectrum", "--domain", "disc", "--e-max", "50", "--out", path.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(dtn::read_file(path) == invoke({"spectrum", "--domain", "disc", "--e-max", "50"}).out);
  CHECK(invoke({"spectrum", "--domain", "disc", "--out", (scratch("nope") / "a" / "b.csv").string()}).code == 1);
  CHECK(invoke({"model", "--model", scratch("absent.json").string()}).code == 1);
}

TEST_CASE("model subcommand") {
  const auto r = invoke({"model", "--n", "8", "--m", "3", "--trials", "5", "--seed", "0x7"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["passed"] == true);
  CHECK(j["models"] == 5);

  const auto singular = scratch("singular.json");
  {
    std::ofstream f(singular);
    f << R"({"n": 3, "m": 1, "E": [1,0,0, 0,0,0, 0,0,0], "J": [1,0,0]})";
  }
  CHECK(invoke({"model", "--model", singular.string()}).code == 3);

  const auto invalid = scratch("invalid.json");
  {
    std::ofstream f(invalid);
    f << "{ broken";
  }
  CHECK(invoke({"model", "--model", invalid.string()}).code == 2);
}

TEST_CASE("laurent and robin JSON") {
  const auto l = invoke({"laurent", "--domain", "disc", "--e-max", "30", "--k", "0"});
  REQUIRE(l.code == 0);
  const auto jl = nlohmann::json::parse(l.out);
  CHECK(jl["domain"] == "disc");
  CHECK(!jl["poles"].empty());
  const auto r = invoke({"robin", "--domain", "disc", "--e-max", "20", "--beta", "0.5", "--draws", "3", "--count", "20"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["beta"] == 0.5);
}
