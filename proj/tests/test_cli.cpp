#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doctest.h"
#include "hsgt/cli.hpp"

using namespace hsgt;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run hsgt_run(std::vector<std::string> args) {
  args.insert(args.begin(), "hsgt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config(const std::string& name) { return std::string(HSGT_CONFIG_DIR) + "/" + name; }

// Writes `text` to a fresh file in the temp directory.
std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("hsgt_test_" + name);
  std::ofstream(path) << text;
  return path.string();
}

json e1() {
  std::ifstream in(config("e1.json"));
  return json::parse(in);
}

}  // namespace

TEST_CASE("check-gains exit codes") {
  auto r = hsgt_run({"check-gains", "--config", config("e1.json")});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["small_gain"]["status"] == "holds");

  r = hsgt_run({"check-gains", "--config", config("e1_kappa15.json")});
  CHECK(r.code == 1);
  const auto rep = json::parse(r.out);
  CHECK(rep["small_gain"]["status"] == "fails");
  CHECK(rep["small_gain"]["cycle_witness"]["cycle"] == json::array({1, 2}));
  CHECK_FALSE(rep["small_gain"]["vector_witness"].is_null());

  auto bad = e1();
  bad["gains"]["internal"][0][1] = "0.5*s +* 2";
  r = hsgt_run({"check-gains", "--config", temp_file("bad_expr.json", bad.dump())});
  CHECK(r.code == 2);
  CHECK(r.err.find("gains.internal[0][1]") != std::string::npos);
  CHECK(r.err.find("offset") != std::string::npos);

  r = hsgt_run({"check-gains", "--config", temp_file("not_json.json", "{ nope")});
  CHECK(r.code == 2);
  r = hsgt_run({"check-gains", "--config", "/nonexistent/config.json"});
  CHECK(r.code == 2);
  r = hsgt_run({"check-gains"});
  CHECK(r.code == 2);
  r = hsgt_run({"no-such-command", "--config", config("e1.json")});
  CHECK(r.code == 2);
}

TEST_CASE("build-lyapunov") {
  auto r = hsgt_run({"build-lyapunov", "--config", config("e1.json")});
  REQUIRE(r.code == 0);
  const auto cert = json::parse(r.out)["certificate"];
  for (const auto& s : cert["sigma"])
    for (const auto& p : s["samples"]) CHECK(p[1].get<double>() == doctest::Approx(p[0].get<double>()));
  CHECK(cert["lambda"]["samples"][2][1].get<double>() == doctest::Approx(0.5));
  CHECK(cert["gamma"]["samples"][2][1].get<double>() == doctest::Approx(0.5));

  CHECK(hsgt_run({"build-lyapunov", "--config", config("single.json")}).code == 0);
  CHECK(hsgt_run({"build-lyapunov", "--config", config("e1_kappa15.json")}).code == 1);

  auto missing = e1();
  missing["lyapunov"][1].erase("V");
  r = hsgt_run({"build-lyapunov", "--config", temp_file("missing_v.json", missing.dump())});
  CHECK(r.code == 2);
  CHECK(r.err.find("lyapunov[1].V") != std::string::npos);
}

TEST_CASE("verify") {
  CHECK(hsgt_run({"verify", "--config", config("e1.json"), "--which", "composite"}).code == 0);
  CHECK(hsgt_run({"verify", "--config", config("e1.json"), "--which", "subsystem"}).code == 0);
  CHECK(hsgt_run({"verify", "--config", config("e1_kappa15_stable_gains.json"), "--which", "subsystem"}).code == 1);

  auto forged = e1();
  forged["lyapunov"][0]["alpha"] = "10*s";
  auto r = hsgt_run({"verify", "--config", temp_file("forged.json", forged.dump()), "--which", "subsystem"});
  CHECK(r.code == 1);
  const auto rep = json::parse(r.out);
  bool has_samples = false;
  for (const auto& c : rep["reports"][0]["conditions"]) has_samples = has_samples || !c["violations"].empty();
  CHECK(has_samples);

  auto mixed = e1();
  mixed["network"]["subsystems"][1]["jump_set"] = "2 - max(abs(x1), abs(x2))";
  r = hsgt_run({"verify", "--config", temp_file("mixed.json", mixed.dump()), "--which", "composite"});
  CHECK(r.code == 1);
  CHECK(json::parse(r.out)["error"].get<std::string>().find("common jump set") != std::string::npos);

  CHECK(hsgt_run({"verify", "--config", config("e1.json"), "--which", "bogus"}).code == 2);
}

TEST_CASE("simulate") {
  const auto csv = std::filesystem::temp_directory_path() / "hsgt_test_sim.csv";
  auto r = hsgt_run({"simulate", "--config", config("e1_decoupled.json"), "--out", csv.string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["jumps"] == 2);
  std::ifstream in(csv);
  std::string line;
  bool found = false;
  while (std::getline(in, line))
    if (line.rfind("1,2,", 0) == 0) {
      found = true;
      CHECK(std::abs(std::stod(line.substr(4)) - 0.5 * std::exp(-1.0)) < 1e-6);
    }
  CHECK(found);

  r = hsgt_run({"simulate", "--config", config("e1_decoupled.json"), "--horizon", "0", "--max-jumps", "0"});
  CHECK(r.code == 0);
  CHECK(r.out == "t,k,x_1,x_2,phase\n");

  r = hsgt_run({"simulate", "--config", config("frozen.json")});
  CHECK(r.code == 0);
  std::istringstream rows(r.out);
  std::getline(rows, line);
  int jumps = 0;
  while (std::getline(rows, line)) {
    CHECK(line == "0," + std::to_string(jumps) + ",1,5,jump");
    ++jumps;
  }
  CHECK(jumps == 6);

  CHECK(hsgt_run({"simulate", "--config", config("e1_decoupled.json"), "--x0", "1,oops"}).code == 2);
  CHECK(hsgt_run({"simulate", "--config", config("e1_decoupled.json"), "--x0", "1"}).code == 2);
}

TEST_CASE("check-traj") {
  CHECK(hsgt_run({"check-traj", "--config", config("e1.json")}).code == 0);
  CHECK(hsgt_run({"check-traj", "--config", config("frozen.json")}).code == 1);
  auto empty = e1();
  empty["analysis"]["trajectories"]["initial_conditions"] = json::array();
  CHECK(hsgt_run({"check-traj", "--config", temp_file("empty.json", empty.dump())}).code == 2);
}

TEST_CASE("reports are deterministic and seedable") {
  const auto a = hsgt_run({"verify", "--config", config("e1.json"), "--which", "composite", "--seed", "7"});
  const auto b = hsgt_run({"verify", "--config", config("e1.json"), "--which", "composite", "--seed", "7"});
  CHECK(a.out == b.out);
  const auto c = hsgt_run({"verify", "--config", config("single.json"), "--which", "composite", "--seed", "3"});
  const auto d = hsgt_run({"verify", "--config", config("single.json"), "--which", "composite", "--seed", "4"});
  CHECK(c.code == 0);
  CHECK(c.out != d.out);
}
