#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cli_commands.hpp"
#include "cli_config.hpp"
#include "doctest.h"
#include "fluxmod/errors.hpp"
#include "fluxmod/units.hpp"

using namespace fluxmod;
using namespace fluxmod::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fluxmod_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd =
      std::string(FLUXMOD_CLI_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("strict merge rejects unknown keys and type changes") {
  Json cfg = default_config();
  CHECK_THROWS_AS(merge_strict(cfg, Json{{"nosuch", 1}}, ""), ConfigError);
  CHECK_THROWS_AS(merge_strict(cfg, Json{{"noise", {{"alpha", "one"}}}}, ""), ConfigError);
  CHECK_THROWS_AS(merge_strict(cfg, Json{{"seed", 1.5}}, ""), ConfigError);
  CHECK_THROWS_AS(merge_strict(cfg, Json{{"grid", {{"phi_ac_list_phi0", {"a"}}}}}, ""),
                  ConfigError);
  CHECK_NOTHROW(merge_strict(cfg, Json{{"noise", {{"alpha", 1}}}}, ""));
  CHECK_NOTHROW(merge_strict(cfg, Json{{"grid", {{"phi_ac_list_phi0", {0.1, 0.2}}}}}, ""));
  CHECK(cfg["grid"]["phi_ac_list_phi0"].size() == 2);
}

TEST_CASE("device blocks take either a band or circuit parameters") {
  Json cfg = default_config();
  CHECK_THROWS_AS(merge_strict(cfg, Json::parse(R"({"device":{"band":{"f_max_hz":5e9},
      "params":{"e_c_hz":2e8}}})"), ""), ConfigError);
  merge_strict(cfg, Json::parse(R"({"device":{"params":{"e_c_hz":2.2e8,"e_j1_hz":1e10,"e_j2_hz":5e9}}})"), "");
  CHECK(cfg["device"]["band"].is_null());
  CHECK_NOTHROW(validate_config(cfg));
  const auto p = device_params(cfg["device"]);
  CHECK(p.e_c == doctest::Approx(hz_to_angular(2.2e8)));
  CHECK(p.e_j2 == doctest::Approx(hz_to_angular(5e9)));

  Json bad = default_config();
  bad["device"]["band"] = nullptr;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
}

TEST_CASE("assignments parse JSON values with a string fallback") {
  Json cfg = default_config();
  apply_assignment(cfg, "modulation.f_m_hz=2.5e8");
  apply_assignment(cfg, "dephasing.mode=mc");
  apply_assignment(cfg, "grid.phi_ac_list_phi0=[0.1,0.3]");
  apply_assignment(cfg, "noise.shared_filter=true");
  CHECK(cfg["modulation"]["f_m_hz"] == 2.5e8);
  CHECK(cfg["dephasing"]["mode"] == "mc");
  CHECK(cfg["noise"]["shared_filter"] == true);
  CHECK(flux_grid(cfg["grid"], "phi_ac") == std::vector<double>{0.1, 0.3});
  CHECK_THROWS_AS(apply_assignment(cfg, "modulation.f_m_hz"), ConfigError);
  CHECK_THROWS_AS(apply_assignment(cfg, "modulation..f_m_hz=1"), ConfigError);
  CHECK_THROWS_AS(apply_assignment(cfg, "modulation.f_m=1"), ConfigError);
  apply_assignment(cfg, "dephasing.mode=sometimes");
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("typed views") {
  const Json cfg = default_config();
  const auto grid = flux_grid(cfg["grid"], "phi_ac");
  REQUIRE(grid.size() == 36);
  CHECK(grid[0] == 0.0);
  CHECK(grid[35] == 0.7);
  CHECK(grid[5] == 0.1);
  const auto pink = mc_budget(cfg["mc"]["pink"], false, 200, 2);
  CHECK(pink.dt == 50e-9);
  CHECK(pink.threads == 2);
  const auto white = mc_budget(cfg["mc"]["white"], true, 200, 1);
  CHECK(white.dt_white == 0.0);
  Json bad = cfg["mc"]["pink"];
  bad["n_traces"] = 0;
  CHECK_THROWS_AS(mc_budget(bad, false, 200, 1), ConfigError);
  const auto sys = two_qubit_system(cfg["two_qubit"]);
  CHECK(sys.gammaphi_f == doctest::Approx(1.0 / 150e-6 - 0.5 / 150e-6));
  CHECK(parse_gate("iswap") == twoqubit::Gate::iswap);
  CHECK_THROWS_AS(parse_gate("cnot"), ConfigError);
  Json n = cfg["noise"];
  n["alpha"] = 3.0;
  CHECK_THROWS_AS(noise_spec(n), ConfigError);
}

TEST_CASE("calibrate and sweet-spot artifacts") {
  const auto dir = scratch("cal");
  Json cfg = default_config();
  run_command("calibrate", cfg, dir);
  const Json cal = Json::parse(slurp(dir / "calibrate.json"));
  CHECK(cal["max_rel_error"].get<double>() < 1e-9);
  CHECK(cal["forward"]["f_max_hz"].get<double>() == doctest::Approx(5.1e9));

  cfg["sweet_spot"]["joint"] = true;
  const auto files = run_command("sweet-spot", cfg, dir);
  CHECK(files.size() == 1);
  const Json ss = Json::parse(slurp(dir / "sweet_spot.json"));
  CHECK(ss["phi_ac_star"].get<double>() == doctest::Approx(0.5985).epsilon(2e-3));
  CHECK(ss.contains("joint"));
  CHECK_THROWS_AS(run_command("no-such", cfg, dir), ConfigError);
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
  Json cfg = default_config();
  cfg["trace"]["n_samples"] = 4096;
  cfg["grid"]["n_points"] = 8;
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  for (const char* cmd : {"noise-gen", "dephasing", "fourier"}) {
    run_command(cmd, cfg, a);
  }
  cfg["threads"] = 3;
  for (const char* cmd : {"noise-gen", "dephasing", "fourier"}) {
    run_command(cmd, cfg, b);
  }
  for (const char* f : {"trace_pink.csv", "trace_white.csv", "dephasing.csv", "fourier.csv"}) {
    const auto x = slurp(a / f);
    CHECK(!x.empty());
    CHECK(x == slurp(b / f));
  }
  CHECK(slurp(a / "dephasing.csv").rfind("phi_ac_phi0,tphi_pink_s,tphi_white_s,", 0) == 0);
  CHECK(slurp(a / "trace_pink.csv").rfind("t_s,dphi_phi0\n0,", 0) == 0);

  cfg["seed"] = 2;
  const auto c = scratch("det_c");
  run_command("noise-gen", cfg, c);
  CHECK(slurp(a / "trace_pink.csv") != slurp(c / "trace_pink.csv"));
}

TEST_CASE("executable exit codes and error payloads") {
  const auto dir = scratch("exe");
  const auto err = dir / "stderr.txt";
  CHECK(run_cli("--out " + dir.string() + " calibrate", err) == 0);
  CHECK(fs::exists(dir / "calibrate.json"));
  const Json run = Json::parse(slurp(dir / "run.json"));
  CHECK(run["command"] == "calibrate");
  CHECK(run["config"]["seed"] == 1);

  CHECK(run_cli("--out " + dir.string() + " --set noise.nope=1 calibrate", err) == 2);
  const Json e = Json::parse(slurp(err));
  CHECK(e["error"]["code"] == 2);
  CHECK(e["error"]["type"] == "ConfigError");

  CHECK(run_cli("--out " + dir.string() + " bogus", err) == 2);
  CHECK(run_cli("--out " + dir.string() +
                    " --set device.band.f_min_hz=6e9 calibrate",
                err) != 0);
  CHECK(run_cli("--out " + dir.string() +
                    " --set sweet_spot.lo_phi0=0.1 --set sweet_spot.hi_phi0=0.2 sweet-spot",
                err) == 3);
  CHECK(Json::parse(slurp(err))["error"]["code"] == 3);
}
