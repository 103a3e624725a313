#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "mmtwa/output.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kQuick =
    " --trajectories 200 --seed 11 --set ramp.t_ramp=10 --set ramp.t_settle=5 --set ramp.t_window=10"
    " --set n_angles=36";

struct Outcome {
  int code = -1;
  std::string err;
};

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mmtwa_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stderr.txt";
  const std::string cmd = std::string(MMTWA_CLI_PATH) + " " + args + " 2>" + log.string() + " >" +
                          (dir / "stdout.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::size_t data_lines(const fs::path& csv) {
  const auto text = slurp(csv);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run writes one band gap and a manifest") {
  const auto dir = fresh_dir("run");
  const auto r = cli("run --set bandgap=0.5" + kQuick + " --workers 2 --output " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const auto csv = dir / "flatflat_point.csv";
  REQUIRE(fs::exists(csv));
  const auto rows = mmtwa::parse_csv(slurp(csv));
  REQUIRE(rows.size() == 6);
  for (int k = 0; k < 6; ++k) {
    CHECK(rows[static_cast<std::size_t>(k)].k == k);
    CHECK(rows[static_cast<std::size_t>(k)].omega0c == 0.5);
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "flatflat_point.manifest.json"));
  CHECK(manifest["master_seed"] == 11);
  CHECK(manifest["workers"] == 2);
  CHECK(manifest["outputs"][0]["path"] == "flatflat_point.csv");
  CHECK(manifest["outputs"][0]["sha256"] == mmtwa::sha256_hex(slurp(csv)));
  const std::string ini = manifest["scenarios"][0]["config"];
  CHECK(ini.find("trajectories = 200") != std::string::npos);
  CHECK(ini.find("omega0 = 0.5") != std::string::npos);
  CHECK(r.err.find("[1/1] omega0c=0.5") != std::string::npos);

  SUBCASE("refuses to overwrite") {
    const auto again = cli("run --set bandgap=0.5" + kQuick + " --output " + dir.string(), dir);
    CHECK(again.code == 1);
    CHECK(again.err.find("already exists") != std::string::npos);
  }
  SUBCASE("reruns are byte-identical") {
    const auto before = slurp(csv);
    const auto again = cli("run --set bandgap=0.5" + kQuick + " --workers 3 --force --output " + dir.string(), dir);
    CHECK(again.code == 0);
    CHECK(slurp(csv) == before);
  }
}

TEST_CASE("configuration errors exit with status 1") {
  const auto dir = fresh_dir("errors");
  auto r = cli("run --set kappa=0 --output " + dir.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("kappa must be positive") != std::string::npos);
  CHECK(r.err.find("invalid configuration\ninvalid") == std::string::npos);
  r = cli("run --set bath.nothing=1 --output " + dir.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown config key") != std::string::npos);
  r = cli("run --scenario nope --output " + dir.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown scenario") != std::string::npos);
  CHECK(cli("oracle nope", dir).code == 1);
  CHECK(cli("frobnicate", dir).code == 1);
  CHECK(cli("run --config /nonexistent.ini", dir).code == 1);
  CHECK(cli("run --workers 0", dir).code == 1);
  CHECK(cli("--help", dir).code == 0);
  CHECK_FALSE(fs::exists(dir / "flatflat_point.csv"));
}

TEST_CASE("config files are read") {
  const auto dir = fresh_dir("config");
  std::ofstream(dir / "user.ini") << "[scenario]\nname = quadcavity\n[cavity]\nomega0 = 0.7\n";
  const auto r = cli("run --config " + (dir / "user.ini").string() + kQuick + " --output " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const auto rows = mmtwa::parse_csv(slurp(dir / "quadcavity_point.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].omega0c == 0.7);
  CHECK(rows[0].annotation == "nonresonant;threshold=0.5");
}

TEST_CASE("sweep covers the band-gap grid") {
  const auto dir = fresh_dir("sweep");
  const auto r = cli("sweep --scenario quadraman --set bandgap_min=0.6 --set bandgap_max=1.0 --set bandgap_points=3" +
                         kQuick + " --output " + dir.string(),
                     dir);
  REQUIRE(r.code == 0);
  const auto rows = mmtwa::parse_csv(slurp(dir / "quadraman.csv"));
  REQUIRE(rows.size() == 18);
  CHECK(rows.front().omega0c == 0.6);
  CHECK(rows.back().omega0c == 1.0);
  CHECK(rows.back().k == 5);
  CHECK(rows.back().annotation == "resonance=1");
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["scenarios"][0]["points"].size() == 3);
  CHECK(manifest["scenarios"][0]["failed_points"] == 0);
  CHECK(manifest["csv_schema"] == "mmtwa-sweep-csv/1");
}

TEST_CASE("singlemode and all") {
  const auto grid = std::string(" --set bandgap_min=0.5 --set bandgap_max=0.5 --set bandgap_points=1");
  auto dir = fresh_dir("singlemode");
  auto r = cli("sweep --scenario singlemode" + grid + kQuick + " --output " + dir.string(), dir);
  REQUIRE(r.code == 0);
  auto rows = mmtwa::parse_csv(slurp(dir / "singlemode.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].scenario == "singlemode_ref");
  CHECK(rows[1].scenario == "singlemode_eff");

  dir = fresh_dir("all");
  r = cli("sweep --scenario all --profile ci" + grid +
              " --seed 3 --set ramp.t_ramp=10 --set ramp.t_settle=5 --set ramp.t_window=5 --set n_angles=36"
              " --output " + dir.string(),
          dir);
  REQUIRE(r.code == 0);
  for (const char* name : {"flatflat", "quadraman", "quadcavity", "thermal"}) {
    CAPTURE(name);
    CHECK(data_lines(dir / (std::string(name) + ".csv")) == 6);
  }
  CHECK(data_lines(dir / "singlemode.csv") == 2);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["outputs"].size() == 5);
  CHECK(manifest["scenarios"].size() == 6);
  const std::string ini = manifest["scenarios"][0]["config"];
  CHECK(ini.find("trajectories = 500") != std::string::npos);
  rows = mmtwa::parse_csv(slurp(dir / "thermal.csv"));
  CHECK(rows[0].dV_E_th.has_value());
}

TEST_CASE("every point failing exits with status 3") {
  const auto dir = fresh_dir("failing");
  const auto r = cli("run --trajectories 4 --set ramp.t_ramp=10 --set ramp.t_settle=5 --set ramp.t_window=5"
                     " --output " + dir.string(),
                     dir);
  CHECK(r.code == 3);
  CHECK(r.err.find("FAILED") != std::string::npos);
  const auto rows = mmtwa::parse_csv(slurp(dir / "flatflat_point.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].annotation.rfind("failed: ", 0) == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "flatflat_point.manifest.json"));
  CHECK(manifest["scenarios"][0]["failed_points"] == 1);
}

TEST_CASE("oracle subcommand") {
  const auto dir = fresh_dir("oracle");
  auto r = cli("oracle drift", dir);
  CHECK(r.code == 0);
  const auto out = slurp(dir / "stdout.txt");
  CHECK(out.find("drift: PASS") != std::string::npos);
  r = cli("oracle squeezing", dir);
  CHECK(r.code == 0);
  r = cli("oracle fdt --trajectories 128 --set grid.half_width=1 --workers 2", dir);
  CHECK(r.code == 0);
  CHECK(slurp(dir / "stdout.txt").find("fdt: PASS") != std::string::npos);
}

}
