#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mmtwa/config.hpp"

using namespace mmtwa;

TEST_SUITE("config") {

TEST_CASE("every preset loads and validates") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto c = load_config(nullptr, name, {});
    CHECK(c.scenario == name);
    CHECK(c.protocol.n_trajectories == 3500);
    CHECK(c.protocol.dt == 0.005);
    CHECK(c.bandgaps.values().size() == 31);
    CHECK(c.spec.kappa == 0.02);
    CHECK(c.spec.gamma == 0.02);
    CHECK(c.spec.g4 == 0.01);
    CHECK(c.values.size() == config_keys().size());
  }
  CHECK(preset_names().size() == 6);
  CHECK_THROWS_WITH_AS(preset_text("nope"), doctest::Contains("unknown scenario 'nope'"), ConfigError);
}

TEST_CASE("preset contents") {
  const auto ff = load_config(nullptr, "flatflat", {});
  CHECK(ff.spec.grid.half_width == 5);
  CHECK(ff.spec.grid.wrap == WrapPolicy::Wrap);
  CHECK(ff.spec.g == 0.04);
  CHECK(ff.protocol.master_seed == 0x5eed2024ULL);
  CHECK(ff.protocol.ramp.t_ramp == 600.0);
  const auto qr = load_config(nullptr, "quadraman", {});
  CHECK(qr.spec.raman.kind == DispersionKind::Quadratic);
  CHECK(qr.spec.raman.bandwidth == 1.0);
  const auto qc = load_config(nullptr, "quadcavity", {});
  CHECK(qc.spec.cavity.kind == DispersionKind::Quadratic);
  CHECK(load_config(nullptr, "thermal", {}).spec.temperature == 2.0);
  const auto ref = load_config(nullptr, "singlemode_ref", {});
  CHECK(ref.spec.grid.half_width == 0);
  CHECK(ref.spec.g == doctest::Approx(0.04 / std::sqrt(11.0)).epsilon(1e-15));
  const auto eff = load_config(nullptr, "singlemode_eff", {});
  CHECK(eff.spec.g == 0.04);
  const auto grid = ff.bandgaps.values();
  CHECK(grid.front() == 0.2);
  CHECK(grid.back() == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(grid[20] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("key resolution") {
  CHECK(resolve_key("bandgap") == "cavity.omega0");
  CHECK(resolve_key("omega0c") == "cavity.omega0");
  CHECK(resolve_key("scenario") == "scenario.name");
  CHECK(resolve_key("kappa") == "bath.kappa");
  CHECK(resolve_key(" ensemble.seed ") == "ensemble.seed");
  CHECK_THROWS_WITH_AS(resolve_key("omega0"), doctest::Contains("ambiguous config key 'omega0'"), ConfigError);
  CHECK_THROWS_WITH_AS(resolve_key("bath.omega"), doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_AS(resolve_key("nothing"), ConfigError);
}

TEST_CASE("overrides") {
  const auto c = load_config(nullptr, "", {"bandgap=0.7", "seed=42", "trajectories=12", "wrap=truncate"});
  CHECK(c.scenario == "flatflat");
  CHECK(c.spec.cavity.base == 0.7);
  CHECK(c.protocol.master_seed == 42);
  CHECK(c.protocol.n_trajectories == 12);
  CHECK(c.spec.grid.wrap == WrapPolicy::Truncate);
  CHECK(c.values.at("cavity.omega0") == "0.7");
  CHECK(load_config(nullptr, "", {"seed=0x10"}).protocol.master_seed == 16);
  CHECK(load_config(nullptr, "", {"scenario=thermal"}).spec.temperature == 2.0);
  CHECK(load_config(nullptr, "", {"paired_baseline=no"}).protocol.paired_baseline == false);
  CHECK_THROWS_AS(load_config(nullptr, "", {"kappa"}), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(nullptr, "", {"g=abc"}), doctest::Contains("coupling.g"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(nullptr, "", {"wrap=periodic"}), doctest::Contains("wrap or truncate"),
                       ConfigError);
}

TEST_CASE("invalid values are reported together") {
  try {
    load_config(nullptr, "", {"kappa=0", "gamma=-1", "trajectories=1", "n_angles=2"});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("kappa must be positive") != std::string::npos);
    CHECK(what.find("gamma must be positive") != std::string::npos);
    CHECK(what.find("trajectories") != std::string::npos);
    CHECK(what.find("n_angles") != std::string::npos);
    CHECK(e.report().violations.size() == 4);
  }
}

TEST_CASE("precedence: preset, then file, then overrides") {
  const std::string file = "[scenario]\nname = quadraman\n[bath]\nkappa = 0.05\ngamma = 0.03\n";
  const auto c = load_config_text(file, "", {"gamma=0.04"});
  CHECK(c.scenario == "quadraman");
  CHECK(c.spec.raman.kind == DispersionKind::Quadratic);
  CHECK(c.spec.kappa == 0.05);
  CHECK(c.spec.gamma == 0.04);
  CHECK(load_config_text(file, "quadcavity", {}).scenario == "quadcavity");
  CHECK(load_config_text(file, "", {"scenario=thermal"}).scenario == "thermal");

  const auto path = std::filesystem::temp_directory_path() / "mmtwa_config_test.ini";
  std::ofstream(path) << file;
  CHECK(load_config(&path, "", {}).spec.kappa == 0.05);
  std::filesystem::remove(path);
  const std::filesystem::path missing = "/nonexistent/mmtwa.ini";
  CHECK_THROWS_AS(load_config(&missing, "", {}), ConfigError);
}

TEST_CASE("ini parsing errors") {
  CHECK_THROWS_WITH_AS(parse_ini("[bath]\nkapa = 1\n", "f.ini"), doctest::Contains("unknown config key 'bath.kapa'"),
                       ConfigError);
  CHECK_THROWS_AS(parse_ini("loose = 1\n", "f.ini"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_ini("[bath\nkappa = 1\n", "f.ini"), doctest::Contains("f.ini"), ConfigError);
}

TEST_CASE("serialized values reproduce the configuration") {
  const auto c = load_config(nullptr, "thermal", {"bandgap=0.62", "seed=7", "dt=0.0025"});
  const std::string ini = to_ini(c.values);
  CHECK(parse_ini(ini, "snapshot") == c.values);
  const auto again = build_config(parse_ini(ini, "snapshot"));
  CHECK(again.spec == c.spec);
  CHECK(again.protocol.master_seed == c.protocol.master_seed);
  CHECK(again.protocol.dt == c.protocol.dt);
  CHECK(to_ini(again.values) == ini);
  CHECK(ini.rfind("[scenario]\nname = thermal\n", 0) == 0);
}

TEST_CASE("shortest round-trip formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.52) == "0.52");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

}
