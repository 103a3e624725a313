#include <doctest.h>

#include <nlohmann/json.hpp>

#include "mmtwa/output.hpp"

using namespace mmtwa;

namespace {

SweepRow sample_row(int k) {
  SweepRow r;
  r.scenario = "quadcavity";
  r.omega0c = 0.62;
  r.k = k;
  r.dV_E = 0.123456789012;
  r.dV_E_err = 1e-5;
  r.dV_Q = -0.25;
  r.dV_Q_err = 0.0125;
  r.V_E_g = 1.25;
  r.V_E_0 = 1.0;
  r.V_Q_g = 0.75;
  r.V_Q_0 = 1.0;
  r.mean_Q_re = -3.5e-7;
  r.mean_Q_err = 2e-3;
  if (k == 0) {
    r.theta_min = 0.0;
    r.V_min = 0.9;
    r.V_max = 1.1;
  }
  r.annotation = "nonresonant;threshold=0.5";
  return r;
}

}  // namespace

TEST_SUITE("output") {

TEST_CASE("column layout") {
  const std::vector<std::string> expected{
      "scenario", "omega0c",  "k",         "dV_E",       "dV_E_err",  "dV_Q",  "dV_Q_err",
      "V_E_g",    "V_E_0",    "V_Q_g",     "V_Q_0",      "dV_E_th",   "dV_Q_th", "dVp_Q_th",
      "mean_Q_re", "mean_Q_err", "theta_min", "V_min", "V_max", "annotation"};
  CHECK(csv_columns() == expected);
  CHECK(to_csv({}) ==
        "scenario,omega0c,k,dV_E,dV_E_err,dV_Q,dV_Q_err,V_E_g,V_E_0,V_Q_g,V_Q_0,dV_E_th,dV_Q_th,dVp_Q_th,"
        "mean_Q_re,mean_Q_err,theta_min,V_min,V_max,annotation\n");
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.123456789012) == "0.123456789");
  CHECK(format_number(-3.5e-7) == "-3.5e-07");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(123456789.4) == "123456789");
}

TEST_CASE("rows survive a write and read") {
  std::vector<SweepRow> rows{sample_row(0), sample_row(1), sample_row(2)};
  rows[1].annotation = "failed: baseline, \"V\" consistent with zero";
  rows[2].dV_E.reset();
  rows[2].annotation.clear();
  const std::string text = to_csv(rows);
  CHECK(text.find("\"failed: baseline, \"\"V\"\" consistent with zero\"") != std::string::npos);
  const auto back = parse_csv(text);
  REQUIRE(back.size() == 3);
  CHECK(to_csv(back) == text);
  CHECK(back[1].annotation == rows[1].annotation);
  CHECK_FALSE(back[2].dV_E.has_value());
  CHECK_FALSE(back[1].dV_E_th.has_value());
  CHECK(*back[0].dV_E == 0.123456789);
  CHECK(*back[0].theta_min == 0.0);
  CHECK(back[0].k == 0);
  CHECK(back[2].k == 2);
}

TEST_CASE("malformed files") {
  const std::string header = to_csv({});
  CHECK(parse_csv(header).empty());
  CHECK_THROWS_WITH_AS(parse_csv(""), doctest::Contains("missing header"), CsvError);
  CHECK_THROWS_WITH_AS(parse_csv("a,b\n"), doctest::Contains("line 1"), CsvError);
  const std::string good = to_csv({sample_row(1)});
  CHECK_THROWS_WITH_AS(parse_csv(good + "flatflat,0.5\n"), doctest::Contains("line 3"), CsvError);
  std::string bad_number = good;
  bad_number.replace(bad_number.find("0.62"), 4, "x.62");
  CHECK_THROWS_WITH_AS(parse_csv(bad_number), doctest::Contains("line 2: column omega0c"), CsvError);
  std::string unterminated = good;
  unterminated.replace(unterminated.find("nonresonant"), 11, "\"nonresonant");
  CHECK_THROWS_WITH_AS(parse_csv(unterminated), doctest::Contains("line 2: unterminated"), CsvError);
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("manifest") {
  RunManifest m;
  m.command = "mmtwa sweep --seed 7";
  m.master_seed = 7;
  m.started = utc_timestamp();
  m.finished = m.started;
  m.workers = 4;
  m.scenarios.push_back({"flatflat", "[scenario]\nname = flatflat\n", {{0.4, 0, false, ""}, {0.5, 3, true, "boom"}}});
  m.outputs.push_back({"flatflat.csv", sha256_hex("x")});
  const auto j = nlohmann::json::parse(to_json(m));
  CHECK(j["command"] == m.command);
  CHECK(j["master_seed"] == 7);
  CHECK(j["workers"] == 4);
  CHECK(j["csv_schema"] == "mmtwa-sweep-csv/1");
  CHECK(j["version"] == std::string(library_version()));
  CHECK(j["units"].contains("frequency"));
  const auto& s = j["scenarios"][0];
  CHECK(s["name"] == "flatflat");
  CHECK(s["failed_points"] == 1);
  CHECK(s["aborted_trajectories"] == 3);
  CHECK(s["points"][1]["error"] == "boom");
  CHECK_FALSE(s["points"][0].contains("error"));
  CHECK(j["outputs"][0]["sha256"] == sha256_hex("x"));
  const std::string ts = m.started;
  CHECK(ts.size() == 20);
  CHECK(ts.back() == 'Z');
}

}
