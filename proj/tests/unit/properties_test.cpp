#include <doctest.h>

#include <cmath>

#include "mmtwa/config.hpp"
#include "mmtwa/sweep.hpp"

using namespace mmtwa;

namespace {

std::vector<SweepRow> point(const std::string& scenario, double omega0c) {
  const auto cfg = load_config(nullptr, scenario,
                               {"trajectories=500", "seed=2024", "t_ramp=10", "t_settle=5", "t_window=10"});
  const auto r = run_sweep(Scenario::from_config(cfg), {omega0c}, cfg.protocol, {0, 36, {}, {}});
  REQUIRE(r.failed_points() == 0);
  return r.rows;
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("flat bands on resonance: light variance grows, phonon variance shrinks in every mode") {
  const auto rows = point("flatflat", 0.5);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CAPTURE(r.k);
    CHECK(*r.dV_E > 3.0 * *r.dV_E_err);
    CHECK(*r.dV_Q < -3.0 * *r.dV_Q_err);
  }
}

TEST_CASE("flat bands treat the nonzero momenta alike") {
  const auto rows = point("flatflat", 0.5);
  double mean = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) mean += *rows[i].dV_E / 5.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CAPTURE(rows[i].k);
    CHECK(std::abs(*rows[i].dV_E - mean) < 4.0 * *rows[i].dV_E_err);
  }
}

TEST_CASE("dispersive Raman band selects the resonant mode") {
  const auto rows = point("quadraman", 1.0);
  REQUIRE(rows.size() == 6);
  const auto& edge = rows.back();
  CHECK(edge.k == 5);
  CHECK(*edge.dV_Q < -3.0 * *edge.dV_Q_err);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    CAPTURE(rows[i].k);
    CHECK(std::abs(*rows[i].dV_Q) < std::abs(*edge.dV_Q));
  }
}

TEST_CASE("a cavity band above the threshold leaves the phonons near their baseline") {
  const auto rows = point("quadcavity", 1.2);
  for (const auto& r : rows) {
    CAPTURE(r.k);
    CHECK(std::abs(*r.dV_Q) < 0.05 + 3.0 * *r.dV_Q_err);
    CHECK(r.annotation.find("nonresonant") != std::string::npos);
  }
}

}
