#pragma once

// Reference computations that do not share code with the production
// kernels: term-by-term drift summation, closed-form bath steady states and
// synthetic squeezing clouds. Used by the `oracle` command and the tests.

#include <cstdint>
#include <string>
#include <vector>

#include "mmtwa/dynamics.hpp"
#include "mmtwa/ensemble.hpp"
#include "mmtwa/model.hpp"

namespace mmtwa::oracle {

/// Drift by direct summation over the equations of motion, with the grid's
/// momentum policy applied to every index.
TrajectoryState brute_force_drift(const TrajectoryState& state, const SystemSpec& spec, double ramp_factor);

/// Uniform random state with components in [-scale, scale].
TrajectoryState random_state(const SystemSpec& spec, std::uint64_t seed, std::uint64_t index, double scale = 0.5);

struct Check {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  /// Allowed |measured - expected|.
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  bool pass() const;
};

/// Largest component difference between the kernel drift and the direct
/// sum over `states` random states, both momentum policies.
SuiteResult drift_suite(std::uint64_t seed = 2024, int states = 100);

/// Uncoupled steady state at T = 0: <|a_k|^2> and <|b_k|^2> against 1/2
/// within `sigmas` standard errors for every mode.
SuiteResult fdt_suite(const SystemSpec& spec, const RunProtocol& protocol, double sigmas = 3.0, unsigned workers = 0);

/// Uncoupled run at T > 0: <|a_k|^2>, <|b_k|^2> against coth(w/2T)/2 and
/// V(E_k) against coth(w_k^c/2T).
SuiteResult thermal_suite(const SystemSpec& spec, const RunProtocol& protocol, double sigmas = 3.0,
                          unsigned workers = 0);

/// Gaussian cloud with Var(Re a_0) = 0.2, Var(Im a_0) = 0.4: scan result
/// against the closed form and the trace identity.
SuiteResult squeezing_suite(std::uint64_t seed = 7, std::uint64_t samples = 200000);

/// Short protocol for uncoupled bath checks; the initial Wigner sample is
/// already stationary, so little settling is needed.
RunProtocol bath_protocol(std::uint64_t trajectories = 512);

}  // namespace mmtwa::oracle
