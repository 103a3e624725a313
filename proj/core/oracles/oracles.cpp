#include "mmtwa/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "mmtwa/observables.hpp"

namespace mmtwa::oracle {

namespace {

using namespace std::complex_literals;

std::optional<cplx> hermitian_at(const std::vector<cplx>& v, const ModeGrid& grid, int k) {
  const auto kk = grid.fold(k);
  if (!kk) return std::nullopt;
  return v[grid.position(*kk)] + std::conj(v[grid.position(-*kk)]);
}

Check within(std::string name, double measured, double expected, double tolerance) {
  Check c{std::move(name), measured, expected, tolerance, false};
  c.pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
  return c;
}

double half_coth(double omega, double temperature) { return 0.5 * thermal_factor(omega, temperature); }

SuiteResult bath_checks(const std::string& suite, const SystemSpec& spec, const RunProtocol& protocol,
                        double sigmas, unsigned workers, bool with_variance) {
  const SystemSpec bare = spec.uncoupled();
  const EnsembleStats stats = run_ensemble(bare, protocol, workers);
  const auto L = stats.layout();
  SuiteResult out{suite, {}};
  const int M = bare.grid.half_width;
  for (int k = -M; k <= M; ++k) {
    const int p = static_cast<int>(bare.grid.position(k));
    const double wc = dispersion_eval(bare.cavity, bare.grid, k);
    const double wr = dispersion_eval(bare.raman, bare.grid, k);
    const double se_a = mean_influence(stats, {{L.at(p, MomentLayout::AAbs2), 1.0}}).standard_error();
    const double se_b = mean_influence(stats, {{L.at(p, MomentLayout::BAbs2), 1.0}}).standard_error();
    out.checks.push_back(within("<|a_k|^2> k=" + std::to_string(k), stats.mean_abs2_a(k),
                                half_coth(wc, bare.temperature), sigmas * se_a));
    out.checks.push_back(within("<|b_k|^2> k=" + std::to_string(k), stats.mean_abs2_b(k),
                                half_coth(wr, bare.temperature), sigmas * se_b));
    if (with_variance && k >= 0) {
      const double se = variance_influence(stats, k, false).standard_error();
      out.checks.push_back(
          within("V(E_k) k=" + std::to_string(k), stats.variance_E(k), 2.0 * half_coth(wc, bare.temperature),
                 sigmas * se));
    }
  }
  return out;
}

}  // namespace

bool SuiteResult::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

TrajectoryState brute_force_drift(const TrajectoryState& state, const SystemSpec& spec, double ramp_factor) {
  const ModeGrid& grid = spec.grid;
  const int M = grid.half_width;
  const double n = static_cast<double>(grid.size());
  const double g = spec.g * ramp_factor;
  const double g4 = spec.g4 * ramp_factor;
  TrajectoryState d(grid.size());
  d.t = state.t;
  for (int k = -M; k <= M; ++k) {
    const std::size_t p = grid.position(k);
    // i da_k/dt = w a_k + (2g/sqrt N) sum_q B_{k-q} A_q + (g4/N) sum_{q,k'} A_{k+q} A_{k'} A_{-k'-q} - i kappa a_k
    cplx cubic = 0.0;
    cplx quartic = 0.0;
    for (int q = -M; q <= M; ++q) {
      const auto Aq = hermitian_at(state.a, grid, q);
      const auto Bkq = hermitian_at(state.b, grid, k - q);
      if (Aq && Bkq) cubic += *Bkq * *Aq;
      const auto Akq = hermitian_at(state.a, grid, k + q);
      if (!Akq) continue;
      for (int kp = -M; kp <= M; ++kp) {
        const auto Akp = hermitian_at(state.a, grid, kp);
        const auto Am = hermitian_at(state.a, grid, -kp - q);
        if (Akp && Am) quartic += *Akq * *Akp * *Am;
      }
    }
    const cplx rhs_a = dispersion_eval(spec.cavity, grid, k) * state.a[p] + (2.0 * g / std::sqrt(n)) * cubic +
                       (g4 / n) * quartic - 1i * spec.kappa * state.a[p];
    d.a[p] = -1i * rhs_a;

    // i db_q/dt = v b_q + (g/sqrt N) sum_k A_k A_{q-k} - (i gamma/2)(b_q - conj b_q)
    cplx pump = 0.0;
    for (int kk = -M; kk <= M; ++kk) {
      const auto Ak = hermitian_at(state.a, grid, kk);
      const auto Aqk = hermitian_at(state.a, grid, k - kk);
      if (Ak && Aqk) pump += *Ak * *Aqk;
    }
    const cplx b = state.b[p];
    const cplx rhs_b = dispersion_eval(spec.raman, grid, k) * b + (g / std::sqrt(n)) * pump -
                       0.5i * spec.gamma * (b - std::conj(b));
    d.b[p] = -1i * rhs_b;
  }
  return d;
}

TrajectoryState random_state(const SystemSpec& spec, std::uint64_t seed, std::uint64_t index, double scale) {
  RandomStream rng(seed, index, StreamPurpose::Synthetic);
  TrajectoryState s(spec.modes());
  auto u = [&] { return scale * (2.0 * rng.uniform() - 1.0); };
  for (auto& z : s.a) z = {u(), u()};
  for (auto& z : s.b) z = {u(), u()};
  return s;
}

SuiteResult drift_suite(std::uint64_t seed, int states) {
  SuiteResult out{"drift", {}};
  for (WrapPolicy policy : {WrapPolicy::Wrap, WrapPolicy::Truncate}) {
    SystemSpec spec;
    spec.grid.wrap = policy;
    spec.cavity = Dispersion::quadratic(0.7, 1.0);
    spec.raman = Dispersion::quadratic(1.0, 1.0);
    spec.g = 0.3;
    spec.g4 = 0.2;
    double worst = 0.0;
    for (int i = 0; i < states; ++i) {
      const TrajectoryState s = random_state(spec, seed, static_cast<std::uint64_t>(i));
      const double ramp = 0.25 + 0.75 * static_cast<double>(i % 4) / 3.0;
      const TrajectoryState fast = drift(s, spec, ramp);
      const TrajectoryState slow = brute_force_drift(s, spec, ramp);
      for (std::size_t p = 0; p < s.a.size(); ++p) {
        worst = std::max({worst, std::abs(fast.a[p].real() - slow.a[p].real()),
                          std::abs(fast.a[p].imag() - slow.a[p].imag()), std::abs(fast.b[p].real() - slow.b[p].real()),
                          std::abs(fast.b[p].imag() - slow.b[p].imag())});
      }
    }
    out.checks.push_back(within("max |drift - direct sum| (" + std::string(to_string(policy)) + ", " +
                                    std::to_string(states) + " states)",
                                worst, 0.0, 1e-12));
  }
  return out;
}

SuiteResult fdt_suite(const SystemSpec& spec, const RunProtocol& protocol, double sigmas, unsigned workers) {
  SystemSpec cold = spec;
  cold.temperature = 0.0;
  return bath_checks("fdt", cold, protocol, sigmas, workers, false);
}

SuiteResult thermal_suite(const SystemSpec& spec, const RunProtocol& protocol, double sigmas, unsigned workers) {
  if (!(spec.temperature > 0.0)) throw std::invalid_argument("thermal_suite needs a positive temperature");
  return bath_checks("thermal", spec, protocol, sigmas, workers, true);
}

SuiteResult squeezing_suite(std::uint64_t seed, std::uint64_t samples) {
  constexpr double kVarRe = 0.2;
  constexpr double kVarIm = 0.4;
  constexpr int kBlocks = 100;
  constexpr int kAngles = 180;
  ModeGrid grid;
  grid.half_width = 0;
  EnsembleStats stats(grid);
  RandomStream rng(seed, 0, StreamPurpose::Synthetic);
  TrajectoryState s(1);
  const MomentLayout layout{1};
  double z[4];
  std::uint64_t drawn = 0;
  for (int b = 0; b < kBlocks; ++b) {
    MomentBlock block{static_cast<std::uint64_t>(b), 0, 0, std::vector<double>(layout.size(), 0.0)};
    const std::uint64_t target = samples * static_cast<std::uint64_t>(b + 1) / kBlocks;
    for (; drawn < target; ++drawn) {
      rng.fill_normals(z);
      s.a[0] = {std::sqrt(kVarRe) * z[0], std::sqrt(kVarIm) * z[1]};
      s.b[0] = {z[2], z[3]};
      accumulate_sample(s, block.sums);
      ++block.samples;
    }
    stats.add_block(std::move(block));
  }

  const SqueezingReport r = squeezing_scan(stats, kAngles);
  const QuadratureCovariance cov = quadrature_covariance(stats);
  SuiteResult out{"squeezing", {}};
  // closed form of the sample covariance: extremes of 4 (c^2 xx + s^2 yy + 2 cs xy)
  const double mid = 2.0 * (cov.xx + cov.yy);
  const double rad = 2.0 * std::hypot(cov.xx - cov.yy, 2.0 * cov.xy);
  out.checks.push_back(within("V_min vs eigenvalue of sample covariance", r.V_min, mid - rad,
                              rad * (1.0 - std::cos(r.resolution)) + 1e-12));
  out.checks.push_back(within("V_max vs eigenvalue of sample covariance", r.V_max, mid + rad,
                              rad * (1.0 - std::cos(r.resolution)) + 1e-12));
  out.checks.push_back(within("V_min vs 4 Var(Re a_0)", r.V_min, 4.0 * kVarRe, 3.0 * r.min.error));
  out.checks.push_back(within("V_max vs 4 Var(Im a_0)", r.V_max, 4.0 * kVarIm, 3.0 * r.max.error));
  const double to_zero = std::min(r.theta_min, std::numbers::pi - r.theta_min);
  out.checks.push_back(within("theta_min distance from 0 (mod pi)", to_zero, 0.0, 0.05));
  out.checks.push_back(within("theta_max vs pi/2", r.theta_max, std::numbers::pi / 2, 0.05));
  double worst = 0.0;
  const double trace = rotated_variance(cov, 0.0) + rotated_variance(cov, std::numbers::pi / 2);
  for (int j = 0; j < kAngles; ++j) {
    const double th = j * r.resolution;
    worst = std::max(worst, std::abs(rotated_variance(cov, th) + rotated_variance(cov, th + std::numbers::pi / 2) - trace));
  }
  out.checks.push_back(within("max |V_t + V_(t+pi/2) - V_0 - V_(pi/2)|", worst, 0.0, 1e-12));
  return out;
}

RunProtocol bath_protocol(std::uint64_t trajectories) {
  RunProtocol p;
  p.n_trajectories = trajectories;
  p.ramp.t_ramp = 1.0;
  p.ramp.t_settle = 100.0;
  p.ramp.t_window = 200.0;
  p.ramp.sample_stride = 1.0;
  return p;
}

}  // namespace mmtwa::oracle
