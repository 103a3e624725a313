#include "mmtwa/dynamics.hpp"

#include <array>
#include <cmath>

#include "mmtwa/kernel.hpp"

namespace mmtwa {

namespace {

using Lane1 = LaneFields<1>;

Lane1 to_lanes(const TrajectoryState& s) {
  Lane1 f(static_cast<int>(s.a.size()));
  for (std::size_t p = 0; p < s.a.size(); ++p) {
    f.ar[p] = s.a[p].real();
    f.ai[p] = s.a[p].imag();
    f.br[p] = s.b[p].real();
    f.bi[p] = s.b[p].imag();
  }
  return f;
}

TrajectoryState from_lanes(const Lane1& f, double t) {
  TrajectoryState s(static_cast<int>(f.ar.size()));
  for (std::size_t p = 0; p < f.ar.size(); ++p) {
    s.a[p] = {f.ar[p], f.ai[p]};
    s.b[p] = {f.br[p], f.bi[p]};
  }
  s.t = t;
  return s;
}

void require_shape(const TrajectoryState& state, const SystemSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.modes());
  if (state.a.size() != n || state.b.size() != n) {
    throw std::invalid_argument("trajectory state has " + std::to_string(state.a.size()) + "/" +
                                std::to_string(state.b.size()) + " modes, spec expects " + std::to_string(n));
  }
}

// Rows are output positions; each (first, second) pair contributes first*second.
// A symmetric table keeps one of the two orderings of each off-diagonal pair
// and marks it as doubled.
template <typename Fn>
PairTable build_table(const ModeGrid& grid, bool symmetric, Fn pair_for) {
  PairTable t;
  t.row_start.push_back(0);
  for (int out = -grid.half_width; out <= grid.half_width; ++out) {
    std::vector<std::pair<int, int>> off, diag;
    for (int s = -grid.half_width; s <= grid.half_width; ++s) {
      if (auto pr = pair_for(out, s)) {
        const int i = static_cast<int>(grid.position(pr->first));
        const int j = static_cast<int>(grid.position(pr->second));
        if (!symmetric || i < j) {
          off.emplace_back(i, j);
        } else if (i == j) {
          diag.emplace_back(i, j);
        }
      }
    }
    for (const auto& [i, j] : off) {
      t.first.push_back(i);
      t.second.push_back(j);
    }
    if (symmetric) t.doubled_end.push_back(static_cast<int>(t.first.size()));
    for (const auto& [i, j] : diag) {
      t.first.push_back(i);
      t.second.push_back(j);
    }
    t.row_start.push_back(static_cast<int>(t.first.size()));
  }
  return t;
}

}  // namespace

DriftKernel::DriftKernel(const SystemSpec& spec)
    : spec_(spec),
      modes_(spec.modes()),
      omega_c_(dispersion_table(spec.cavity, spec.grid)),
      omega_r_(dispersion_table(spec.raman, spec.grid)) {
  const ModeGrid& grid = spec.grid;
  using Pair = std::optional<std::pair<int, int>>;
  // S_k = sum_q B_{k-q} A_q
  cavity_cubic_ = build_table(grid, false, [&](int k, int q) -> Pair {
    if (auto j = grid.fold(k - q)) return std::pair{*j, q};
    return std::nullopt;
  });
  // R_q = sum_k A_k A_{q-k}
  raman_cubic_ = build_table(grid, true, [&](int q, int k) -> Pair {
    if (auto j = grid.fold(q - k)) return std::pair{k, *j};
    return std::nullopt;
  });
  // C_q = sum_k' A_k' A_{-k'-q}
  quartic_inner_ = build_table(grid, true, [&](int q, int kp) -> Pair {
    if (auto j = grid.fold(-kp - q)) return std::pair{kp, *j};
    return std::nullopt;
  });
  // Q_k = sum_q A_{k+q} C_q
  quartic_outer_ = build_table(grid, false, [&](int k, int q) -> Pair {
    if (auto j = grid.fold(k + q)) return std::pair{*j, q};
    return std::nullopt;
  });
  const double n = static_cast<double>(modes_);
  cavity_coef_ = 2.0 * spec.g / std::sqrt(n);
  raman_coef_ = spec.g / std::sqrt(n);
  quartic_coef_ = spec.g4 / n;
}

NoiseScales::NoiseScales(const SystemSpec& spec, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto wc = dispersion_table(spec.cavity, spec.grid);
  const auto wr = dispersion_table(spec.raman, spec.grid);
  cavity.resize(wc.size());
  raman.resize(wr.size());
  for (std::size_t p = 0; p < wc.size(); ++p) {
    cavity[p] = std::sqrt(0.5 * spec.kappa * thermal_factor(wc[p], spec.temperature) * dt);
    // Raman friction acts on one quadrature only; half the cavity-style
    // intensity keeps the uncoupled steady state at the Wigner variance.
    raman[p] = std::sqrt(0.5 * spec.gamma * thermal_factor(wr[p], spec.temperature) * dt);
  }
}

TrajectoryAborted::TrajectoryAborted(double time, int momentum, const std::string& field)
    : std::runtime_error("non-finite " + field + " amplitude at momentum " + std::to_string(momentum) +
                         ", t = " + std::to_string(time)),
      time_(time),
      momentum_(momentum) {}

TrajectoryState drift(const TrajectoryState& state, const SystemSpec& spec, double ramp_factor) {
  require_shape(state, spec);
  DriftKernel kernel(spec);
  DriftScratch<1> scratch(kernel.modes());
  Lane1 out(kernel.modes());
  kernel.eval<1>(to_lanes(state), ramp_factor, out, scratch);
  return from_lanes(out, state.t);
}

std::vector<cplx> hermitian_field(const std::vector<cplx>& amplitudes) {
  const std::size_t n = amplitudes.size();
  std::vector<cplx> out(n);
  for (std::size_t p = 0; p < n; ++p) out[p] = amplitudes[p] + std::conj(amplitudes[n - 1 - p]);
  return out;
}

NoiseIncrement noise_increment(const SystemSpec& spec, double dt, RandomStream& rng) {
  const NoiseScales scales(spec, dt);
  const int n = spec.modes();
  std::vector<double> z(static_cast<std::size_t>(3 * n));
  rng.fill_normals(z);
  NoiseIncrement inc;
  inc.da.resize(static_cast<std::size_t>(n));
  inc.db.resize(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    inc.da[p] = {scales.cavity[p] * z[p], scales.cavity[p] * z[n + p]};
    inc.db[p] = scales.raman[p] * z[2 * n + p];
  }
  return inc;
}

TrajectoryState step(const TrajectoryState& state, const SystemSpec& spec, const RampSchedule& ramp, double dt,
                     RandomStream& rng) {
  require_shape(state, spec);
  LaneIntegrator<1> integrator(spec, dt);
  const int n = spec.modes();
  std::vector<double> z(static_cast<std::size_t>(4 * noise_blocks_per_step(n)));
  rng.fill_normals(std::span<double>(z.data(), static_cast<std::size_t>(3 * n)));
  integrator.set_noise_from_normals(z.data());
  integrator.state() = to_lanes(state);
  integrator.advance(ramp.factor(state.t + 0.5 * dt));
  TrajectoryState next = from_lanes(integrator.state(), state.t + dt);
  for (int p = 0; p < n; ++p) {
    if (!std::isfinite(next.a[p].real()) || !std::isfinite(next.a[p].imag())) {
      throw TrajectoryAborted(next.t, spec.grid.momentum(p), "cavity");
    }
    if (!std::isfinite(next.b[p].real()) || !std::isfinite(next.b[p].imag())) {
      throw TrajectoryAborted(next.t, spec.grid.momentum(p), "raman");
    }
  }
  return next;
}

TrajectoryState sample_initial(const SystemSpec& spec, RandomStream& rng) {
  const int n = spec.modes();
  std::vector<double> z(static_cast<std::size_t>(4 * n));
  rng.fill_normals(z);
  const auto wc = dispersion_table(spec.cavity, spec.grid);
  const auto wr = dispersion_table(spec.raman, spec.grid);
  TrajectoryState s(n);
  for (int p = 0; p < n; ++p) {
    const double sc = std::sqrt(0.25 * thermal_factor(wc[p], spec.temperature));
    const double sr = std::sqrt(0.25 * thermal_factor(wr[p], spec.temperature));
    s.a[p] = {sc * z[p], sc * z[n + p]};
    s.b[p] = {sr * z[2 * n + p], sr * z[3 * n + p]};
  }
  return s;
}

}  // namespace mmtwa
