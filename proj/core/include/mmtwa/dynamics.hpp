#pragma once

// Single-trajectory view of the stochastic dynamics: drift, noise increments
// and one stochastic Heun step. The ensemble runner uses the lane-batched
// engine in kernel.hpp; these functions share its arithmetic.

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmtwa/model.hpp"
#include "mmtwa/random.hpp"

namespace mmtwa {

using cplx = std::complex<double>;

/// One Wigner sample: cavity amplitudes a and Raman amplitudes b, indexed by
/// grid position (k + M).
struct TrajectoryState {
  std::vector<cplx> a;
  std::vector<cplx> b;
  double t = 0.0;

  TrajectoryState() = default;
  explicit TrajectoryState(int modes) : a(static_cast<std::size_t>(modes)), b(static_cast<std::size_t>(modes)) {}
};

/// Additive increments for one step. Raman increments are real and act on
/// the momentum quadrature (imaginary part of b).
struct NoiseIncrement {
  std::vector<cplx> da;
  std::vector<double> db;
};

/// Thrown when a trajectory leaves the finite numbers.
class TrajectoryAborted : public std::runtime_error {
 public:
  TrajectoryAborted(double time, int momentum, const std::string& field);
  double time() const { return time_; }
  int momentum() const { return momentum_; }

 private:
  double time_;
  int momentum_;
};

/// Time derivative of the state without noise. Both couplings are scaled by
/// ramp_factor.
TrajectoryState drift(const TrajectoryState& state, const SystemSpec& spec, double ramp_factor);

/// Hermitian combinations A_k = a_k + conj(a_{-k}) (cavity field E_k) and
/// B_q = b_q + conj(b_{-q}) (Raman coordinate Q_q).
std::vector<cplx> hermitian_field(const std::vector<cplx>& amplitudes);

/// Draws one step of bath noise. Cavity components have variance
/// kappa coth(w/2T) dt / 2 each (so E|da|^2 = kappa_eff dt); Raman increments
/// have variance gamma coth(w/2T) dt / 2.
NoiseIncrement noise_increment(const SystemSpec& spec, double dt, RandomStream& rng);

/// Stochastic Heun step t -> t + dt. Noise is drawn from `rng` as by
/// noise_increment; the ramp factor is evaluated at the step midpoint.
/// Throws TrajectoryAborted if the new state is not finite.
TrajectoryState step(const TrajectoryState& state, const SystemSpec& spec, const RampSchedule& ramp, double dt,
                     RandomStream& rng);

/// Wigner sample of the uncoupled (thermal or vacuum) state.
TrajectoryState sample_initial(const SystemSpec& spec, RandomStream& rng);

}  // namespace mmtwa
