#pragma once

// Observables computed from ensemble moments: relative variance changes,
// their thermal variants, the k = 0 squeezing ellipse and the Raman shift.
// Standard errors use the delta method over per-block estimates.

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmtwa/ensemble.hpp"

namespace mmtwa {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Thrown when a baseline variance is statistically indistinguishable from
/// zero, so that relative changes are meaningless.
class BaselineInvalid : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ModeVariance {
  int k = 0;
  Estimate V_E_g, V_E_0, V_Q_g, V_Q_0;
  /// (V_g - V_0) / V_0
  Estimate dV_E, dV_Q;
};

/// One entry per k >= 0; V(X_k) = V(X_{-k}).
struct VarianceReport {
  std::vector<ModeVariance> modes;
  const ModeVariance& at(int k) const;
};

VarianceReport delta_variances(const EnsembleStats& coupled, const EnsembleStats& baseline);

struct ThermalMode {
  int k = 0;
  Estimate dV_E_th, dV_Q_th;
  /// (V(Q_k) - V(E_k)) / V(E_k), both from the coupled thermal run.
  Estimate dVp_Q_th;
};

struct ThermalReport {
  std::vector<ThermalMode> modes;
  const ThermalMode& at(int k) const;
};

/// Relative changes for runs at T > 0, plus the cavity-normalized Raman
/// change.
ThermalReport thermal_deltas(const EnsembleStats& coupled, const EnsembleStats& baseline);

struct SqueezingReport {
  double V_min = 0.0;
  double V_max = 0.0;
  /// Grid angle in [0, pi) where V_theta is smallest.
  double theta_min = 0.0;
  double theta_max = 0.0;
  /// Spacing of the angle grid.
  double resolution = 0.0;
  Estimate min, max, spread;
};

/// 2x2 covariance of the k = 0 cavity quadratures x = Re a_0, y = Im a_0.
struct QuadratureCovariance {
  double xx = 0.0, yy = 0.0, xy = 0.0;
};

QuadratureCovariance quadrature_covariance(const EnsembleStats& stats);

/// Variance of X_theta = a_0 e^{-i theta} + conj(a_0) e^{i theta}.
double rotated_variance(const QuadratureCovariance& c, double theta);

/// Scans theta = j pi / n_angles, j = 0..n_angles-1. Throws
/// std::invalid_argument for n_angles < 8 and std::domain_error for empty
/// statistics.
SqueezingReport squeezing_scan(const EnsembleStats& stats, int n_angles = 180);

struct ModeShift {
  int k = 0;
  Estimate shift;
};

/// Re<Q_k> for every grid momentum, in units where the physical
/// displacement is (l0 / sqrt 2) * shift with l0 = sqrt(hbar / M w_R).
struct RamanShiftReport {
  std::vector<ModeShift> modes;
  static constexpr double kDisplacementPerUnit = 0.70710678118654752440;
  const ModeShift& at(int k) const;
};

RamanShiftReport raman_shift(const EnsembleStats& stats);

/// Delta-method influence of one estimator on each block, normalized so that
/// the standard error is sqrt(sum psi^2 / (B (B - 1))).
class Influence {
 public:
  Influence() = default;
  explicit Influence(std::vector<double> psi) : psi_(std::move(psi)) {}

  const std::vector<double>& values() const { return psi_; }
  std::size_t blocks() const { return psi_.size(); }
  double standard_error() const;

  Influence& operator+=(const Influence& o);
  friend Influence operator*(double c, Influence f);
  friend Influence operator+(Influence a, const Influence& b) { return a += b; }
  friend Influence operator-(Influence a, const Influence& b) { return a += (-1.0) * b; }

 private:
  std::vector<double> psi_;
};

/// Influence of the linear estimator sum_i c_i * mean(offset_i).
Influence mean_influence(const EnsembleStats& stats, const std::vector<std::pair<std::size_t, double>>& coefs);

/// Influence of V(E_k), or of V(Q_k) when `raman` is set.
Influence variance_influence(const EnsembleStats& stats, int k, bool raman);

/// Whether two accumulators hold matching blocks (same keys and sample
/// counts), so their influences can be combined blockwise.
bool blocks_paired(const EnsembleStats& a, const EnsembleStats& b);

/// Standard error of (V_g - V_0)/V_0 given both variances and influences.
double ratio_error(double v_g, double v_0, const Influence& g, const Influence& z, bool paired);

}  // namespace mmtwa
