#pragma once

// Physical system description: momentum grid, band dispersions, couplings,
// baths and the coupling ramp. Everything is expressed in natural units
// hbar = 1, omega_0^R = 1.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmtwa {

/// How momentum sums that leave the finite grid are treated.
enum class WrapPolicy {
  Wrap,      ///< fold back modulo the N-point grid (Brillouin-zone style)
  Truncate,  ///< drop out-of-range terms
};

std::string_view to_string(WrapPolicy policy);
WrapPolicy parse_wrap_policy(std::string_view text);

/// Symmetric 1-D momentum index set {-M, ..., 0, ..., +M}.
///
/// Mode positions in every array of this library run 0..N-1 with
/// position = k + M.
struct ModeGrid {
  int half_width = 5;
  WrapPolicy wrap = WrapPolicy::Wrap;

  int size() const { return 2 * half_width + 1; }
  bool contains(int k) const { return k >= -half_width && k <= half_width; }

  /// Array position of momentum k; throws std::out_of_range outside the grid.
  std::size_t position(int k) const;
  int momentum(std::size_t pos) const { return static_cast<int>(pos) - half_width; }

  /// Maps an arbitrary momentum onto the grid according to the wrap policy.
  /// Returns nullopt when the policy is Truncate and k is out of range.
  std::optional<int> fold(int k) const;

  friend bool operator==(const ModeGrid&, const ModeGrid&) = default;
};

enum class DispersionKind { Flat, Quadratic };

std::string_view to_string(DispersionKind kind);
DispersionKind parse_dispersion_kind(std::string_view text);

/// Band dispersion omega(k) = base + bandwidth * (k/M)^2 for Quadratic,
/// omega(k) = base for Flat (bandwidth ignored).
struct Dispersion {
  DispersionKind kind = DispersionKind::Flat;
  double base = 1.0;
  double bandwidth = 0.0;

  static Dispersion flat(double base) { return {DispersionKind::Flat, base, 0.0}; }
  static Dispersion quadratic(double base, double bandwidth) {
    return {DispersionKind::Quadratic, base, bandwidth};
  }

  friend bool operator==(const Dispersion&, const Dispersion&) = default;
};

/// omega(k) on the grid. Throws std::out_of_range for k outside the grid.
double dispersion_eval(const Dispersion& d, const ModeGrid& grid, int k);

/// Per-position frequencies, length grid.size().
std::vector<double> dispersion_table(const Dispersion& d, const ModeGrid& grid);

struct SystemSpec {
  ModeGrid grid;
  Dispersion cavity = Dispersion::flat(0.5);
  Dispersion raman = Dispersion::flat(1.0);
  double g = 0.04;
  double g4 = 0.01;
  double kappa = 0.02;
  double gamma = 0.02;
  /// k_B T / (hbar omega_0^R); zero means vacuum.
  double temperature = 0.0;

  int modes() const { return grid.size(); }

  /// Same system with both nonlinear couplings switched off.
  SystemSpec uncoupled() const {
    SystemSpec s = *this;
    s.g = 0.0;
    s.g4 = 0.0;
    return s;
  }

  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

/// coth(omega / 2T), i.e. 2 n_B(omega) + 1; exactly 1 at T = 0.
double thermal_factor(double omega, double temperature);

enum class RampShape { Linear, SmoothTanh };

std::string_view to_string(RampShape shape);
RampShape parse_ramp_shape(std::string_view text);

/// Coupling ramp followed by a settling period and a sampling window.
struct RampSchedule {
  RampShape shape = RampShape::SmoothTanh;
  double t_ramp = 600.0;
  double t_settle = 200.0;
  double t_window = 200.0;
  double sample_stride = 1.0;

  /// Monotone ramp factor in [0, 1]; 0 at t = 0 and 1 for t >= t_ramp.
  double factor(double t) const;

  double total_time() const { return t_ramp + t_settle + t_window; }

  friend bool operator==(const RampSchedule&, const RampSchedule&) = default;
};

struct Violation {
  std::string field;
  std::string message;
};

/// Collected invariant violations; empty means valid.
struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  void add(std::string field, std::string message) {
    violations.push_back({std::move(field), std::move(message)});
  }
  std::string describe() const;
};

class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

ValidationReport check_spec(const SystemSpec& spec);
ValidationReport check_ramp(const RampSchedule& ramp);

/// Returns the spec unchanged when every invariant holds, throws
/// ValidationError listing all violated invariants otherwise.
const SystemSpec& validate_spec(const SystemSpec& spec);
const RampSchedule& validate_ramp(const RampSchedule& ramp);

}  // namespace mmtwa
