#pragma once

// Photonic band-gap sweeps: per-point paired runs, observables, resonance
// annotations, and comparison against effective single-mode models.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmtwa/config.hpp"
#include "mmtwa/ensemble.hpp"
#include "mmtwa/observables.hpp"

namespace mmtwa {

/// A preset system whose cavity band gap omega_0^c is left free.
struct Scenario {
  std::string name;
  SystemSpec spec;

  static Scenario from_config(const RunConfig& config) { return {config.scenario, config.spec}; }
  SystemSpec at_bandgap(double omega0c) const;
};

struct ResonanceLine {
  enum class Kind { Resonance, Threshold };
  Kind kind = Kind::Resonance;
  /// Mode the line belongs to; empty when it applies to every mode.
  std::optional<int> k;
  double omega0c = 0.0;
};

/// Band gaps where 2 omega_k^c meets omega_k^R. A flat cavity band gives one
/// line per distinct Raman frequency (a single line for a flat Raman band);
/// a dispersive cavity band gives the threshold above which no mode can be
/// resonant.
std::vector<ResonanceLine> resonance_lines(const Scenario& scenario, const ModeGrid& grid);

/// Annotation text for one (omega0c, k) row, tokens joined by ';'.
std::string annotate(const std::vector<ResonanceLine>& lines, double omega0c, int k);

/// One CSV row. Empty optionals are quantities that do not apply.
struct SweepRow {
  std::string scenario;
  double omega0c = 0.0;
  int k = 0;
  std::optional<double> dV_E, dV_E_err, dV_Q, dV_Q_err;
  std::optional<double> V_E_g, V_E_0, V_Q_g, V_Q_0;
  std::optional<double> dV_E_th, dV_Q_th, dVp_Q_th;
  std::optional<double> mean_Q_re, mean_Q_err;
  std::optional<double> theta_min, V_min, V_max;
  std::string annotation;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct PointStatus {
  double omega0c = 0.0;
  std::size_t aborted = 0;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::string scenario;
  RunProtocol protocol;
  std::vector<SweepRow> rows;
  std::vector<PointStatus> points;

  std::size_t failed_points() const;
  std::size_t aborted_trajectories() const;
};

struct SweepOptions {
  unsigned workers = 0;
  int n_angles = 180;
  /// Called after each point with (index, count, status).
  std::function<void(std::size_t, std::size_t, const PointStatus&)> progress;
  /// Called with the ensembles of every point that completed.
  std::function<void(double, const PairedStats&)> inspect;
};

/// Rows of one band-gap point from a paired run.
std::vector<SweepRow> point_rows(const Scenario& scenario, double omega0c, const PairedStats& stats, int n_angles);

/// Runs every band gap (strictly increasing, positive) in order. A point
/// that fails is recorded in its rows and status; the sweep continues.
SweepResult run_sweep(const Scenario& scenario, const std::vector<double>& bandgaps, const RunProtocol& protocol,
                      const SweepOptions& options = {});

struct EffectiveComparison {
  double omega0c = 0.0;
  /// Largest |dV_multi(k) - dV_eff(0)| over k and its pooled standard error.
  double max_diff_E = 0.0, err_E = 0.0;
  double max_diff_Q = 0.0, err_Q = 0.0;
  /// Largest difference in units of the pooled error.
  double z_E = 0.0, z_Q = 0.0;
};

/// Compares a multimode sweep to a single-mode sweep on the same grid. Points
/// missing a value on either side are skipped. Throws std::invalid_argument
/// when the band-gap grids differ.
std::vector<EffectiveComparison> compare_effective(const SweepResult& multi, const SweepResult& eff);

}  // namespace mmtwa
