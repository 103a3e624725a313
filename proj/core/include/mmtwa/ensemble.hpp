#pragma once

// Trajectory ensembles: Wigner initial sampling, the ramp-settle-sample
// protocol, and mergeable moment accumulators.

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmtwa/dynamics.hpp"
#include "mmtwa/model.hpp"

namespace mmtwa {

/// Offsets into a moment vector. Per grid position p the eight sums
/// E_re, E_im, |E|^2, Q_re, Q_im, |Q|^2, |a|^2, |b|^2 are stored at
/// 8p..8p+7, where E_k = a_k + conj(a_{-k}) and Q_k = b_k + conj(b_{-k}).
/// The k = 0 cavity quadratures x = Re a_0, y = Im a_0 follow as
/// x, y, x^2, y^2, xy.
struct MomentLayout {
  static constexpr int kPerMode = 8;
  static constexpr int kQuadrature = 5;

  enum Field : int { ERe = 0, EIm = 1, EAbs2 = 2, QRe = 3, QIm = 4, QAbs2 = 5, AAbs2 = 6, BAbs2 = 7 };
  enum Quad : int { X = 0, Y = 1, XX = 2, YY = 3, XY = 4 };

  int modes = 0;

  std::size_t size() const { return static_cast<std::size_t>(kPerMode * modes + kQuadrature); }
  std::size_t at(int pos, Field f) const { return static_cast<std::size_t>(kPerMode * pos + f); }
  std::size_t quad(Quad q) const { return static_cast<std::size_t>(kPerMode * modes + q); }
};

/// Sums over the samples of one block (one trajectory, or a contiguous
/// slice of one trajectory's sampling window).
struct MomentBlock {
  std::uint64_t trajectory = 0;
  std::uint32_t sub_block = 0;
  std::uint64_t samples = 0;
  std::vector<double> sums;

  bool same_key(const MomentBlock& o) const { return trajectory == o.trajectory && sub_block == o.sub_block; }
};

struct AbortRecord {
  std::uint64_t trajectory = 0;
  std::uint64_t seed = 0;
  double time = 0.0;
  int momentum = 0;
  std::string what;
};

/// Pooled per-mode first and second moments of E_k and Q_k plus the
/// per-block sums needed for error bars. Blocks are kept ordered by
/// (trajectory, sub_block).
class EnsembleStats {
 public:
  EnsembleStats() = default;
  explicit EnsembleStats(ModeGrid grid);

  bool empty() const { return !grid_.has_value(); }
  const ModeGrid& grid() const;
  MomentLayout layout() const { return {grid().size()}; }

  /// Number of samples pooled into every mode's moments.
  std::uint64_t count() const { return count_; }
  std::size_t trajectories() const;
  const std::vector<MomentBlock>& blocks() const { return blocks_; }
  const std::vector<double>& totals() const { return totals_; }
  const std::vector<AbortRecord>& aborts() const { return aborts_; }

  void add_block(MomentBlock block);
  void add_abort(AbortRecord record) { aborts_.push_back(std::move(record)); }

  double mean(std::size_t offset) const { return totals_.at(offset) / static_cast<double>(count_); }
  std::complex<double> mean_E(int k) const;
  std::complex<double> mean_Q(int k) const;
  double mean_abs2_E(int k) const;
  double mean_abs2_Q(int k) const;
  /// Occupations <|a_k|^2>, <|b_k|^2> of the individual amplitudes.
  double mean_abs2_a(int k) const;
  double mean_abs2_b(int k) const;
  /// V(X) = <|X|^2> - |<X>|^2
  double variance_E(int k) const;
  double variance_Q(int k) const;

  friend EnsembleStats merge_stats(const EnsembleStats& s1, const EnsembleStats& s2);

 private:
  std::optional<ModeGrid> grid_;
  std::uint64_t count_ = 0;
  std::vector<double> totals_;
  std::vector<MomentBlock> blocks_;
  std::vector<AbortRecord> aborts_;
};

/// Pools two accumulators over the same grid. The empty accumulator is the
/// identity. Throws std::invalid_argument on grid mismatch.
EnsembleStats merge_stats(const EnsembleStats& s1, const EnsembleStats& s2);

/// Merges in a fixed pairwise tree over the input order.
EnsembleStats merge_tree(std::vector<EnsembleStats> parts);

struct RunProtocol {
  std::uint64_t n_trajectories = 3500;
  std::uint64_t master_seed = 0x5eed2024ULL;
  RampSchedule ramp;
  double dt = 0.005;
  /// Baseline g = 0 run reuses the coupled run's per-trajectory streams.
  bool paired_baseline = true;
  /// Sub-blocks each trajectory's window is split into for error analysis.
  int blocks_per_trajectory = 1;
};

ValidationReport check_protocol(const RunProtocol& protocol);

/// Integer step counts of the protocol at its time step.
struct StepPlan {
  std::uint64_t ramp_steps = 0;
  std::uint64_t settle_steps = 0;
  std::uint64_t stride_steps = 0;
  std::uint64_t samples = 0;

  static StepPlan from(const RunProtocol& protocol);
  std::uint64_t total_steps() const { return ramp_steps + settle_steps + samples * stride_steps; }
  /// Whether the state after `steps_done` steps is a sampling instant; sets
  /// the sample index.
  bool is_sample(std::uint64_t steps_done, std::uint64_t& sample_index) const;
};

class EnsembleFailure : public std::runtime_error {
 public:
  EnsembleFailure(const std::string& what, std::vector<AbortRecord> aborts)
      : std::runtime_error(what), aborts_(std::move(aborts)) {}
  const std::vector<AbortRecord>& aborts() const { return aborts_; }

 private:
  std::vector<AbortRecord> aborts_;
};

struct PairedStats {
  EnsembleStats coupled;
  EnsembleStats baseline;
};

/// Number of workers used when none is requested: MMTWA_WORKERS if set,
/// otherwise the hardware concurrency.
unsigned default_workers();

/// Runs n_trajectories through ramp, settle and sampling window. Results
/// depend only on (spec, protocol), never on the worker count. Throws
/// EnsembleFailure when more than 0.1% of trajectories abort.
EnsembleStats run_ensemble(const SystemSpec& spec, const RunProtocol& protocol, unsigned workers = 0);

/// Coupled run plus its g = 0 baseline. With paired_baseline the two share
/// every random number; otherwise the baseline uses an independent seed.
PairedStats run_paired(const SystemSpec& spec, const RunProtocol& protocol, unsigned workers = 0);

/// Seed used for an unpaired baseline.
std::uint64_t unpaired_baseline_seed(std::uint64_t master_seed);

/// Accumulates one field sample into a block's sums.
void accumulate_sample(const TrajectoryState& state, std::vector<double>& sums);

}  // namespace mmtwa
