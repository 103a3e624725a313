#include "mmtwa/ensemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "mmtwa/kernel.hpp"
#include "mmtwa/parallel.hpp"

namespace mmtwa {

EnsembleStats::EnsembleStats(ModeGrid grid) : grid_(grid), totals_(MomentLayout{grid.size()}.size(), 0.0) {}

const ModeGrid& EnsembleStats::grid() const {
  if (!grid_) throw std::logic_error("empty EnsembleStats has no grid");
  return *grid_;
}

std::size_t EnsembleStats::trajectories() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i == 0 || blocks_[i].trajectory != blocks_[i - 1].trajectory) ++n;
  }
  return n;
}

void EnsembleStats::add_block(MomentBlock block) {
  if (block.sums.size() != totals_.size()) throw std::invalid_argument("moment block has wrong layout");
  if (!blocks_.empty()) {
    const auto& last = blocks_.back();
    if (block.trajectory < last.trajectory ||
        (block.trajectory == last.trajectory && block.sub_block <= last.sub_block)) {
      throw std::invalid_argument("moment blocks must be added in (trajectory, sub_block) order");
    }
  }
  if (blocks_.empty()) {
    count_ = 0;
  }
  // every mode receives every sample, so one count serves all moments
  count_ += block.samples;
  for (std::size_t i = 0; i < totals_.size(); ++i) totals_[i] += block.sums[i];
  blocks_.push_back(std::move(block));
}

std::complex<double> EnsembleStats::mean_E(int k) const {
  const auto L = layout();
  const int p = static_cast<int>(grid().position(k));
  return {mean(L.at(p, MomentLayout::ERe)), mean(L.at(p, MomentLayout::EIm))};
}

std::complex<double> EnsembleStats::mean_Q(int k) const {
  const auto L = layout();
  const int p = static_cast<int>(grid().position(k));
  return {mean(L.at(p, MomentLayout::QRe)), mean(L.at(p, MomentLayout::QIm))};
}

double EnsembleStats::mean_abs2_E(int k) const {
  return mean(layout().at(static_cast<int>(grid().position(k)), MomentLayout::EAbs2));
}

double EnsembleStats::mean_abs2_Q(int k) const {
  return mean(layout().at(static_cast<int>(grid().position(k)), MomentLayout::QAbs2));
}

double EnsembleStats::mean_abs2_a(int k) const {
  return mean(layout().at(static_cast<int>(grid().position(k)), MomentLayout::AAbs2));
}

double EnsembleStats::mean_abs2_b(int k) const {
  return mean(layout().at(static_cast<int>(grid().position(k)), MomentLayout::BAbs2));
}

double EnsembleStats::variance_E(int k) const { return mean_abs2_E(k) - std::norm(mean_E(k)); }
double EnsembleStats::variance_Q(int k) const { return mean_abs2_Q(k) - std::norm(mean_Q(k)); }

EnsembleStats merge_stats(const EnsembleStats& s1, const EnsembleStats& s2) {
  if (s2.empty()) return s1;
  if (s1.empty()) return s2;
  if (!(s1.grid() == s2.grid())) throw std::invalid_argument("cannot merge statistics from different grids");
  EnsembleStats out(s1.grid());
  out.count_ = s1.count_ + s2.count_;
  for (std::size_t i = 0; i < out.totals_.size(); ++i) out.totals_[i] = s1.totals_[i] + s2.totals_[i];
  out.blocks_.reserve(s1.blocks_.size() + s2.blocks_.size());
  auto key_less = [](const MomentBlock& a, const MomentBlock& b) {
    return a.trajectory != b.trajectory ? a.trajectory < b.trajectory : a.sub_block < b.sub_block;
  };
  std::merge(s1.blocks_.begin(), s1.blocks_.end(), s2.blocks_.begin(), s2.blocks_.end(),
             std::back_inserter(out.blocks_), key_less);
  for (std::size_t i = 1; i < out.blocks_.size(); ++i) {
    if (out.blocks_[i].same_key(out.blocks_[i - 1])) {
      throw std::invalid_argument("cannot merge statistics that share trajectory " +
                                  std::to_string(out.blocks_[i].trajectory));
    }
  }
  out.aborts_ = s1.aborts_;
  out.aborts_.insert(out.aborts_.end(), s2.aborts_.begin(), s2.aborts_.end());
  std::sort(out.aborts_.begin(), out.aborts_.end(),
            [](const AbortRecord& a, const AbortRecord& b) { return a.trajectory < b.trajectory; });
  return out;
}

EnsembleStats merge_tree(std::vector<EnsembleStats> parts) {
  if (parts.empty()) return {};
  while (parts.size() > 1) {
    std::vector<EnsembleStats> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(merge_stats(parts[i], parts[i + 1]));
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

ValidationReport check_protocol(const RunProtocol& protocol) {
  ValidationReport report = check_ramp(protocol.ramp);
  if (protocol.n_trajectories < 2) report.add("trajectories", "trajectories must be at least 2");
  if (!(std::isfinite(protocol.dt) && protocol.dt > 0.0)) report.add("dt", "dt must be positive");
  if (protocol.blocks_per_trajectory < 1) {
    report.add("blocks_per_trajectory", "blocks_per_trajectory must be at least 1");
  }
  if (report.ok()) {
    const auto plan = StepPlan::from(protocol);
    if (plan.stride_steps == 0) report.add("sample_stride", "sample_stride must be at least one time step");
    if (plan.samples < static_cast<std::uint64_t>(protocol.blocks_per_trajectory)) {
      report.add("blocks_per_trajectory", "blocks_per_trajectory exceeds the samples per trajectory");
    }
  }
  return report;
}

StepPlan StepPlan::from(const RunProtocol& protocol) {
  const double dt = protocol.dt;
  auto steps = [dt](double t) { return static_cast<std::uint64_t>(std::llround(t / dt)); };
  StepPlan plan;
  plan.ramp_steps = steps(protocol.ramp.t_ramp);
  plan.settle_steps = steps(protocol.ramp.t_settle);
  plan.stride_steps = steps(protocol.ramp.sample_stride);
  plan.samples = static_cast<std::uint64_t>(std::floor(protocol.ramp.t_window / protocol.ramp.sample_stride + 1e-9));
  return plan;
}

bool StepPlan::is_sample(std::uint64_t steps_done, std::uint64_t& sample_index) const {
  const std::uint64_t start = ramp_steps + settle_steps;
  if (steps_done <= start || stride_steps == 0) return false;
  const std::uint64_t offset = steps_done - start;
  if (offset % stride_steps != 0) return false;
  const std::uint64_t j = offset / stride_steps;
  if (j > samples) return false;
  sample_index = j - 1;
  return true;
}

unsigned default_workers() {
  if (const char* env = std::getenv("MMTWA_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t unpaired_baseline_seed(std::uint64_t master_seed) {
  // splitmix64 finalizer of the seed: a fixed, distinct key
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void accumulate_sample(const TrajectoryState& state, std::vector<double>& sums) {
  const int n = static_cast<int>(state.a.size());
  const MomentLayout L{n};
  for (int p = 0; p < n; ++p) {
    const int m = n - 1 - p;
    const cplx e = state.a[p] + std::conj(state.a[m]);
    const cplx q = state.b[p] + std::conj(state.b[m]);
    sums[L.at(p, MomentLayout::ERe)] += e.real();
    sums[L.at(p, MomentLayout::EIm)] += e.imag();
    sums[L.at(p, MomentLayout::EAbs2)] += std::norm(e);
    sums[L.at(p, MomentLayout::QRe)] += q.real();
    sums[L.at(p, MomentLayout::QIm)] += q.imag();
    sums[L.at(p, MomentLayout::QAbs2)] += std::norm(q);
    sums[L.at(p, MomentLayout::AAbs2)] += std::norm(state.a[p]);
    sums[L.at(p, MomentLayout::BAbs2)] += std::norm(state.b[p]);
  }
  const cplx a0 = state.a[static_cast<std::size_t>(n / 2)];
  sums[L.quad(MomentLayout::X)] += a0.real();
  sums[L.quad(MomentLayout::Y)] += a0.imag();
  sums[L.quad(MomentLayout::XX)] += a0.real() * a0.real();
  sums[L.quad(MomentLayout::YY)] += a0.imag() * a0.imag();
  sums[L.quad(MomentLayout::XY)] += a0.real() * a0.imag();
}

namespace {

constexpr int kLanes = 8;

template <int W>
void accumulate_lane(const LaneFields<W>& f, int modes, int lane, std::vector<double>& sums) {
  const MomentLayout L{modes};
  for (int p = 0; p < modes; ++p) {
    const int m = modes - 1 - p;
    const std::size_t op = static_cast<std::size_t>(p) * W + lane;
    const std::size_t om = static_cast<std::size_t>(m) * W + lane;
    const double er = f.ar[op] + f.ar[om];
    const double ei = f.ai[op] - f.ai[om];
    const double qr = f.br[op] + f.br[om];
    const double qi = f.bi[op] - f.bi[om];
    sums[L.at(p, MomentLayout::ERe)] += er;
    sums[L.at(p, MomentLayout::EIm)] += ei;
    sums[L.at(p, MomentLayout::EAbs2)] += er * er + ei * ei;
    sums[L.at(p, MomentLayout::QRe)] += qr;
    sums[L.at(p, MomentLayout::QIm)] += qi;
    sums[L.at(p, MomentLayout::QAbs2)] += qr * qr + qi * qi;
    sums[L.at(p, MomentLayout::AAbs2)] += f.ar[op] * f.ar[op] + f.ai[op] * f.ai[op];
    sums[L.at(p, MomentLayout::BAbs2)] += f.br[op] * f.br[op] + f.bi[op] * f.bi[op];
  }
  const std::size_t o0 = static_cast<std::size_t>(modes / 2) * W + lane;
  const double x = f.ar[o0];
  const double y = f.ai[o0];
  sums[L.quad(MomentLayout::X)] += x;
  sums[L.quad(MomentLayout::Y)] += y;
  sums[L.quad(MomentLayout::XX)] += x * x;
  sums[L.quad(MomentLayout::YY)] += y * y;
  sums[L.quad(MomentLayout::XY)] += x * y;
}

template <int W>
int first_nonfinite_mode(const LaneFields<W>& f, int modes, int lane, std::string& field) {
  for (int p = 0; p < modes; ++p) {
    const std::size_t o = static_cast<std::size_t>(p) * W + lane;
    if (!std::isfinite(f.ar[o]) || !std::isfinite(f.ai[o])) {
      field = "cavity";
      return p;
    }
    if (!std::isfinite(f.br[o]) || !std::isfinite(f.bi[o])) {
      field = "raman";
      return p;
    }
  }
  field = "unknown";
  return 0;
}

/// Lanes of one batch for one spec: integrator plus per-lane block sums.
template <int W>
struct LaneTrack {
  LaneIntegrator<W> integrator;
  std::array<bool, W> alive{};
  std::vector<std::vector<double>> block_sums;  // [lane * blocks + b]
  EnsembleStats stats;

  LaneTrack(const SystemSpec& spec, double dt, int blocks)
      : integrator(spec, dt),
        block_sums(static_cast<std::size_t>(W * blocks),
                   std::vector<double>(MomentLayout{spec.modes()}.size(), 0.0)),
        stats(spec.grid) {}

  void check(std::uint64_t first_traj, std::uint64_t seed, double t) {
    bool ok[W];
    integrator.finite_lanes(ok);
    for (int l = 0; l < W; ++l) {
      if (!alive[l] || ok[l]) continue;
      std::string field;
      const int p = first_nonfinite_mode<W>(integrator.state(), integrator.modes(), l, field);
      const int k = integrator.kernel().spec().grid.momentum(static_cast<std::size_t>(p));
      const TrajectoryAborted err(t, k, field);
      stats.add_abort({first_traj + static_cast<std::uint64_t>(l), seed, t, k, err.what()});
      alive[l] = false;
      integrator.clear_lane(l);
    }
  }
};

template <int W>
void run_batch(const SystemSpec& spec, const RunProtocol& protocol, const StepPlan& plan, std::uint64_t first_traj,
               bool with_baseline, EnsembleStats& coupled_out, EnsembleStats* baseline_out) {
  const int blocks = protocol.blocks_per_trajectory;
  const auto key = philox_key(protocol.master_seed);
  std::array<std::uint64_t, W> streams{};
  for (int l = 0; l < W; ++l) streams[l] = first_traj + static_cast<std::uint64_t>(l);
  const std::span<const std::uint64_t, W> stream_span(streams);

  LaneTrack<W> coupled(spec, protocol.dt, blocks);
  std::optional<LaneTrack<W>> baseline;
  if (with_baseline) baseline.emplace(spec.uncoupled(), protocol.dt, blocks);

  for (int l = 0; l < W; ++l) {
    const bool active = first_traj + static_cast<std::uint64_t>(l) < protocol.n_trajectories;
    coupled.alive[l] = active;
    if (baseline) baseline->alive[l] = active;
  }

  coupled.integrator.sample_initial(key, stream_span);
  if (baseline) baseline->integrator.state() = coupled.integrator.state();

  const double dt = protocol.dt;
  const std::uint64_t total = plan.total_steps();
  const int modes = spec.modes();
  for (std::uint64_t i = 0; i < total; ++i) {
    const double t_mid = (static_cast<double>(i) + 0.5) * dt;
    const double ramp = protocol.ramp.factor(t_mid);
    coupled.integrator.draw_noise(key, stream_span, i);
    coupled.integrator.advance(ramp);
    const double t_end = static_cast<double>(i + 1) * dt;
    coupled.check(first_traj, protocol.master_seed, t_end);
    if (baseline) {
      baseline->integrator.set_noise_from_normals(coupled.integrator.last_normals().data());
      baseline->integrator.advance(ramp);
      baseline->check(first_traj, protocol.master_seed, t_end);
    }
    std::uint64_t sample = 0;
    if (plan.is_sample(i + 1, sample)) {
      const auto b = static_cast<int>(sample * static_cast<std::uint64_t>(blocks) / plan.samples);
      for (int l = 0; l < W; ++l) {
        if (coupled.alive[l]) {
          accumulate_lane<W>(coupled.integrator.state(), modes, l, coupled.block_sums[l * blocks + b]);
        }
        if (baseline && baseline->alive[l]) {
          accumulate_lane<W>(baseline->integrator.state(), modes, l, baseline->block_sums[l * blocks + b]);
        }
      }
    }
  }

  auto finish = [&](LaneTrack<W>& track, EnsembleStats& out) {
    for (int l = 0; l < W; ++l) {
      if (!track.alive[l]) continue;
      for (int b = 0; b < blocks; ++b) {
        // sample j lands in block floor(j * blocks / samples)
        std::uint64_t n = 0;
        for (std::uint64_t j = 0; j < plan.samples; ++j) {
          if (static_cast<int>(j * static_cast<std::uint64_t>(blocks) / plan.samples) == b) ++n;
        }
        track.stats.add_block({first_traj + static_cast<std::uint64_t>(l), static_cast<std::uint32_t>(b), n,
                               std::move(track.block_sums[l * blocks + b])});
      }
    }
    out = std::move(track.stats);
  };
  finish(coupled, coupled_out);
  if (baseline && baseline_out) finish(*baseline, *baseline_out);
}

void enforce_abort_limit(const EnsembleStats& stats, const RunProtocol& protocol) {
  const auto aborted = static_cast<std::uint64_t>(stats.aborts().size());
  if (aborted * 1000 > protocol.n_trajectories) {
    std::string msg = std::to_string(aborted) + " of " + std::to_string(protocol.n_trajectories) +
                      " trajectories aborted (limit 0.1%)";
    if (!stats.aborts().empty()) {
      const auto& a = stats.aborts().front();
      msg += "; first: trajectory " + std::to_string(a.trajectory) + " seed " + std::to_string(a.seed) + ": " +
             a.what;
    }
    throw EnsembleFailure(msg, stats.aborts());
  }
}

std::pair<EnsembleStats, EnsembleStats> run_lanes(const SystemSpec& spec, const RunProtocol& protocol,
                                                  unsigned workers, bool with_baseline) {
  validate_spec(spec);
  if (auto report = check_protocol(protocol); !report.ok()) throw ValidationError(std::move(report));
  const auto plan = StepPlan::from(protocol);
  const std::uint64_t batches = (protocol.n_trajectories + kLanes - 1) / kLanes;
  std::vector<EnsembleStats> coupled(batches), baseline(with_baseline ? batches : 0);
  parallel_for(batches, workers == 0 ? default_workers() : workers, [&](std::size_t b) {
    run_batch<kLanes>(spec, protocol, plan, b * kLanes, with_baseline, coupled[b],
                      with_baseline ? &baseline[b] : nullptr);
  });
  auto c = merge_tree(std::move(coupled));
  auto z = with_baseline ? merge_tree(std::move(baseline)) : EnsembleStats{};
  return {std::move(c), std::move(z)};
}

}  // namespace

EnsembleStats run_ensemble(const SystemSpec& spec, const RunProtocol& protocol, unsigned workers) {
  auto [stats, unused] = run_lanes(spec, protocol, workers, false);
  enforce_abort_limit(stats, protocol);
  return stats;
}

PairedStats run_paired(const SystemSpec& spec, const RunProtocol& protocol, unsigned workers) {
  if (protocol.paired_baseline) {
    auto [c, z] = run_lanes(spec, protocol, workers, true);
    enforce_abort_limit(c, protocol);
    enforce_abort_limit(z, protocol);
    return {std::move(c), std::move(z)};
  }
  RunProtocol independent = protocol;
  independent.master_seed = unpaired_baseline_seed(protocol.master_seed);
  return {run_ensemble(spec, protocol, workers), run_ensemble(spec.uncoupled(), independent, workers)};
}

}  // namespace mmtwa
