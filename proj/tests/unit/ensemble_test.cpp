#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mmtwa/dynamics.hpp"
#include "mmtwa/ensemble.hpp"
#include "mmtwa/observables.hpp"
#include "mmtwa/oracles.hpp"

using namespace mmtwa;

namespace {

RunProtocol short_protocol(std::uint64_t trajectories) {
  RunProtocol p;
  p.n_trajectories = trajectories;
  p.ramp.t_ramp = 10.0;
  p.ramp.t_settle = 5.0;
  p.ramp.t_window = 10.0;
  return p;
}

SystemSpec small_spec() {
  SystemSpec s;
  s.grid.half_width = 2;
  s.g = 0.06;
  s.g4 = 0.02;
  return s;
}

struct MeanAndError {
  double mean = 0.0, error = 0.0;
};

template <typename F>
MeanAndError sample_mean(int n, F&& f) {
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = f(i);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / (n - 1))};
}

EnsembleStats synthetic_stats(const ModeGrid& grid, std::uint64_t first, std::uint64_t count, std::uint64_t seed) {
  SystemSpec s;
  s.grid = grid;
  EnsembleStats stats(grid);
  const MomentLayout layout{grid.size()};
  for (std::uint64_t t = first; t < first + count; ++t) {
    MomentBlock b{t, 0, 3, std::vector<double>(layout.size(), 0.0)};
    for (std::uint64_t j = 0; j < 3; ++j) accumulate_sample(oracle::random_state(s, seed, 3 * t + j), b.sums);
    stats.add_block(std::move(b));
  }
  return stats;
}

void check_identical(const EnsembleStats& x, const EnsembleStats& y) {
  REQUIRE(x.count() == y.count());
  REQUIRE(x.blocks().size() == y.blocks().size());
  CHECK(x.totals() == y.totals());
  for (std::size_t i = 0; i < x.blocks().size(); ++i) {
    CHECK(x.blocks()[i].trajectory == y.blocks()[i].trajectory);
    CHECK(x.blocks()[i].sums == y.blocks()[i].sums);
  }
}

}  // namespace

TEST_SUITE("ensemble") {

TEST_CASE("vacuum initial sample") {
  SystemSpec s;
  s.grid.half_width = 0;
  constexpr int n = 100000;
  std::vector<TrajectoryState> draws;
  for (int i = 0; i < n; ++i) {
    RandomStream rng(17, static_cast<std::uint64_t>(i), StreamPurpose::Initial);
    draws.push_back(sample_initial(s, rng));
  }
  const auto a2 = sample_mean(n, [&](int i) { return std::norm(draws[i].a[0]); });
  const auto b2 = sample_mean(n, [&](int i) { return std::norm(draws[i].b[0]); });
  const auto are = sample_mean(n, [&](int i) { return draws[i].a[0].real(); });
  const auto bim = sample_mean(n, [&](int i) { return draws[i].b[0].imag(); });
  CHECK(std::abs(a2.mean - 0.5) < 3 * a2.error);
  CHECK(std::abs(b2.mean - 0.5) < 3 * b2.error);
  CHECK(std::abs(are.mean) < 3 * are.error);
  CHECK(std::abs(bim.mean) < 3 * bim.error);
}

TEST_CASE("thermal initial sample") {
  SystemSpec s;
  s.grid.half_width = 0;
  s.temperature = 2.0;
  constexpr int n = 100000;
  RandomStream rng(18, 0, StreamPurpose::Initial);
  std::vector<TrajectoryState> draws;
  for (int i = 0; i < n; ++i) draws.push_back(sample_initial(s, rng));
  const auto b2 = sample_mean(n, [&](int i) { return std::norm(draws[i].b[0]); });
  const auto a2 = sample_mean(n, [&](int i) { return std::norm(draws[i].a[0]); });
  CHECK(std::abs(b2.mean - 0.5 / std::tanh(0.25)) < 3 * b2.error);
  CHECK(std::abs(a2.mean - 0.5 / std::tanh(0.125)) < 3 * a2.error);
  CHECK(b2.mean == doctest::Approx(2.04).epsilon(0.02));
}

TEST_CASE("step plan") {
  RunProtocol p;
  const auto plan = StepPlan::from(p);
  CHECK(plan.ramp_steps == 120000);
  CHECK(plan.settle_steps == 40000);
  CHECK(plan.stride_steps == 200);
  CHECK(plan.samples == 200);
  CHECK(plan.total_steps() == 200000);
  std::uint64_t idx = 99;
  CHECK_FALSE(plan.is_sample(160000, idx));
  CHECK(plan.is_sample(160200, idx));
  CHECK(idx == 0);
  CHECK_FALSE(plan.is_sample(160201, idx));
  CHECK(plan.is_sample(200000, idx));
  CHECK(idx == 199);
  CHECK_FALSE(plan.is_sample(200200, idx));
}

TEST_CASE("protocol validation") {
  RunProtocol p;
  CHECK(check_protocol(p).ok());
  p.n_trajectories = 1;
  CHECK(check_protocol(p).violations.front().field == "trajectories");
  p = RunProtocol{};
  p.dt = 0.0;
  CHECK_FALSE(check_protocol(p).ok());
  p = RunProtocol{};
  p.blocks_per_trajectory = 500;
  CHECK(check_protocol(p).violations.front().field == "blocks_per_trajectory");
  p = RunProtocol{};
  p.ramp.sample_stride = 0.001;
  CHECK(check_protocol(p).violations.front().field == "sample_stride");
  CHECK_THROWS_AS(run_ensemble(SystemSpec{}, p, 1), ValidationError);
  SystemSpec bad;
  bad.kappa = 0.0;
  CHECK_THROWS_AS(run_ensemble(bad, short_protocol(4), 1), ValidationError);
}

TEST_CASE("merge identity, counts and associativity") {
  const ModeGrid grid{2, WrapPolicy::Wrap};
  const auto a = synthetic_stats(grid, 0, 5, 1);
  const auto b = synthetic_stats(grid, 5, 7, 1);
  const auto c = synthetic_stats(grid, 12, 4, 1);
  check_identical(merge_stats(a, EnsembleStats{}), a);
  check_identical(merge_stats(EnsembleStats{}, a), a);
  CHECK(merge_stats(a, b).count() == a.count() + b.count());

  const auto left = merge_stats(merge_stats(a, b), c);
  const auto right = merge_stats(a, merge_stats(b, c));
  for (std::size_t i = 0; i < left.totals().size(); ++i) {
    CHECK(std::abs(left.totals()[i] - right.totals()[i]) <= 1e-10 * std::abs(left.totals()[i]) + 1e-300);
  }
  const auto reordered = merge_stats(c, merge_stats(b, a));
  REQUIRE(reordered.blocks().size() == left.blocks().size());
  for (std::size_t i = 0; i < left.blocks().size(); ++i) {
    CHECK(reordered.blocks()[i].trajectory == left.blocks()[i].trajectory);
    CHECK(reordered.blocks()[i].sums == left.blocks()[i].sums);
  }

  EnsembleStats half1(grid), half2(grid);
  for (std::uint64_t t = 0; t < 3500; ++t) {
    (t < 1750 ? half1 : half2).add_block({t, 0, 1, std::vector<double>(MomentLayout{5}.size(), 1.0)});
  }
  CHECK(half1.count() == 1750);
  CHECK(merge_stats(half1, half2).count() == 3500);
  CHECK(merge_stats(half1, half2).trajectories() == 3500);
}

TEST_CASE("merge rejects overlapping or mismatched statistics") {
  const ModeGrid grid{2, WrapPolicy::Wrap};
  const auto a = synthetic_stats(grid, 0, 5, 1);
  const auto b = synthetic_stats(grid, 4, 3, 1);
  CHECK_THROWS_AS(merge_stats(a, b), std::invalid_argument);
  const auto other = synthetic_stats(ModeGrid{1, WrapPolicy::Wrap}, 10, 2, 1);
  CHECK_THROWS_AS(merge_stats(a, other), std::invalid_argument);
  EnsembleStats s(grid);
  s.add_block(a.blocks()[1]);
  CHECK_THROWS_AS(s.add_block(a.blocks()[0]), std::invalid_argument);
}

TEST_CASE("merge tree equals sequential merging") {
  const ModeGrid grid{1, WrapPolicy::Wrap};
  std::vector<EnsembleStats> parts;
  for (std::uint64_t i = 0; i < 7; ++i) parts.push_back(synthetic_stats(grid, 3 * i, 3, 9));
  EnsembleStats seq;
  for (const auto& p : parts) seq = merge_stats(seq, p);
  const auto tree = merge_tree(parts);
  CHECK(tree.count() == seq.count());
  REQUIRE(tree.blocks().size() == seq.blocks().size());
  for (std::size_t i = 0; i < tree.blocks().size(); ++i) CHECK(tree.blocks()[i].sums == seq.blocks()[i].sums);
  CHECK(merge_tree({}).empty());
}

TEST_CASE("results do not depend on the worker count") {
  const auto s = small_spec();
  const auto p = short_protocol(37);
  const auto one = run_ensemble(s, p, 1);
  check_identical(one, run_ensemble(s, p, 3));
  check_identical(one, run_ensemble(s, p, 8));
  CHECK(one.trajectories() == 37);
  CHECK(one.count() == 37 * 10);
}

TEST_CASE("sub-blocks split each window") {
  auto p = short_protocol(4);
  p.blocks_per_trajectory = 3;
  const auto stats = run_ensemble(small_spec(), p, 1);
  REQUIRE(stats.blocks().size() == 12);
  std::uint64_t per_traj = 0;
  for (int b = 0; b < 3; ++b) per_traj += stats.blocks()[b].samples;
  CHECK(per_traj == 10);
  CHECK(stats.trajectories() == 4);
  auto whole = p;
  whole.blocks_per_trajectory = 1;
  const auto ref = run_ensemble(small_spec(), whole, 1);
  for (std::size_t i = 0; i < ref.totals().size(); ++i) {
    CHECK(stats.totals()[i] == doctest::Approx(ref.totals()[i]).epsilon(1e-12));
  }
}

TEST_CASE("paired baseline equals an uncoupled run with the same seed") {
  const auto s = small_spec();
  const auto p = short_protocol(12);
  const auto paired = run_paired(s, p, 2);
  check_identical(paired.baseline, run_ensemble(s.uncoupled(), p, 1));
  check_identical(paired.coupled, run_ensemble(s, p, 1));

  auto unpaired = p;
  unpaired.paired_baseline = false;
  const auto sep = run_paired(s, unpaired, 1);
  auto shifted = p;
  shifted.master_seed = unpaired_baseline_seed(p.master_seed);
  check_identical(sep.baseline, run_ensemble(s.uncoupled(), shifted, 1));
  CHECK(unpaired_baseline_seed(p.master_seed) != p.master_seed);
}

TEST_CASE("standard error scales as one over root n") {
  SystemSpec s;
  s.grid.half_width = 0;
  auto p = oracle::bath_protocol(100);
  p.ramp.t_window = 50.0;
  const auto small = run_ensemble(s, p, 1);
  p.n_trajectories = 400;
  const auto large = run_ensemble(s, p, 1);
  const double ratio =
      variance_influence(small, 0, false).standard_error() / variance_influence(large, 0, false).standard_error();
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("error bars do not shrink when blocks get longer") {
  SystemSpec s;
  s.grid.half_width = 0;
  auto p = oracle::bath_protocol(200);
  double previous = INFINITY;
  for (int blocks : {8, 4, 2, 1}) {
    p.blocks_per_trajectory = blocks;
    const auto stats = run_ensemble(s, p, 1);
    const double se = variance_influence(stats, 0, false).standard_error();
    if (blocks < 8) CHECK(se >= previous);
    previous = se;
  }
}

TEST_CASE("uncoupled ensemble reaches the bath steady state") {
  SystemSpec s;
  s.grid.half_width = 1;
  s.cavity = Dispersion::quadratic(0.4, 1.0);
  s.temperature = 0.0;
  const auto stats = run_ensemble(s.uncoupled(), oracle::bath_protocol(300), 1);
  for (int k = -1; k <= 1; ++k) {
    const auto v = variance_influence(stats, k, false);
    CHECK(std::abs(stats.variance_E(k) - 1.0) < 3 * v.standard_error());
    const auto q = variance_influence(stats, k, true);
    CHECK(std::abs(stats.variance_Q(k) - 1.0) < 3 * q.standard_error());
    const auto L = stats.layout();
    const int pos = static_cast<int>(s.grid.position(k));
    const double se_re = mean_influence(stats, {{L.at(pos, MomentLayout::ERe), 1.0}}).standard_error();
    CHECK(std::abs(stats.mean_E(k).real()) < 3 * se_re);
  }
}

TEST_CASE("abort limit") {
  SystemSpec s;
  s.grid.half_width = 0;
  s.g = 50.0;
  s.cavity = Dispersion::flat(0.5);
  auto p = short_protocol(8);
  p.ramp.t_ramp = 1.0;
  p.ramp.t_settle = 200.0;
  try {
    run_ensemble(s, p, 1);
    FAIL("expected the ensemble to fail");
  } catch (const EnsembleFailure& e) {
    CHECK(!e.aborts().empty());
    CHECK(e.aborts().front().what.size() > 0);
  }
}

}
