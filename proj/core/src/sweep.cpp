#include "mmtwa/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mmtwa/output.hpp"

namespace mmtwa {

namespace {

bool same_frequency(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

SystemSpec Scenario::at_bandgap(double omega0c) const {
  SystemSpec s = spec;
  s.cavity.base = omega0c;
  return s;
}

std::vector<ResonanceLine> resonance_lines(const Scenario& scenario, const ModeGrid& grid) {
  const auto raman = dispersion_table(scenario.spec.raman, grid);
  std::vector<ResonanceLine> lines;
  if (scenario.spec.cavity.kind == DispersionKind::Flat || grid.half_width == 0) {
    const bool uniform =
        std::all_of(raman.begin(), raman.end(), [&](double w) { return same_frequency(w, raman.front()); });
    if (uniform) {
      lines.push_back({ResonanceLine::Kind::Resonance, std::nullopt, 0.5 * raman.front()});
    } else {
      for (int k = 0; k <= grid.half_width; ++k) {
        lines.push_back({ResonanceLine::Kind::Resonance, k, 0.5 * raman[grid.position(k)]});
      }
    }
  } else {
    lines.push_back({ResonanceLine::Kind::Threshold, std::nullopt, 0.5 * *std::max_element(raman.begin(), raman.end())});
  }
  return lines;
}

std::string annotate(const std::vector<ResonanceLine>& lines, double omega0c, int k) {
  std::vector<std::string> tokens;
  for (const auto& line : lines) {
    if (line.k && *line.k != std::abs(k)) continue;
    if (line.kind == ResonanceLine::Kind::Threshold) {
      if (omega0c > line.omega0c) tokens.insert(tokens.begin(), "nonresonant");
      tokens.push_back("threshold=" + format_number(line.omega0c));
    } else {
      tokens.push_back("resonance=" + format_number(line.omega0c));
    }
  }
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : ";") + t;
  return out;
}

std::size_t SweepResult::failed_points() const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const auto& p) { return p.failed; }));
}

std::size_t SweepResult::aborted_trajectories() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.aborted;
  return n;
}

std::vector<SweepRow> point_rows(const Scenario& scenario, double omega0c, const PairedStats& stats, int n_angles) {
  const VarianceReport var = delta_variances(stats.coupled, stats.baseline);
  const RamanShiftReport shift = raman_shift(stats.coupled);
  const SqueezingReport squeeze = squeezing_scan(stats.coupled, n_angles);
  std::optional<ThermalReport> thermal;
  if (scenario.spec.temperature > 0.0) thermal = thermal_deltas(stats.coupled, stats.baseline);
  const auto lines = resonance_lines(scenario, stats.coupled.grid());

  std::vector<SweepRow> rows;
  for (const auto& m : var.modes) {
    SweepRow r;
    r.scenario = scenario.name;
    r.omega0c = omega0c;
    r.k = m.k;
    r.dV_E = m.dV_E.value;
    r.dV_E_err = m.dV_E.error;
    r.dV_Q = m.dV_Q.value;
    r.dV_Q_err = m.dV_Q.error;
    r.V_E_g = m.V_E_g.value;
    r.V_E_0 = m.V_E_0.value;
    r.V_Q_g = m.V_Q_g.value;
    r.V_Q_0 = m.V_Q_0.value;
    if (thermal) {
      const auto& t = thermal->at(m.k);
      r.dV_E_th = t.dV_E_th.value;
      r.dV_Q_th = t.dV_Q_th.value;
      r.dVp_Q_th = t.dVp_Q_th.value;
    }
    const auto& s = shift.at(m.k);
    r.mean_Q_re = s.shift.value;
    r.mean_Q_err = s.shift.error;
    if (m.k == 0) {
      r.theta_min = squeeze.theta_min;
      r.V_min = squeeze.V_min;
      r.V_max = squeeze.V_max;
    }
    r.annotation = annotate(lines, omega0c, m.k);
    rows.push_back(std::move(r));
  }
  return rows;
}

SweepResult run_sweep(const Scenario& scenario, const std::vector<double>& bandgaps, const RunProtocol& protocol,
                      const SweepOptions& options) {
  if (bandgaps.empty()) throw std::invalid_argument("band-gap grid is empty");
  for (std::size_t i = 0; i < bandgaps.size(); ++i) {
    if (!(bandgaps[i] > 0.0)) throw std::invalid_argument("band-gap grid values must be positive");
    if (i > 0 && !(bandgaps[i] > bandgaps[i - 1])) {
      throw std::invalid_argument("band-gap grid must be strictly increasing");
    }
  }
  if (auto report = check_protocol(protocol); !report.ok()) throw ValidationError(std::move(report));

  SweepResult result;
  result.scenario = scenario.name;
  result.protocol = protocol;
  for (std::size_t i = 0; i < bandgaps.size(); ++i) {
    const double w = bandgaps[i];
    PointStatus status;
    status.omega0c = w;
    try {
      const SystemSpec spec = scenario.at_bandgap(w);
      const PairedStats stats = run_paired(spec, protocol, options.workers);
      status.aborted = stats.coupled.aborts().size() + stats.baseline.aborts().size();
      auto rows = point_rows(scenario, w, stats, options.n_angles);
      if (options.inspect) options.inspect(w, stats);
      result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    } catch (const std::exception& e) {
      status.failed = true;
      status.error = one_line(e.what());
      if (const auto* f = dynamic_cast<const EnsembleFailure*>(&e)) status.aborted = f->aborts().size();
      const auto lines = resonance_lines(scenario, scenario.spec.grid);
      for (int k = 0; k <= scenario.spec.grid.half_width; ++k) {
        SweepRow r;
        r.scenario = scenario.name;
        r.omega0c = w;
        r.k = k;
        std::string note = annotate(lines, w, k);
        r.annotation = "failed: " + status.error + (note.empty() ? "" : ";" + note);
        result.rows.push_back(std::move(r));
      }
    }
    result.points.push_back(status);
    if (options.progress) options.progress(i, bandgaps.size(), status);
  }
  return result;
}

std::vector<EffectiveComparison> compare_effective(const SweepResult& multi, const SweepResult& eff) {
  auto grid_of = [](const SweepResult& s) {
    std::vector<double> g;
    for (const auto& p : s.points) g.push_back(p.omega0c);
    return g;
  };
  if (grid_of(multi) != grid_of(eff)) throw std::invalid_argument("sweeps use different band-gap grids");

  std::map<double, const SweepRow*> single;
  for (const auto& r : eff.rows) {
    if (r.k == 0) single[r.omega0c] = &r;
  }
  std::vector<EffectiveComparison> out;
  for (const auto& p : multi.points) {
    auto it = single.find(p.omega0c);
    if (it == single.end() || !it->second->dV_E) continue;
    const SweepRow& ref = *it->second;
    EffectiveComparison c;
    c.omega0c = p.omega0c;
    bool any = false;
    for (const auto& r : multi.rows) {
      if (r.omega0c != p.omega0c || !r.dV_E) continue;
      any = true;
      auto update = [](double a, double ea, double b, double eb, double& diff, double& err, double& z) {
        const double d = std::abs(a - b);
        const double e = std::hypot(ea, eb);
        if (d > diff) {
          diff = d;
          err = e;
        }
        if (e > 0.0) z = std::max(z, d / e);
      };
      update(*r.dV_E, *r.dV_E_err, *ref.dV_E, *ref.dV_E_err, c.max_diff_E, c.err_E, c.z_E);
      update(*r.dV_Q, *r.dV_Q_err, *ref.dV_Q, *ref.dV_Q_err, c.max_diff_Q, c.err_Q, c.z_Q);
    }
    if (any) out.push_back(c);
  }
  return out;
}

}  // namespace mmtwa
