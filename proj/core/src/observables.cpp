#include "mmtwa/observables.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mmtwa {

namespace {

template <typename Report>
const auto& find_mode(const Report& r, int k) {
  const int key = std::abs(k);
  for (const auto& m : r.modes) {
    if (m.k == key) return m;
  }
  throw std::out_of_range("no entry for momentum " + std::to_string(k));
}

void require_data(const EnsembleStats& stats, const char* what) {
  if (stats.empty() || stats.count() == 0) throw std::domain_error(std::string(what) + ": statistics are empty");
  if (stats.blocks().size() < 2) throw std::domain_error(std::string(what) + ": at least two blocks are needed");
}

void require_same_grid(const EnsembleStats& a, const EnsembleStats& b) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument("coupled and baseline statistics use different grids");
}

std::size_t pos_of(const EnsembleStats& s, int k) { return s.grid().position(k); }

Estimate variance_estimate(const EnsembleStats& s, int k, bool raman, Influence& psi) {
  psi = variance_influence(s, k, raman);
  return {raman ? s.variance_Q(k) : s.variance_E(k), psi.standard_error()};
}

void require_valid_baseline(const Estimate& v0, int k, const char* field) {
  if (!(v0.value > 10.0 * v0.error)) {
    throw BaselineInvalid(std::string("baseline variance of ") + field + " at k = " + std::to_string(k) + " (" +
                          std::to_string(v0.value) + " +- " + std::to_string(v0.error) +
                          ") is consistent with zero");
  }
}

Estimate relative_change(const Estimate& g, const Estimate& z, const Influence& pg, const Influence& pz,
                         bool paired) {
  return {(g.value - z.value) / z.value, ratio_error(g.value, z.value, pg, pz, paired)};
}

}  // namespace

const ModeVariance& VarianceReport::at(int k) const { return find_mode(*this, k); }
const ThermalMode& ThermalReport::at(int k) const { return find_mode(*this, k); }

const ModeShift& RamanShiftReport::at(int k) const {
  for (const auto& m : modes) {
    if (m.k == k) return m;
  }
  throw std::out_of_range("no entry for momentum " + std::to_string(k));
}

double Influence::standard_error() const {
  const auto b = static_cast<double>(psi_.size());
  if (psi_.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double ss = 0.0;
  for (double v : psi_) ss += v * v;
  return std::sqrt(ss / (b * (b - 1.0)));
}

Influence& Influence::operator+=(const Influence& o) {
  if (psi_.empty()) {
    psi_ = o.psi_;
    return *this;
  }
  if (o.psi_.size() != psi_.size()) throw std::invalid_argument("influences over different block sets");
  for (std::size_t i = 0; i < psi_.size(); ++i) psi_[i] += o.psi_[i];
  return *this;
}

Influence operator*(double c, Influence f) {
  for (double& v : f.psi_) v *= c;
  return f;
}

Influence mean_influence(const EnsembleStats& stats, const std::vector<std::pair<std::size_t, double>>& coefs) {
  const auto& blocks = stats.blocks();
  const double n = static_cast<double>(stats.count());
  const double scale = static_cast<double>(blocks.size()) / n;
  std::vector<double> means;
  means.reserve(coefs.size());
  for (const auto& [offset, c] : coefs) means.push_back(stats.mean(offset));
  std::vector<double> psi(blocks.size(), 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double nb = static_cast<double>(blocks[b].samples);
    double acc = 0.0;
    for (std::size_t i = 0; i < coefs.size(); ++i) {
      acc += coefs[i].second * (blocks[b].sums[coefs[i].first] - nb * means[i]);
    }
    psi[b] = scale * acc;
  }
  return Influence(std::move(psi));
}

Influence variance_influence(const EnsembleStats& stats, int k, bool raman) {
  const auto L = stats.layout();
  const int p = static_cast<int>(pos_of(stats, k));
  const auto re = L.at(p, raman ? MomentLayout::QRe : MomentLayout::ERe);
  const auto im = L.at(p, raman ? MomentLayout::QIm : MomentLayout::EIm);
  const auto sq = L.at(p, raman ? MomentLayout::QAbs2 : MomentLayout::EAbs2);
  return mean_influence(stats, {{sq, 1.0}, {re, -2.0 * stats.mean(re)}, {im, -2.0 * stats.mean(im)}});
}

bool blocks_paired(const EnsembleStats& a, const EnsembleStats& b) {
  const auto& x = a.blocks();
  const auto& y = b.blocks();
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i].same_key(y[i]) || x[i].samples != y[i].samples) return false;
  }
  return true;
}

double ratio_error(double v_g, double v_0, const Influence& g, const Influence& z, bool paired) {
  if (paired) {
    return ((1.0 / v_0) * g - (v_g / (v_0 * v_0)) * z).standard_error();
  }
  const double eg = g.standard_error() / v_0;
  const double ez = z.standard_error() * v_g / (v_0 * v_0);
  return std::hypot(eg, ez);
}

VarianceReport delta_variances(const EnsembleStats& coupled, const EnsembleStats& baseline) {
  require_data(coupled, "delta_variances");
  require_data(baseline, "delta_variances");
  require_same_grid(coupled, baseline);
  const bool paired = blocks_paired(coupled, baseline);
  VarianceReport report;
  for (int k = 0; k <= coupled.grid().half_width; ++k) {
    ModeVariance m;
    m.k = k;
    Influence eg, e0, qg, q0;
    m.V_E_g = variance_estimate(coupled, k, false, eg);
    m.V_E_0 = variance_estimate(baseline, k, false, e0);
    m.V_Q_g = variance_estimate(coupled, k, true, qg);
    m.V_Q_0 = variance_estimate(baseline, k, true, q0);
    require_valid_baseline(m.V_E_0, k, "E");
    require_valid_baseline(m.V_Q_0, k, "Q");
    m.dV_E = relative_change(m.V_E_g, m.V_E_0, eg, e0, paired);
    m.dV_Q = relative_change(m.V_Q_g, m.V_Q_0, qg, q0, paired);
    report.modes.push_back(m);
  }
  return report;
}

ThermalReport thermal_deltas(const EnsembleStats& coupled, const EnsembleStats& baseline) {
  const VarianceReport base = delta_variances(coupled, baseline);
  ThermalReport report;
  for (const auto& m : base.modes) {
    ThermalMode t;
    t.k = m.k;
    t.dV_E_th = m.dV_E;
    t.dV_Q_th = m.dV_Q;
    require_valid_baseline(m.V_E_g, m.k, "E (coupled)");
    const Influence eg = variance_influence(coupled, m.k, false);
    const Influence qg = variance_influence(coupled, m.k, true);
    t.dVp_Q_th = relative_change(m.V_Q_g, m.V_E_g, qg, eg, true);
    report.modes.push_back(t);
  }
  return report;
}

QuadratureCovariance quadrature_covariance(const EnsembleStats& stats) {
  const auto L = stats.layout();
  const double mx = stats.mean(L.quad(MomentLayout::X));
  const double my = stats.mean(L.quad(MomentLayout::Y));
  return {stats.mean(L.quad(MomentLayout::XX)) - mx * mx, stats.mean(L.quad(MomentLayout::YY)) - my * my,
          stats.mean(L.quad(MomentLayout::XY)) - mx * my};
}

double rotated_variance(const QuadratureCovariance& c, double theta) {
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  return 4.0 * (cs * cs * c.xx + sn * sn * c.yy + 2.0 * sn * cs * c.xy);
}

SqueezingReport squeezing_scan(const EnsembleStats& stats, int n_angles) {
  if (n_angles < 8) throw std::invalid_argument("n_angles must be at least 8");
  require_data(stats, "squeezing_scan");
  const auto cov = quadrature_covariance(stats);
  SqueezingReport r;
  r.resolution = std::numbers::pi / n_angles;
  int jmin = 0, jmax = 0;
  r.V_min = r.V_max = rotated_variance(cov, 0.0);
  for (int j = 1; j < n_angles; ++j) {
    const double v = rotated_variance(cov, j * r.resolution);
    if (v < r.V_min) {
      r.V_min = v;
      jmin = j;
    }
    if (v > r.V_max) {
      r.V_max = v;
      jmax = j;
    }
  }
  r.theta_min = jmin * r.resolution;
  r.theta_max = jmax * r.resolution;

  const auto L = stats.layout();
  const auto X = L.quad(MomentLayout::X), Y = L.quad(MomentLayout::Y);
  const double mx = stats.mean(X), my = stats.mean(Y);
  const Influence sxx = mean_influence(stats, {{L.quad(MomentLayout::XX), 1.0}, {X, -2.0 * mx}});
  const Influence syy = mean_influence(stats, {{L.quad(MomentLayout::YY), 1.0}, {Y, -2.0 * my}});
  const Influence sxy = mean_influence(stats, {{L.quad(MomentLayout::XY), 1.0}, {X, -my}, {Y, -mx}});
  auto at_angle = [&](double theta) {
    const double cs = std::cos(theta), sn = std::sin(theta);
    return 4.0 * (cs * cs) * sxx + 4.0 * (sn * sn) * syy + 8.0 * (sn * cs) * sxy;
  };
  const Influence pmin = at_angle(r.theta_min);
  const Influence pmax = at_angle(r.theta_max);
  r.min = {r.V_min, pmin.standard_error()};
  r.max = {r.V_max, pmax.standard_error()};
  r.spread = {r.V_max - r.V_min, (pmax - pmin).standard_error()};
  return r;
}

RamanShiftReport raman_shift(const EnsembleStats& stats) {
  require_data(stats, "raman_shift");
  const auto L = stats.layout();
  RamanShiftReport r;
  const int M = stats.grid().half_width;
  for (int k = -M; k <= M; ++k) {
    const auto off = L.at(static_cast<int>(pos_of(stats, k)), MomentLayout::QRe);
    r.modes.push_back({k, {stats.mean(off), mean_influence(stats, {{off, 1.0}}).standard_error()}});
  }
  return r;
}

}  // namespace mmtwa
