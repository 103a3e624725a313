#include "mmtwa/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mmtwa {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

constexpr double kTanhSharpness = 3.0;

}  // namespace

std::string_view to_string(WrapPolicy policy) {
  return policy == WrapPolicy::Wrap ? "wrap" : "truncate";
}

WrapPolicy parse_wrap_policy(std::string_view text) {
  if (iequals(text, "wrap")) return WrapPolicy::Wrap;
  if (iequals(text, "truncate")) return WrapPolicy::Truncate;
  throw std::invalid_argument("unknown wrap policy '" + std::string(text) + "' (expected wrap|truncate)");
}

std::size_t ModeGrid::position(int k) const {
  if (!contains(k)) {
    throw std::out_of_range("momentum index " + std::to_string(k) + " outside grid [-" +
                            std::to_string(half_width) + ", " + std::to_string(half_width) + "]");
  }
  return static_cast<std::size_t>(k + half_width);
}

std::optional<int> ModeGrid::fold(int k) const {
  if (contains(k)) return k;
  if (wrap == WrapPolicy::Truncate) return std::nullopt;
  const int n = size();
  int shifted = (k + half_width) % n;
  if (shifted < 0) shifted += n;
  return shifted - half_width;
}

std::string_view to_string(DispersionKind kind) {
  return kind == DispersionKind::Flat ? "flat" : "quadratic";
}

DispersionKind parse_dispersion_kind(std::string_view text) {
  if (iequals(text, "flat")) return DispersionKind::Flat;
  if (iequals(text, "quadratic")) return DispersionKind::Quadratic;
  throw std::invalid_argument("unknown dispersion '" + std::string(text) + "' (expected flat|quadratic)");
}

double dispersion_eval(const Dispersion& d, const ModeGrid& grid, int k) {
  grid.position(k);  // range check
  if (d.kind == DispersionKind::Flat || grid.half_width == 0) return d.base;
  const double x = static_cast<double>(k) / grid.half_width;
  return d.base + d.bandwidth * x * x;
}

std::vector<double> dispersion_table(const Dispersion& d, const ModeGrid& grid) {
  std::vector<double> out(static_cast<std::size_t>(grid.size()));
  for (int k = -grid.half_width; k <= grid.half_width; ++k) {
    out[grid.position(k)] = dispersion_eval(d, grid, k);
  }
  return out;
}

double thermal_factor(double omega, double temperature) {
  if (temperature <= 0.0) return 1.0;
  return 1.0 / std::tanh(omega / (2.0 * temperature));
}

std::string_view to_string(RampShape shape) {
  return shape == RampShape::Linear ? "linear" : "tanh";
}

RampShape parse_ramp_shape(std::string_view text) {
  if (iequals(text, "linear")) return RampShape::Linear;
  if (iequals(text, "tanh") || iequals(text, "smoothtanh")) return RampShape::SmoothTanh;
  throw std::invalid_argument("unknown ramp shape '" + std::string(text) + "' (expected linear|tanh)");
}

double RampSchedule::factor(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= t_ramp) return 1.0;
  const double x = t / t_ramp;
  if (shape == RampShape::Linear) return x;
  const double edge = std::tanh(kTanhSharpness);
  const double r = (std::tanh(kTanhSharpness * (2.0 * x - 1.0)) + edge) / (2.0 * edge);
  return std::clamp(r, 0.0, 1.0);
}

std::string ValidationReport::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

ValidationError::ValidationError(ValidationReport report)
    : std::invalid_argument("invalid configuration: " + report.describe()), report_(std::move(report)) {}

namespace {

void check_dispersion(const Dispersion& d, const ModeGrid& grid, const std::string& prefix,
                      ValidationReport& report) {
  if (!std::isfinite(d.base) || !std::isfinite(d.bandwidth)) {
    report.add(prefix + ".omega0", prefix + ".omega0 and " + prefix + ".bandwidth must be finite");
    return;
  }
  if (grid.half_width < 0) return;
  for (int k = -grid.half_width; k <= grid.half_width; ++k) {
    if (!(dispersion_eval(d, grid, k) > 0.0)) {
      report.add(prefix + ".omega0", prefix + ".omega0 must give a positive frequency at every grid momentum");
      return;
    }
  }
}

void require_positive(double v, const char* name, ValidationReport& report) {
  if (!(std::isfinite(v) && v > 0.0)) report.add(name, std::string(name) + " must be positive");
}

void require_nonnegative(double v, const char* name, ValidationReport& report) {
  if (!(std::isfinite(v) && v >= 0.0)) report.add(name, std::string(name) + " must be nonnegative");
}

}  // namespace

ValidationReport check_spec(const SystemSpec& spec) {
  ValidationReport report;
  if (spec.grid.half_width < 0) {
    report.add("grid.half_width", "grid.half_width must be nonnegative");
  }
  check_dispersion(spec.cavity, spec.grid, "cavity", report);
  check_dispersion(spec.raman, spec.grid, "raman", report);
  require_nonnegative(spec.g, "g", report);
  require_nonnegative(spec.g4, "g4", report);
  require_positive(spec.kappa, "kappa", report);
  require_positive(spec.gamma, "gamma", report);
  require_nonnegative(spec.temperature, "temperature", report);
  return report;
}

ValidationReport check_ramp(const RampSchedule& ramp) {
  ValidationReport report;
  require_positive(ramp.t_ramp, "t_ramp", report);
  require_positive(ramp.t_settle, "t_settle", report);
  require_positive(ramp.t_window, "t_window", report);
  require_positive(ramp.sample_stride, "sample_stride", report);
  if (ramp.sample_stride > ramp.t_window) {
    report.add("sample_stride", "sample_stride must not exceed t_window");
  }
  return report;
}

const SystemSpec& validate_spec(const SystemSpec& spec) {
  auto report = check_spec(spec);
  if (!report.ok()) throw ValidationError(std::move(report));
  return spec;
}

const RampSchedule& validate_ramp(const RampSchedule& ramp) {
  auto report = check_ramp(ramp);
  if (!report.ok()) throw ValidationError(std::move(report));
  return ramp;
}

}  // namespace mmtwa
