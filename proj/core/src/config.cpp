#include "mmtwa/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mmtwa {

namespace {

const std::map<std::string, std::string, std::less<>>& aliases() {
  static const std::map<std::string, std::string, std::less<>> table{
      {"bandgap", "cavity.omega0"},
      {"omega0c", "cavity.omega0"},
      {"scenario", "scenario.name"},
  };
  return table;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
  throw ConfigError("invalid value for " + key + ": '" + text + "' (expected " + expected + ")");
}

const std::string& require(const ConfigValues& v, const std::string& key) {
  auto it = v.find(key);
  if (it == v.end()) throw ConfigError("missing config key " + key);
  return it->second;
}

double get_double(const ConfigValues& v, const std::string& key) {
  const std::string& text = require(v, key);
  double out = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, text, "a number");
  return out;
}

std::int64_t get_int(const ConfigValues& v, const std::string& key) {
  const std::string& text = require(v, key);
  std::int64_t out = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, text, "an integer");
  return out;
}

std::uint64_t get_u64(const ConfigValues& v, const std::string& key) {
  const std::string& text = require(v, key);
  std::uint64_t out = 0;
  std::string_view digits = text;
  int base = 10;
  if (digits.starts_with("0x") || digits.starts_with("0X")) {
    digits.remove_prefix(2);
    base = 16;
  }
  const auto* end = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(digits.data(), end, out, base);
  if (digits.empty() || ec != std::errc() || ptr != end) bad_value(key, text, "an unsigned 64-bit integer");
  return out;
}

bool get_bool(const ConfigValues& v, const std::string& key) {
  std::string text = require(v, key);
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  bad_value(key, require(v, key), "true or false");
}

template <typename Parse>
auto get_enum(const ConfigValues& v, const std::string& key, Parse parse, const char* expected) {
  const std::string& text = require(v, key);
  try {
    return parse(text);
  } catch (const std::invalid_argument&) {
    bad_value(key, text, expected);
  }
}

int narrow_int(std::int64_t x, const std::string& key) {
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + " is out of range");
  }
  return static_cast<int>(x);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<double> BandgapGrid::values() const {
  std::vector<double> out;
  if (points == 1) return {min};
  out.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    out.push_back(min + (max - min) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "scenario.name",
      "grid.half_width",
      "grid.wrap",
      "cavity.dispersion",
      "cavity.omega0",
      "cavity.bandwidth",
      "raman.dispersion",
      "raman.omega0",
      "raman.bandwidth",
      "coupling.g",
      "coupling.g4",
      "coupling.reference_modes",
      "bath.kappa",
      "bath.gamma",
      "bath.temperature",
      "ramp.shape",
      "ramp.t_ramp",
      "ramp.t_settle",
      "ramp.t_window",
      "ramp.sample_stride",
      "integrator.dt",
      "ensemble.trajectories",
      "ensemble.seed",
      "ensemble.paired_baseline",
      "ensemble.blocks_per_trajectory",
      "sweep.bandgap_min",
      "sweep.bandgap_max",
      "sweep.bandgap_points",
      "observables.n_angles",
  };
  return keys;
}

std::string resolve_key(std::string_view key) {
  const std::string k = trim(key);
  if (auto it = aliases().find(k); it != aliases().end()) return it->second;
  const auto& keys = config_keys();
  if (k.find('.') != std::string::npos) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown config key '" + k + "'");
    return k;
  }
  std::vector<std::string> matches;
  for (const auto& full : keys) {
    if (full.substr(full.find('.') + 1) == k) matches.push_back(full);
  }
  if (matches.empty()) throw ConfigError("unknown config key '" + k + "'");
  if (matches.size() > 1) {
    std::string msg = "ambiguous config key '" + k + "' (";
    for (std::size_t i = 0; i < matches.size(); ++i) msg += (i ? ", " : "") + matches[i];
    throw ConfigError(msg + ")");
  }
  return matches.front();
}

ConfigValues parse_ini(std::string_view text, std::string_view source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string(source) + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigValues out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(std::string(source) + ": key '" + section + "' is outside any section");
    for (const auto& [name, leaf] : body) {
      const std::string dotted = section + "." + name;
      const auto& keys = config_keys();
      if (std::find(keys.begin(), keys.end(), dotted) == keys.end()) {
        throw ConfigError(std::string(source) + ": unknown config key '" + dotted + "'");
      }
      out[dotted] = trim(leaf.data());
    }
  }
  return out;
}

void apply_overrides(ConfigValues& values, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not of the form key=value");
    values[resolve_key(std::string_view(item).substr(0, eq))] = trim(std::string_view(item).substr(eq + 1));
  }
}

namespace {

std::string pick_scenario(std::string_view requested, const ConfigValues& file, const ConfigValues& overrides) {
  if (!requested.empty()) return std::string(requested);
  if (auto it = overrides.find("scenario.name"); it != overrides.end()) return it->second;
  if (auto it = file.find("scenario.name"); it != file.end()) return it->second;
  return "flatflat";
}

RunConfig assemble(const ConfigValues& file, std::string_view scenario, const std::vector<std::string>& overrides) {
  ConfigValues extra;
  apply_overrides(extra, overrides);
  const std::string name = pick_scenario(scenario, file, extra);
  ConfigValues values = parse_ini(preset_text(name), name);
  for (const auto& [k, v] : file) values[k] = v;
  for (const auto& [k, v] : extra) values[k] = v;
  values["scenario.name"] = name;
  return build_config(values);
}

}  // namespace

RunConfig load_config(const std::filesystem::path* file, std::string_view scenario,
                      const std::vector<std::string>& overrides) {
  if (!file) return assemble({}, scenario, overrides);
  std::ifstream in(*file);
  if (!in) throw ConfigError("cannot read config file " + file->string());
  std::stringstream buf;
  buf << in.rdbuf();
  return assemble(parse_ini(buf.str(), file->string()), scenario, overrides);
}

RunConfig load_config_text(std::string_view text, std::string_view scenario,
                           const std::vector<std::string>& overrides) {
  return assemble(parse_ini(text, "<config>"), scenario, overrides);
}

RunConfig build_config(const ConfigValues& values) {
  RunConfig c;
  c.values = values;
  c.scenario = require(values, "scenario.name");

  SystemSpec& s = c.spec;
  s.grid.half_width = narrow_int(get_int(values, "grid.half_width"), "grid.half_width");
  s.grid.wrap = get_enum(values, "grid.wrap", parse_wrap_policy, "wrap or truncate");
  s.cavity.kind = get_enum(values, "cavity.dispersion", parse_dispersion_kind, "flat or quadratic");
  s.cavity.base = get_double(values, "cavity.omega0");
  s.cavity.bandwidth = get_double(values, "cavity.bandwidth");
  s.raman.kind = get_enum(values, "raman.dispersion", parse_dispersion_kind, "flat or quadratic");
  s.raman.base = get_double(values, "raman.omega0");
  s.raman.bandwidth = get_double(values, "raman.bandwidth");
  c.reference_modes = narrow_int(get_int(values, "coupling.reference_modes"), "coupling.reference_modes");
  if (c.reference_modes < 1) throw ConfigError("coupling.reference_modes must be at least 1");
  s.g = get_double(values, "coupling.g") / std::sqrt(static_cast<double>(c.reference_modes));
  s.g4 = get_double(values, "coupling.g4");
  s.kappa = get_double(values, "bath.kappa");
  s.gamma = get_double(values, "bath.gamma");
  s.temperature = get_double(values, "bath.temperature");

  RunProtocol& p = c.protocol;
  p.ramp.shape = get_enum(values, "ramp.shape", parse_ramp_shape, "linear or tanh");
  p.ramp.t_ramp = get_double(values, "ramp.t_ramp");
  p.ramp.t_settle = get_double(values, "ramp.t_settle");
  p.ramp.t_window = get_double(values, "ramp.t_window");
  p.ramp.sample_stride = get_double(values, "ramp.sample_stride");
  p.dt = get_double(values, "integrator.dt");
  const auto n = get_int(values, "ensemble.trajectories");
  if (n < 0) throw ConfigError("ensemble.trajectories must be nonnegative");
  p.n_trajectories = static_cast<std::uint64_t>(n);
  p.master_seed = get_u64(values, "ensemble.seed");
  p.paired_baseline = get_bool(values, "ensemble.paired_baseline");
  p.blocks_per_trajectory =
      narrow_int(get_int(values, "ensemble.blocks_per_trajectory"), "ensemble.blocks_per_trajectory");

  c.bandgaps.min = get_double(values, "sweep.bandgap_min");
  c.bandgaps.max = get_double(values, "sweep.bandgap_max");
  c.bandgaps.points = narrow_int(get_int(values, "sweep.bandgap_points"), "sweep.bandgap_points");
  c.n_angles = narrow_int(get_int(values, "observables.n_angles"), "observables.n_angles");

  ValidationReport report = check_spec(s);
  for (auto& v : check_protocol(p).violations) report.violations.push_back(v);
  if (c.bandgaps.points < 1) report.add("sweep.bandgap_points", "sweep.bandgap_points must be at least 1");
  if (!(c.bandgaps.min > 0.0)) report.add("sweep.bandgap_min", "sweep.bandgap_min must be positive");
  if (c.bandgaps.points > 1 && !(c.bandgaps.max > c.bandgaps.min)) {
    report.add("sweep.bandgap_max", "sweep.bandgap_max must exceed sweep.bandgap_min");
  }
  if (c.n_angles < 8) report.add("observables.n_angles", "observables.n_angles must be at least 8");
  if (!report.ok()) throw ValidationError(std::move(report));
  return c;
}

std::string to_ini(const ConfigValues& values) {
  std::string out;
  std::string section;
  for (const auto& key : config_keys()) {
    auto it = values.find(key);
    if (it == values.end()) continue;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + it->second + "\n";
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace mmtwa
