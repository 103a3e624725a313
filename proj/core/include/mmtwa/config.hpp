#pragma once

// INI configuration: scenario presets, user files and dotted-key overrides,
// resolved into a SystemSpec, a RunProtocol and sweep settings.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmtwa/ensemble.hpp"
#include "mmtwa/model.hpp"

namespace mmtwa {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid of cavity band gaps.
struct BandgapGrid {
  double min = 0.2;
  double max = 1.4;
  int points = 31;

  std::vector<double> values() const;
};

/// Ordered section.key -> value text. Holds everything that determines a run.
using ConfigValues = std::map<std::string, std::string>;

struct RunConfig {
  std::string scenario = "flatflat";
  SystemSpec spec;
  RunProtocol protocol;
  BandgapGrid bandgaps;
  int n_angles = 180;
  /// Effective coupling is coupling.g / sqrt(reference_modes).
  int reference_modes = 1;
  ConfigValues values;
};

/// Names of the shipped presets.
const std::vector<std::string>& preset_names();
/// INI text of a shipped preset; throws ConfigError for unknown names.
std::string_view preset_text(std::string_view name);

/// Every recognised dotted key.
const std::vector<std::string>& config_keys();

/// Resolves a possibly abbreviated key (an alias or an undotted leaf name
/// that is unique) to its dotted form.
std::string resolve_key(std::string_view key);

/// Parses INI text into dotted keys. Unknown keys are rejected.
ConfigValues parse_ini(std::string_view text, std::string_view source);

/// Applies "key=value" overrides in order.
void apply_overrides(ConfigValues& values, const std::vector<std::string>& overrides);

/// Builds a config from a preset (by scenario name), then a user file's
/// values, then overrides. The scenario named in the user file (or in the
/// overrides) picks the preset.
RunConfig load_config(const std::filesystem::path* file, std::string_view scenario,
                      const std::vector<std::string>& overrides);
RunConfig load_config_text(std::string_view text, std::string_view scenario,
                           const std::vector<std::string>& overrides);

/// Converts resolved values into typed settings; validation errors are
/// collected into a ValidationError.
RunConfig build_config(const ConfigValues& values);

/// INI serialization of resolved values; feeding it back reproduces the run.
std::string to_ini(const ConfigValues& values);

/// Shortest round-trip decimal text of a double.
std::string format_double(double v);

}  // namespace mmtwa
