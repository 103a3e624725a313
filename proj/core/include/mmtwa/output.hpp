#pragma once

// Sweep CSV files and the JSON run manifest written next to them.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmtwa/sweep.hpp"

namespace mmtwa {

/// Identifier of the CSV column layout, recorded in every manifest.
inline constexpr std::string_view kCsvSchema = "mmtwa-sweep-csv/1";

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& csv_columns();

/// Nine significant digits, locale independent.
std::string format_number(double v);

/// Header line plus one line per row.
std::string to_csv(const std::vector<SweepRow>& rows);

/// Inverse of to_csv; throws CsvError with the offending line number.
std::vector<SweepRow> parse_csv(std::string_view text);

std::string sha256_hex(std::string_view data);

std::string_view library_version();

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

struct ManifestScenario {
  std::string name;
  std::string config_ini;
  std::vector<PointStatus> points;
};

struct ManifestFile {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::uint64_t master_seed = 0;
  std::string started;
  std::string finished;
  unsigned workers = 0;
  std::vector<ManifestScenario> scenarios;
  std::vector<ManifestFile> outputs;
};

/// Pretty-printed JSON, including units and CSV conventions.
std::string to_json(const RunManifest& manifest);

}  // namespace mmtwa
