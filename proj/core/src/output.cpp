#include "mmtwa/output.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <iomanip>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#ifndef MMTWA_VERSION
#define MMTWA_VERSION "unknown"
#endif

namespace mmtwa {

namespace {

using Field = std::optional<double> SweepRow::*;

// Numeric columns after scenario, omega0c and k, in file order.
const std::vector<Field>& numeric_fields() {
  static const std::vector<Field> fields{
      &SweepRow::dV_E,     &SweepRow::dV_E_err,  &SweepRow::dV_Q,      &SweepRow::dV_Q_err, &SweepRow::V_E_g,
      &SweepRow::V_E_0,    &SweepRow::V_Q_g,     &SweepRow::V_Q_0,     &SweepRow::dV_E_th,  &SweepRow::dV_Q_th,
      &SweepRow::dVp_Q_th, &SweepRow::mean_Q_re, &SweepRow::mean_Q_err, &SweepRow::theta_min, &SweepRow::V_min,
      &SweepRow::V_max,
  };
  return fields;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw CsvError("line " + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no, const std::string& column) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw CsvError("line " + std::to_string(line_no) + ": column " + column + ": '" + text + "' is not a number");
  }
  return v;
}

nlohmann::ordered_json point_json(const PointStatus& p) {
  nlohmann::ordered_json j;
  j["omega0c"] = p.omega0c;
  j["aborted_trajectories"] = p.aborted;
  j["failed"] = p.failed;
  if (p.failed) j["error"] = p.error;
  return j;
}

}  // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "scenario", "omega0c",  "k",       "dV_E",     "dV_E_err",  "dV_Q",      "dV_Q_err",
      "V_E_g",    "V_E_0",    "V_Q_g",   "V_Q_0",    "dV_E_th",   "dV_Q_th",   "dVp_Q_th",
      "mean_Q_re", "mean_Q_err", "theta_min", "V_min", "V_max",     "annotation",
  };
  return cols;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, ptr);
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : rows) {
    out += quote(r.scenario) + ',' + format_number(r.omega0c) + ',' + std::to_string(r.k);
    for (Field f : numeric_fields()) {
      out += ',';
      if (const auto& v = r.*f) out += format_number(*v);
    }
    out += ',' + quote(r.annotation) + '\n';
  }
  return out;
}

std::vector<SweepRow> parse_csv(std::string_view text) {
  std::vector<SweepRow> rows;
  const auto& cols = csv_columns();
  std::size_t pos = 0, line_no = 0;
  bool header = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_record(line, line_no);
    if (header) {
      if (fields != cols) throw CsvError("line 1: header does not match the sweep CSV columns");
      header = false;
      continue;
    }
    if (fields.size() != cols.size()) {
      throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols.size()) +
                     " fields, found " + std::to_string(fields.size()));
    }
    SweepRow r;
    r.scenario = fields[0];
    r.omega0c = parse_number<double>(fields[1], line_no, cols[1]);
    r.k = parse_number<int>(fields[2], line_no, cols[2]);
    const auto& nf = numeric_fields();
    for (std::size_t i = 0; i < nf.size(); ++i) {
      const auto& text_i = fields[3 + i];
      if (!text_i.empty()) r.*nf[i] = parse_number<double>(text_i, line_no, cols[3 + i]);
    }
    r.annotation = fields.back();
    rows.push_back(std::move(r));
  }
  if (header) throw CsvError("missing header line");
  return rows;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string_view library_version() { return MMTWA_VERSION; }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = std::string(library_version());
  j["master_seed"] = m.master_seed;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["workers"] = m.workers;
  j["csv_schema"] = std::string(kCsvSchema);
  j["units"] = {
      {"frequency", "omega_0^R"},
      {"time", "1/omega_0^R"},
      {"hbar", 1},
      {"variances", "E_k = a_k + conj(a_-k), Q_k = b_k + conj(b_-k); vacuum V = 1"},
      {"mean_Q_re", "dimensionless; displacement = (l0 / sqrt 2) * mean_Q_re, l0 = sqrt(hbar / M omega_0^R)"},
      {"theta_min", "radians in [0, pi), quadrature X = a_0 exp(-i theta) + conj(a_0) exp(i theta)"},
  };
  auto& scen = j["scenarios"] = nlohmann::ordered_json::array();
  for (const auto& s : m.scenarios) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["config"] = s.config_ini;
    std::size_t aborted = 0, failed = 0;
    auto& pts = e["points"] = nlohmann::ordered_json::array();
    for (const auto& p : s.points) {
      pts.push_back(point_json(p));
      aborted += p.aborted;
      failed += p.failed ? 1 : 0;
    }
    e["aborted_trajectories"] = aborted;
    e["failed_points"] = failed;
    scen.push_back(std::move(e));
  }
  auto& outs = j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& f : m.outputs) outs.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return j.dump(2) + "\n";
}

}  // namespace mmtwa
