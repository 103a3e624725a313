#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mmtwa/config.hpp"
#include "mmtwa/oracles.hpp"
#include "mmtwa/output.hpp"
#include "mmtwa/sweep.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kPartial = 2, kTotal = 3 };

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::string> seed;
  std::optional<std::uint64_t> trajectories;
  std::string profile;
  std::string scenario;
  std::string output = ".";
  bool force = false;
  std::optional<unsigned> workers;
};

void add_common(CLI::App& cmd, CommonOptions& o, bool outputs) {
  cmd.add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd.add_option("--set", o.overrides, "Override a setting, key=value (repeatable)")->allow_extra_args(false);
  cmd.add_option("--seed", o.seed, "Master seed (decimal or 0x hex)");
  cmd.add_option("--trajectories", o.trajectories, "Trajectories per ensemble");
  cmd.add_option("--profile", o.profile, "Trajectory budget: paper (3500) or ci (500)")
      ->check(CLI::IsMember({"paper", "ci"}));
  cmd.add_option("--scenario", o.scenario, "Scenario preset");
  cmd.add_option("--workers", o.workers, "Worker threads (default: MMTWA_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);
  if (outputs) {
    cmd.add_option("--output", o.output, "Output directory");
    cmd.add_flag("--force", o.force, "Overwrite existing output files");
  }
}

std::vector<std::string> overrides_of(const CommonOptions& o) {
  std::vector<std::string> out;
  if (o.profile == "paper") out.push_back("ensemble.trajectories=3500");
  if (o.profile == "ci") out.push_back("ensemble.trajectories=500");
  out.insert(out.end(), o.overrides.begin(), o.overrides.end());
  if (o.trajectories) out.push_back("ensemble.trajectories=" + std::to_string(*o.trajectories));
  if (o.seed) out.push_back("ensemble.seed=" + *o.seed);
  return out;
}

mmtwa::RunConfig load(const CommonOptions& o, const std::string& scenario) {
  const fs::path path = o.config;
  return mmtwa::load_config(o.config.empty() ? nullptr : &path, scenario, overrides_of(o));
}

/// Scenario argument expanded to output groups; each group becomes one CSV.
std::vector<std::pair<std::string, std::vector<std::string>>> scenario_groups(const std::string& arg) {
  if (arg == "all") {
    return {{"flatflat", {"flatflat"}},
            {"quadraman", {"quadraman"}},
            {"quadcavity", {"quadcavity"}},
            {"thermal", {"thermal"}},
            {"singlemode", {"singlemode_ref", "singlemode_eff"}}};
  }
  if (arg == "singlemode") return {{"singlemode", {"singlemode_ref", "singlemode_eff"}}};
  return {{arg, {arg}}};
}

unsigned worker_count(const CommonOptions& o) { return o.workers ? *o.workers : mmtwa::default_workers(); }

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f.flush()) throw std::runtime_error("write failed for " + path.string());
}

/// Creates the output directory and refuses to replace existing files unless
/// forced. Returns false (after reporting) on a collision.
bool prepare_outputs(const CommonOptions& o, const std::vector<fs::path>& files) {
  fs::create_directories(o.output);
  if (o.force) return true;
  bool ok = true;
  for (const auto& f : files) {
    if (fs::exists(f)) {
      std::cerr << "error: " << f.string() << " already exists (use --force to overwrite)\n";
      ok = false;
    }
  }
  return ok;
}

struct Job {
  std::string file_stem;
  std::vector<mmtwa::RunConfig> configs;
};

int execute(const std::vector<Job>& jobs, const CommonOptions& o, const std::string& command, bool point_mode,
            const std::string& manifest_name) {
  std::vector<fs::path> files;
  for (const auto& j : jobs) files.push_back(fs::path(o.output) / (j.file_stem + ".csv"));
  files.push_back(fs::path(o.output) / manifest_name);
  if (!prepare_outputs(o, files)) return kUsage;

  mmtwa::RunManifest manifest;
  manifest.command = command;
  manifest.master_seed = jobs.front().configs.front().protocol.master_seed;
  manifest.workers = worker_count(o);
  manifest.started = mmtwa::utc_timestamp();

  std::size_t points = 0, failed = 0, aborted = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::vector<mmtwa::SweepRow> rows;
    for (const auto& cfg : jobs[i].configs) {
      const auto scenario = mmtwa::Scenario::from_config(cfg);
      const std::vector<double> grid =
          point_mode ? std::vector<double>{cfg.spec.cavity.base} : cfg.bandgaps.values();
      mmtwa::SweepOptions opts;
      opts.workers = manifest.workers;
      opts.n_angles = cfg.n_angles;
      opts.progress = [&](std::size_t idx, std::size_t n, const mmtwa::PointStatus& s) {
        std::cerr << scenario.name << " [" << idx + 1 << "/" << n << "] omega0c=" << mmtwa::format_double(s.omega0c);
        if (s.aborted) std::cerr << " aborted=" << s.aborted;
        if (s.failed) std::cerr << " FAILED: " << s.error;
        std::cerr << '\n';
      };
      const auto result = mmtwa::run_sweep(scenario, grid, cfg.protocol, opts);
      rows.insert(rows.end(), result.rows.begin(), result.rows.end());
      points += result.points.size();
      failed += result.failed_points();
      aborted += result.aborted_trajectories();
      manifest.scenarios.push_back({cfg.scenario, mmtwa::to_ini(cfg.values), result.points});
    }
    const std::string csv = mmtwa::to_csv(rows);
    write_file(files[i], csv);
    manifest.outputs.push_back({files[i].filename().string(), mmtwa::sha256_hex(csv)});
  }
  manifest.finished = mmtwa::utc_timestamp();
  write_file(files.back(), mmtwa::to_json(manifest));

  if (failed == points) {
    std::cerr << "error: all " << points << " points failed\n";
    return kTotal;
  }
  if (failed || aborted) {
    std::cerr << "warning: " << failed << " of " << points << " points failed, " << aborted
              << " trajectories aborted\n";
    return kPartial;
  }
  return kOk;
}

int cmd_run(const CommonOptions& o, const std::string& command) {
  const auto cfg = load(o, o.scenario);
  const Job job{cfg.scenario + "_point", {cfg}};
  return execute({job}, o, command, true, cfg.scenario + "_point.manifest.json");
}

int cmd_sweep(const CommonOptions& o, const std::string& command) {
  std::vector<Job> jobs;
  for (const auto& [stem, names] : scenario_groups(o.scenario.empty() ? "" : o.scenario)) {
    Job job{stem, {}};
    for (const auto& name : names) job.configs.push_back(load(o, name));
    if (job.file_stem.empty()) job.file_stem = job.configs.front().scenario;
    jobs.push_back(std::move(job));
  }
  return execute(jobs, o, command, false, "manifest.json");
}

void print_suite(const mmtwa::oracle::SuiteResult& r) {
  std::printf("%s: %s\n", r.suite.c_str(), r.pass() ? "PASS" : "FAIL");
  for (const auto& c : r.checks) {
    std::printf("  %-4s %-52s measured %-13.6g expected %-13.6g tolerance %.3g\n", c.pass ? "ok" : "FAIL",
                c.name.c_str(), c.measured, c.expected, c.tolerance);
  }
}

int cmd_oracle(const std::string& suite, const CommonOptions& o) {
  namespace oracle = mmtwa::oracle;
  const unsigned workers = worker_count(o);
  auto protocol_for = [&](const mmtwa::RunConfig& cfg) {
    auto p = oracle::bath_protocol(o.trajectories ? *o.trajectories : 512);
    p.master_seed = cfg.protocol.master_seed;
    p.dt = cfg.protocol.dt;
    return p;
  };
  std::vector<oracle::SuiteResult> results;
  if (suite == "drift" || suite == "all") results.push_back(oracle::drift_suite());
  if (suite == "fdt" || suite == "all") {
    const auto cfg = load(o, o.scenario);
    results.push_back(oracle::fdt_suite(cfg.spec, protocol_for(cfg), 3.0, workers));
  }
  if (suite == "thermal" || suite == "all") {
    const auto cfg = load(o, o.scenario.empty() ? "thermal" : o.scenario);
    auto spec = cfg.spec;
    if (!(spec.temperature > 0.0)) spec.temperature = 2.0;
    results.push_back(oracle::thermal_suite(spec, protocol_for(cfg), 3.0, workers));
  }
  if (suite == "squeezing" || suite == "all") results.push_back(oracle::squeezing_suite());
  bool pass = true;
  for (const auto& r : results) {
    print_suite(r);
    pass = pass && r.pass();
  }
  return pass ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimode truncated-Wigner simulator for cavity-coupled Raman phonons"};
  app.set_version_flag("--version", std::string(mmtwa::library_version()));
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, oracle_opts;
  auto* run = app.add_subcommand("run", "Simulate one band gap (cavity.omega0) and write its rows");
  add_common(*run, run_opts, true);
  auto* sweep = app.add_subcommand("sweep", "Sweep the band-gap grid for one scenario, singlemode, or all");
  add_common(*sweep, sweep_opts, true);
  auto* oracle = app.add_subcommand("oracle", "Run the reference checks");
  std::string suite;
  oracle->add_option("suite", suite, "drift, fdt, thermal, squeezing or all")
      ->required()
      ->check(CLI::IsMember({"drift", "fdt", "thermal", "squeezing", "all"}));
  add_common(*oracle, oracle_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::string command = command_line(argc, argv);
  try {
    if (*run) return cmd_run(run_opts, command);
    if (*sweep) return cmd_sweep(sweep_opts, command);
    return cmd_oracle(suite, oracle_opts);
  } catch (const mmtwa::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTotal;
  }
}
