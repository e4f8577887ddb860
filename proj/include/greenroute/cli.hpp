/**
 * @file cli.hpp
 * @brief Command-line surface: ingest, gen-trace, plan, simulate, compare.
 *
 * Exit codes: 0 success, 1 data validation failure, 2 configuration error
 * (flags, unresolved paths), 3 unexpected runtime error. All file outputs are
 * deterministic: rerunning a command with identical inputs produces identical
 * bytes.
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "greenroute/carbon.hpp"
#include "greenroute/errors.hpp"
#include "greenroute/oracle.hpp"
#include "greenroute/profile.hpp"
#include "greenroute/simulator.hpp"
#include "greenroute/strategies.hpp"
#include "greenroute/workload.hpp"

namespace greenroute::cli {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

struct RunConfig {
  std::filesystem::path profile_path;
  std::filesystem::path device_spec_path;
  std::filesystem::path trace_path;       // exactly one of trace_path /
  std::filesystem::path trace_spec_path;  // trace_spec_path must be set
  std::vector<int> batch_sizes;
  std::vector<std::string> strategies;    // "carbon", "latency", "all:<device>"
  std::optional<double> carbon_intensity_override;
  std::filesystem::path output_dir = "out";
  std::set<std::string> output_formats = {"csv", "json", "markdown"};
};

namespace detail {

inline void require_file(const std::filesystem::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + ": no path given");
  if (!std::filesystem::exists(path)) {
    throw ConfigError(what + ": path does not resolve: " + path.string());
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << bytes;
}

inline std::string sanitize(const std::string& label) {
  std::string safe = label;
  for (char& c : safe) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.' && c != '_') c = '_';
  }
  return safe;
}

inline CarbonModel resolve_carbon_model(const RunConfig& config, const ProfileTable& table) {
  if (config.carbon_intensity_override) {
    if (!(*config.carbon_intensity_override > 0.0)) {
      throw ConfigError("--intensity must be positive");
    }
    return {*config.carbon_intensity_override, "cli-override"};
  }
  std::vector<BenchmarkRecord> records;
  for (const auto& [key, record] : table.records()) records.push_back(record);
  return derive_intensity(records).model;
}

inline std::vector<StrategySpec> resolve_strategies(const RunConfig& config,
                                                    const ProfileTable& table) {
  if (config.strategies.empty()) return default_strategies(table);
  std::vector<StrategySpec> specs;
  for (const std::string& text : config.strategies) {
    StrategySpec spec;
    try {
      spec = parse_strategy_spec(text);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    if (spec.kind == StrategySpec::Kind::all_on && !table.has_device(spec.device)) {
      throw ConfigError("--strategies: unknown device in \"" + text + "\"");
    }
    specs.push_back(spec);
  }
  return specs;
}

inline WorkloadTrace resolve_trace(const RunConfig& config) {
  const bool have_trace = !config.trace_path.empty();
  const bool have_spec = !config.trace_spec_path.empty();
  if (have_trace == have_spec) {
    throw ConfigError("exactly one of --trace / --trace-spec is required");
  }
  if (have_trace) {
    require_file(config.trace_path, "--trace");
    return load_trace(config.trace_path);
  }
  require_file(config.trace_spec_path, "--trace-spec");
  return generate_trace(load_trace_spec(config.trace_spec_path));
}

inline ProfileTable resolve_table(const RunConfig& config) {
  require_file(config.profile_path, "--profiles");
  require_file(config.device_spec_path, "--devices");
  return ingest_profiles(config.profile_path, config.device_spec_path);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Validates a benchmark CSV row by row; prints one verdict per row plus the
/// derived intensity summary. Exit 0 iff every row passes.
inline int cmd_ingest(const std::filesystem::path& profile_path,
                      const std::optional<std::filesystem::path>& device_spec_path,
                      std::ostream& out) {
  detail::require_file(profile_path, "--profiles");
  const std::vector<BenchmarkRecord> records = load_profile_records(profile_path);

  int failures = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const BenchmarkRecord& r = records[i];
    const long line_no = static_cast<long>(i) + 2;  // header is line 1
    std::ostringstream verdict;
    verdict << "row " << line_no << ": " << r.device << " batch " << r.batch_size << ": ";
    try {
      validate_record(r);
      verdict << "OK (throughput identity error "
              << greenroute::detail::format_double(throughput_identity_error(r) * 100.0)
              << "%, implied intensity "
              << greenroute::detail::format_double(implied_intensity(r)) << " kgCO2e/kWh)";
    } catch (const ValidationError& e) {
      ++failures;
      verdict << "FAIL: " << e.what();
    }
    out << verdict.str() << "\n";
  }

  if (device_spec_path) {
    detail::require_file(*device_spec_path, "--devices");
    try {
      ProfileTable::build(load_device_specs(*device_spec_path), records);
    } catch (const ValidationError& e) {
      ++failures;
      out << "cross-check FAIL: " << e.what() << "\n";
    }
  }

  if (failures == 0) {
    const IntensityDerivation derived = derive_intensity(records);
    out << "summary: " << records.size() << "/" << records.size()
        << " rows valid; derived intensity "
        << greenroute::detail::format_double(derived.model.intensity_kgco2e_per_kwh)
        << " kgCO2e/kWh (max relative deviation "
        << greenroute::detail::format_double(derived.max_rel_deviation * 100.0) << "%)\n";
    return kExitSuccess;
  }
  out << "summary: " << failures << " of " << records.size() << " rows invalid\n";
  return kExitDataError;
}

inline int cmd_gen_trace(const std::filesystem::path& spec_path,
                         const std::filesystem::path& out_path, std::ostream& out) {
  detail::require_file(spec_path, "--trace-spec");
  const TraceSpec spec = load_trace_spec(spec_path);
  const WorkloadTrace trace = generate_trace(spec);
  detail::write_file(out_path, trace_to_json_string(trace));
  out << "wrote " << trace.prompts.size() << " prompts to " << out_path.string() << "\n";
  return kExitSuccess;
}

inline int cmd_plan(const RunConfig& config, std::ostream& out) {
  const ProfileTable table = detail::resolve_table(config);
  const WorkloadTrace trace = detail::resolve_trace(config);
  const CarbonModel carbon = detail::resolve_carbon_model(config, table);
  const std::vector<StrategySpec> strategies = detail::resolve_strategies(config, table);
  if (config.batch_sizes.empty()) throw ConfigError("--batch-sizes: at least one required");

  for (int batch_size : config.batch_sizes) {
    const CostMatrix matrix = build_cost_matrix(trace, table, carbon, batch_size);
    for (const StrategySpec& spec : strategies) {
      RoutingPlan plan;
      switch (spec.kind) {
        case StrategySpec::Kind::all_on:
          plan = route_all_on(trace, table, spec.device, batch_size);
          break;
        case StrategySpec::Kind::carbon_aware:
          plan = route_carbon_aware(trace, matrix, batch_size);
          break;
        case StrategySpec::Kind::latency_aware:
          plan = route_latency_aware(trace, matrix, batch_size);
          break;
      }
      const std::filesystem::path path =
          config.output_dir / ("plan_" + detail::sanitize(plan.strategy_label) + "_b" +
                               std::to_string(batch_size) + ".json");
      detail::write_file(path, plan_to_json(plan).dump(2) + "\n");
      out << "wrote " << path.string() << "\n";
    }
  }
  return kExitSuccess;
}

inline int cmd_simulate(const RunConfig& config, const std::filesystem::path& plan_path,
                        std::ostream& out) {
  detail::require_file(plan_path, "--plan");
  const ProfileTable table = detail::resolve_table(config);
  const WorkloadTrace trace = detail::resolve_trace(config);
  const CarbonModel carbon = detail::resolve_carbon_model(config, table);
  const RoutingPlan plan = load_plan(plan_path);
  const SimulationReport report = simulate(plan, trace, table, carbon);

  const std::filesystem::path path =
      config.output_dir / ("report_" + detail::sanitize(report.strategy_label) + "_b" +
                           std::to_string(report.batch_size) + ".json");
  detail::write_file(path, report_to_json(report).dump(2) + "\n");
  out << "strategy " << report.strategy_label << " batch " << report.batch_size << ": makespan "
      << greenroute::detail::format_double(report.makespan_s) << " s, busy time "
      << greenroute::detail::format_double(report.total_e2e_latency_s) << " s, carbon "
      << greenroute::detail::format_double(report.total_carbon_kgco2e) << " kgCO2e, "
      << report.instability_events.size() << " instability events\n";
  out << "wrote " << path.string() << "\n";
  return kExitSuccess;
}

/// Full grid: one block per batch size, one row per strategy, with "(lowest)"
/// markers on the per-block minima. Writes the comparison in the requested
/// formats plus per-run plan and report JSON files.
inline int cmd_compare(const RunConfig& config, std::ostream& out) {
  const ProfileTable table = detail::resolve_table(config);
  const WorkloadTrace trace = detail::resolve_trace(config);
  const CarbonModel carbon = detail::resolve_carbon_model(config, table);
  const std::vector<StrategySpec> strategies = detail::resolve_strategies(config, table);
  if (config.batch_sizes.empty()) throw ConfigError("--batch-sizes: at least one required");
  for (const std::string& format : config.output_formats) {
    if (format != "csv" && format != "json" && format != "markdown") {
      throw ConfigError("--format: unknown format \"" + format + "\"");
    }
  }

  const ComparisonResult result =
      compare_strategies(trace, table, carbon, config.batch_sizes, strategies);

  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const std::string stem = detail::sanitize(result.rows[i].strategy) + "_b" +
                             std::to_string(result.rows[i].batch_size);
    detail::write_file(config.output_dir / ("plan_" + stem + ".json"),
                       plan_to_json(result.plans[i]).dump(2) + "\n");
    detail::write_file(config.output_dir / ("report_" + stem + ".json"),
                       report_to_json(result.reports[i]).dump(2) + "\n");
  }
  if (config.output_formats.contains("csv")) {
    detail::write_file(config.output_dir / "comparison.csv", comparison_to_csv(result.rows));
  }
  if (config.output_formats.contains("json")) {
    detail::write_file(config.output_dir / "comparison.json",
                       comparison_to_json(result.rows).dump(2) + "\n");
  }
  if (config.output_formats.contains("markdown")) {
    detail::write_file(config.output_dir / "comparison.md", comparison_to_markdown(result.rows));
  }
  out << comparison_to_markdown(result.rows);
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"carbon- and latency-aware routing simulator for LLM inference on "
               "heterogeneous edge devices"};
  app.require_subcommand(1);

  RunConfig config;
  std::string out_dir;
  std::vector<std::string> formats;
  std::string trace_path, trace_spec_path, profiles_path, devices_path;
  double intensity = 0.0;
  bool have_intensity = false;

  const auto add_data_options = [&](CLI::App* cmd, bool need_trace) {
    cmd->add_option("--profiles", profiles_path, "benchmark CSV path")->required();
    cmd->add_option("--devices", devices_path, "device spec JSON path")->required();
    if (need_trace) {
      cmd->add_option("--trace", trace_path, "trace JSON path");
      cmd->add_option("--trace-spec", trace_spec_path, "trace spec JSON path");
    }
    cmd->add_option("--intensity", intensity, "carbon intensity override (kgCO2e/kWh)")
        ->each([&](const std::string&) { have_intensity = true; });
    cmd->add_option("--out", out_dir, "output directory (default: $GREENROUTE_OUT or ./out)")
        ->envname("GREENROUTE_OUT");
  };

  auto* ingest = app.add_subcommand("ingest", "validate a benchmark profile CSV");
  std::string ingest_profiles_path, ingest_devices_path;
  ingest->add_option("--profiles", ingest_profiles_path, "benchmark CSV path")->required();
  ingest->add_option("--devices", ingest_devices_path, "device spec JSON path (cross-check)");

  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic trace from a spec");
  std::string gen_spec_path, gen_out_path;
  gen->add_option("--trace-spec", gen_spec_path, "trace spec JSON path")->required();
  gen->add_option("--out", gen_out_path, "output trace file")->required();

  auto* plan = app.add_subcommand("plan", "write routing plans for a strategy/batch grid");
  add_data_options(plan, true);
  plan->add_option("--batch-sizes", config.batch_sizes, "batch sizes, e.g. 1,4,8")
      ->required()
      ->delimiter(',');
  plan->add_option("--strategies", config.strategies,
                   "strategies: carbon,latency,all:<device> (default: all of them)")
      ->delimiter(',');

  auto* sim = app.add_subcommand("simulate", "simulate one routing plan file");
  std::string sim_plan_path;
  add_data_options(sim, true);
  sim->add_option("--plan", sim_plan_path, "routing plan JSON path")->required();

  auto* compare = app.add_subcommand("compare", "compare strategies across batch sizes");
  add_data_options(compare, true);
  compare->add_option("--batch-sizes", config.batch_sizes, "batch sizes, e.g. 1,4,8")
      ->required()
      ->delimiter(',');
  compare->add_option("--strategies", config.strategies,
                      "strategies: carbon,latency,all:<device> (default: all of them)")
      ->delimiter(',');
  compare->add_option("--format", formats, "comparison formats: csv,json,markdown")
      ->delimiter(',');

  std::vector<const char*> argv;
  argv.push_back("greenroute");
  for (const std::string& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitSuccess : kExitConfigError;
  }

  config.profile_path = profiles_path;
  config.device_spec_path = devices_path;
  config.trace_path = trace_path;
  config.trace_spec_path = trace_spec_path;
  if (have_intensity) config.carbon_intensity_override = intensity;
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (!formats.empty()) config.output_formats = {formats.begin(), formats.end()};

  try {
    if (ingest->parsed()) {
      std::optional<std::filesystem::path> devices;
      if (!ingest_devices_path.empty()) devices = ingest_devices_path;
      return cmd_ingest(ingest_profiles_path, devices, out);
    }
    if (gen->parsed()) return cmd_gen_trace(gen_spec_path, gen_out_path, out);
    if (plan->parsed()) return cmd_plan(config, out);
    if (sim->parsed()) return cmd_simulate(config, sim_plan_path, out);
    if (compare->parsed()) return cmd_compare(config, out);
    err << "error: no subcommand\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace greenroute::cli
