/**
 * @file simulator.hpp
 * @brief Executes routing plans against benchmark profiles.
 *
 * Each device runs its batches strictly sequentially from time zero with no
 * inter-batch gap and no dispatch overhead. Batch cost comes from the profile
 * estimators; memory-infeasible full batches complete but are flagged as
 * instability events. Reports carry both the makespan (completion of the last
 * busy device) and the summed per-device busy time; comparison orderings and
 * the "(lowest)" latency marker use the makespan, since single-device
 * baselines make the two coincide while routed strategies run devices in
 * parallel.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "greenroute/carbon.hpp"
#include "greenroute/errors.hpp"
#include "greenroute/profile.hpp"
#include "greenroute/strategies.hpp"
#include "greenroute/workload.hpp"

namespace greenroute {

struct BatchSpan {
  int batch_index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<std::string> member_ids;
  double latency_s = 0.0;
  double energy_kwh = 0.0;
};

struct DeviceTimeline {
  std::string device;
  std::vector<BatchSpan> batch_spans;
  double completion_s = 0.0;
};

struct InstabilityEvent {
  std::string device;
  int batch_index = 0;
  std::string reason;
};

struct SimulationReport {
  std::string strategy_label;
  int batch_size = 1;
  std::map<std::string, DeviceTimeline> timelines;
  double makespan_s = 0.0;           // max device completion
  double total_e2e_latency_s = 0.0;  // sum of device completions (busy time)
  double total_energy_kwh = 0.0;
  double total_carbon_kgco2e = 0.0;
  std::vector<InstabilityEvent> instability_events;
};

inline SimulationReport simulate(const RoutingPlan& plan, const WorkloadTrace& trace,
                                 const ProfileTable& table, const CarbonModel& carbon) {
  validate_plan(plan, trace);

  std::map<std::string, const Prompt*> by_id;
  for (const Prompt& p : trace.prompts) by_id[p.id] = &p;

  SimulationReport report;
  report.strategy_label = plan.strategy_label;
  report.batch_size = plan.batch_size;

  for (const auto& [device, batches] : plan.device_batches) {
    DeviceTimeline timeline;
    timeline.device = device;
    if (!batches.empty()) {
      const Feasibility feasibility =
          check_memory_feasibility(table.device(device), plan.batch_size);
      double clock = 0.0;
      for (std::size_t k = 0; k < batches.size(); ++k) {
        std::vector<Prompt> members;
        members.reserve(batches[k].size());
        for (const std::string& id : batches[k]) members.push_back(*by_id.at(id));
        const EstimatedMetrics m =
            estimate_batch_metrics(members, device, plan.batch_size, table);

        BatchSpan span;
        span.batch_index = static_cast<int>(k);
        span.start_s = clock;
        span.end_s = clock + m.latency_s;
        span.member_ids = batches[k];
        span.latency_s = m.latency_s;
        span.energy_kwh = m.energy_kwh;
        clock = span.end_s;

        if (feasibility == Feasibility::unstable &&
            static_cast<int>(batches[k].size()) == plan.batch_size) {
          report.instability_events.push_back(
              {device, static_cast<int>(k),
               "memory saturation: model plus KV state exceeds GPU memory at batch size " +
                   std::to_string(plan.batch_size)});
        }
        timeline.batch_spans.push_back(std::move(span));
      }
      timeline.completion_s = clock;
    }
    report.timelines.emplace(device, std::move(timeline));
  }

  for (const auto& [device, timeline] : report.timelines) {
    report.makespan_s = std::max(report.makespan_s, timeline.completion_s);
    report.total_e2e_latency_s += timeline.completion_s;
    for (const BatchSpan& span : timeline.batch_spans) {
      report.total_energy_kwh += span.energy_kwh;
    }
  }
  report.total_carbon_kgco2e = energy_to_carbon(report.total_energy_kwh, carbon);
  return report;
}

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

struct StrategySpec {
  enum class Kind { all_on, carbon_aware, latency_aware };
  Kind kind = Kind::carbon_aware;
  std::string device;  // all_on only

  bool operator==(const StrategySpec&) const = default;
};

/// Accepts "carbon", "latency", or "all:<device>".
inline StrategySpec parse_strategy_spec(std::string_view text) {
  if (text == "carbon") return {StrategySpec::Kind::carbon_aware, ""};
  if (text == "latency") return {StrategySpec::Kind::latency_aware, ""};
  if (text.starts_with("all:") && text.size() > 4) {
    return {StrategySpec::Kind::all_on, std::string(text.substr(4))};
  }
  throw ValidationError("unknown strategy \"" + std::string(text) +
                        "\" (expected carbon, latency, or all:<device>)");
}

inline std::string strategy_label(const StrategySpec& spec) {
  switch (spec.kind) {
    case StrategySpec::Kind::all_on: return "all-on-" + spec.device;
    case StrategySpec::Kind::carbon_aware: return "carbon-aware";
    case StrategySpec::Kind::latency_aware: return "latency-aware";
  }
  return "";
}

/// Baselines on every device (sorted), then carbon-aware, then latency-aware.
inline std::vector<StrategySpec> default_strategies(const ProfileTable& table) {
  std::vector<StrategySpec> strategies;
  for (const std::string& device : table.device_names()) {
    strategies.push_back({StrategySpec::Kind::all_on, device});
  }
  strategies.push_back({StrategySpec::Kind::carbon_aware, ""});
  strategies.push_back({StrategySpec::Kind::latency_aware, ""});
  return strategies;
}

struct ComparisonRow {
  int batch_size = 1;
  std::string strategy;
  double total_e2e_latency_s = 0.0;
  double makespan_s = 0.0;
  double total_carbon_kgco2e = 0.0;
  double total_energy_kwh = 0.0;
  bool lowest_latency = false;
  bool lowest_carbon = false;

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;        // grid order: batch size block, then strategy
  std::vector<RoutingPlan> plans;         // parallel to rows
  std::vector<SimulationReport> reports;  // parallel to rows
};

inline ComparisonResult compare_strategies(const WorkloadTrace& trace, const ProfileTable& table,
                                           const CarbonModel& carbon,
                                           std::vector<int> batch_sizes,
                                           const std::vector<StrategySpec>& strategies) {
  if (trace.prompts.empty()) throw ValidationError("compare_strategies: empty trace");
  if (strategies.empty()) throw ValidationError("compare_strategies: no strategies");
  if (batch_sizes.empty()) throw ValidationError("compare_strategies: no batch sizes");
  std::sort(batch_sizes.begin(), batch_sizes.end());
  batch_sizes.erase(std::unique(batch_sizes.begin(), batch_sizes.end()), batch_sizes.end());

  ComparisonResult result;
  for (int batch_size : batch_sizes) {
    if (batch_size < 1) throw ValidationError("compare_strategies: batch sizes must be >= 1");
    const CostMatrix matrix = build_cost_matrix(trace, table, carbon, batch_size);
    const std::size_t block_start = result.rows.size();
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
      const SimulationReport report = simulate(plan, trace, table, carbon);
      ComparisonRow row;
      row.batch_size = batch_size;
      row.strategy = report.strategy_label;
      row.total_e2e_latency_s = report.total_e2e_latency_s;
      row.makespan_s = report.makespan_s;
      row.total_carbon_kgco2e = report.total_carbon_kgco2e;
      row.total_energy_kwh = report.total_energy_kwh;
      result.rows.push_back(row);
      result.plans.push_back(std::move(plan));
      result.reports.push_back(report);
    }

    double min_latency = result.rows[block_start].makespan_s;
    double min_carbon = result.rows[block_start].total_carbon_kgco2e;
    for (std::size_t i = block_start; i < result.rows.size(); ++i) {
      min_latency = std::min(min_latency, result.rows[i].makespan_s);
      min_carbon = std::min(min_carbon, result.rows[i].total_carbon_kgco2e);
    }
    for (std::size_t i = block_start; i < result.rows.size(); ++i) {
      result.rows[i].lowest_latency = result.rows[i].makespan_s == min_latency;
      result.rows[i].lowest_carbon = result.rows[i].total_carbon_kgco2e == min_carbon;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Emission: CSV, markdown, JSON
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest round-trip decimal representation (canonical across the project).
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError(where + ": not a number: \"" + std::string(text) + "\"");
  }
  return value;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline constexpr std::string_view kComparisonCsvHeader =
    "batch_size,strategy,total_e2e_latency_s,makespan_s,total_carbon_kgco2e,"
    "total_energy_kwh,lowest_latency,lowest_carbon";

inline std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string out{kComparisonCsvHeader};
  out += "\n";
  for (const ComparisonRow& row : rows) {
    out += std::to_string(row.batch_size);
    out += ",";
    out += row.strategy;
    out += ",";
    out += detail::format_double(row.total_e2e_latency_s);
    out += ",";
    out += detail::format_double(row.makespan_s);
    out += ",";
    out += detail::format_double(row.total_carbon_kgco2e);
    out += ",";
    out += detail::format_double(row.total_energy_kwh);
    out += ",";
    out += row.lowest_latency ? "true" : "false";
    out += ",";
    out += row.lowest_carbon ? "true" : "false";
    out += "\n";
  }
  return out;
}

/// One section per batch size; "(lowest)" markers sit in the makespan and
/// carbon cells. Parses back via parse_comparison_markdown with identical
/// values, so the markdown and CSV emitters agree.
inline std::string comparison_to_markdown(const std::vector<ComparisonRow>& rows) {
  std::string out = "# Strategy comparison\n";
  int current_batch = -1;
  for (const ComparisonRow& row : rows) {
    if (row.batch_size != current_batch) {
      current_batch = row.batch_size;
      out += "\n## Batch size " + std::to_string(current_batch) + "\n\n";
      out += "| Strategy | Total E2E latency (s) | Makespan (s) | Total carbon (kgCO2e) | "
             "Total energy (kWh) |\n";
      out += "| --- | --- | --- | --- | --- |\n";
    }
    out += "| " + row.strategy;
    out += " | " + detail::format_double(row.total_e2e_latency_s);
    out += " | " + detail::format_double(row.makespan_s) +
           (row.lowest_latency ? " (lowest)" : "");
    out += " | " + detail::format_double(row.total_carbon_kgco2e) +
           (row.lowest_carbon ? " (lowest)" : "");
    out += " | " + detail::format_double(row.total_energy_kwh);
    out += " |\n";
  }
  return out;
}

inline std::vector<ComparisonRow> parse_comparison_markdown(std::istream& in) {
  std::vector<ComparisonRow> rows;
  std::string line;
  int batch_size = -1;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "markdown line " + std::to_string(line_no);
    std::string_view view = detail::trim(line);
    if (view.starts_with("## Batch size ")) {
      batch_size = static_cast<int>(detail::parse_double(view.substr(14), where));
      continue;
    }
    if (!view.starts_with("|") || view.starts_with("| Strategy") || view.starts_with("| ---")) {
      continue;
    }
    if (batch_size < 1) throw ValidationError(where + ": table row before a batch size header");
    view.remove_prefix(1);
    if (view.ends_with("|")) view.remove_suffix(1);
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t bar = view.find('|', start);
      cells.push_back(detail::trim(view.substr(start, bar - start)));
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
    if (cells.size() != 5) {
      throw ValidationError(where + ": expected 5 cells, got " + std::to_string(cells.size()));
    }
    const auto strip_marker = [](std::string_view cell, bool& flag) {
      constexpr std::string_view marker = " (lowest)";
      if (cell.ends_with(marker)) {
        flag = true;
        cell.remove_suffix(marker.size());
      }
      return cell;
    };
    ComparisonRow row;
    row.batch_size = batch_size;
    row.strategy = std::string(cells[0]);
    row.total_e2e_latency_s = detail::parse_double(cells[1], where);
    row.makespan_s = detail::parse_double(strip_marker(cells[2], row.lowest_latency), where);
    row.total_carbon_kgco2e = detail::parse_double(strip_marker(cells[3], row.lowest_carbon), where);
    row.total_energy_kwh = detail::parse_double(cells[4], where);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ComparisonRow& row : rows) {
    arr.push_back({
        {"batch_size", row.batch_size},
        {"lowest_carbon", row.lowest_carbon},
        {"lowest_latency", row.lowest_latency},
        {"makespan_s", row.makespan_s},
        {"strategy", row.strategy},
        {"total_carbon_kgco2e", row.total_carbon_kgco2e},
        {"total_e2e_latency_s", row.total_e2e_latency_s},
        {"total_energy_kwh", row.total_energy_kwh},
    });
  }
  return arr;
}

inline nlohmann::json report_to_json(const SimulationReport& report) {
  nlohmann::json timelines = nlohmann::json::object();
  for (const auto& [device, timeline] : report.timelines) {
    nlohmann::json spans = nlohmann::json::array();
    for (const BatchSpan& span : timeline.batch_spans) {
      spans.push_back({
          {"batch_index", span.batch_index},
          {"end_s", span.end_s},
          {"energy_kwh", span.energy_kwh},
          {"latency_s", span.latency_s},
          {"member_ids", span.member_ids},
          {"start_s", span.start_s},
      });
    }
    timelines[device] = {{"batch_spans", spans}, {"completion_s", timeline.completion_s}};
  }
  nlohmann::json events = nlohmann::json::array();
  for (const InstabilityEvent& event : report.instability_events) {
    events.push_back({{"batch_index", event.batch_index},
                      {"device", event.device},
                      {"reason", event.reason}});
  }
  return {
      {"batch_size", report.batch_size},
      {"instability_events", events},
      {"makespan_s", report.makespan_s},
      {"strategy_label", report.strategy_label},
      {"timelines", timelines},
      {"total_carbon_kgco2e", report.total_carbon_kgco2e},
      {"total_e2e_latency_s", report.total_e2e_latency_s},
      {"total_energy_kwh", report.total_energy_kwh},
  };
}

}  // namespace greenroute
