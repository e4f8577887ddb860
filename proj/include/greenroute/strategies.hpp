/**
 * @file strategies.hpp
 * @brief Routing plans: per-prompt device assignment plus batch groupings.
 *
 * Four strategy families: all-on-one-device baselines, carbon-aware per-prompt
 * argmin, and latency-aware greedy list scheduling. All tie-breaks are fixed
 * (lexicographically smallest device name, then prompt id), so identical
 * inputs produce identical plans.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "greenroute/carbon.hpp"
#include "greenroute/errors.hpp"
#include "greenroute/profile.hpp"
#include "greenroute/workload.hpp"

namespace greenroute {

struct CostEntry {
  double latency_s = 0.0;
  double carbon_kgco2e = 0.0;
};

/// Complete (prompt x device) estimate table. Devices are sorted by name;
/// prompts keep trace order.
class CostMatrix {
 public:
  CostMatrix(std::vector<std::string> devices, std::vector<std::string> prompt_ids,
             std::vector<CostEntry> entries)
      : devices_(std::move(devices)),
        prompt_ids_(std::move(prompt_ids)),
        entries_(std::move(entries)) {
    if (devices_.empty()) throw ValidationError("cost matrix: no devices");
    if (!std::is_sorted(devices_.begin(), devices_.end())) {
      throw ValidationError("cost matrix: devices must be sorted by name");
    }
    if (entries_.size() != devices_.size() * prompt_ids_.size()) {
      throw ValidationError("cost matrix: incomplete (" + std::to_string(entries_.size()) +
                            " entries for " + std::to_string(prompt_ids_.size()) + " prompts x " +
                            std::to_string(devices_.size()) + " devices)");
    }
    for (const CostEntry& e : entries_) {
      if (!(e.latency_s > 0.0) || !(e.carbon_kgco2e > 0.0)) {
        throw ValidationError("cost matrix: entries must be positive");
      }
    }
    for (std::size_t i = 0; i < prompt_ids_.size(); ++i) {
      if (!id_index_.emplace(prompt_ids_[i], i).second) {
        throw ValidationError("cost matrix: duplicate prompt id \"" + prompt_ids_[i] + "\"");
      }
    }
  }

  std::size_t prompt_count() const { return prompt_ids_.size(); }
  std::size_t device_count() const { return devices_.size(); }
  const std::vector<std::string>& devices() const { return devices_; }
  const std::vector<std::string>& prompt_ids() const { return prompt_ids_; }

  const CostEntry& at(std::size_t prompt_idx, std::size_t device_idx) const {
    return entries_[prompt_idx * devices_.size() + device_idx];
  }

  const CostEntry& at_id(const std::string& prompt_id, const std::string& device) const {
    return at(prompt_index(prompt_id), device_index(device));
  }

  std::size_t prompt_index(const std::string& id) const {
    const auto it = id_index_.find(id);
    if (it == id_index_.end()) throw ValidationError("cost matrix: unknown prompt id \"" + id + "\"");
    return it->second;
  }

  std::size_t device_index(const std::string& device) const {
    const auto it = std::lower_bound(devices_.begin(), devices_.end(), device);
    if (it == devices_.end() || *it != device) {
      throw ValidationError("cost matrix: unknown device \"" + device + "\"");
    }
    return static_cast<std::size_t>(it - devices_.begin());
  }

  double mean_latency(std::size_t prompt_idx) const {
    double sum = 0.0;
    for (std::size_t d = 0; d < devices_.size(); ++d) sum += at(prompt_idx, d).latency_s;
    return sum / static_cast<double>(devices_.size());
  }

 private:
  std::vector<std::string> devices_;
  std::vector<std::string> prompt_ids_;
  std::vector<CostEntry> entries_;  // row-major, prompts x devices
  std::map<std::string, std::size_t> id_index_;
};

/// Materializes per-prompt estimates at the plan's batch-size record for every
/// device in the table. Fails if any (device, batch_size) record is missing.
inline CostMatrix build_cost_matrix(const WorkloadTrace& trace, const ProfileTable& table,
                                    const CarbonModel& carbon, int batch_size) {
  const std::vector<std::string> devices = table.device_names();
  std::vector<std::string> ids;
  ids.reserve(trace.prompts.size());
  std::vector<CostEntry> entries;
  entries.reserve(trace.prompts.size() * devices.size());
  for (const Prompt& p : trace.prompts) {
    ids.push_back(p.id);
    for (const std::string& device : devices) {
      const EstimatedMetrics m = estimate_prompt_metrics(p, device, batch_size, table);
      entries.push_back({m.latency_s, energy_to_carbon(m.energy_kwh, carbon)});
    }
  }
  return CostMatrix(devices, std::move(ids), std::move(entries));
}

// ---------------------------------------------------------------------------
// Routing plans
// ---------------------------------------------------------------------------

struct RoutingPlan {
  std::string strategy_label;
  int batch_size = 1;
  std::map<std::string, std::string> assignment;  // prompt id -> device
  std::map<std::string, std::vector<std::vector<std::string>>> device_batches;

  bool operator==(const RoutingPlan&) const = default;
};

/// Chunks an assignment-ordered id list into batches; only the final batch may
/// be partial.
inline std::vector<std::vector<std::string>> chunk_batches(const std::vector<std::string>& ids,
                                                           int batch_size) {
  std::vector<std::vector<std::string>> batches;
  for (std::size_t start = 0; start < ids.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(ids.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                         ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

namespace detail {

inline RoutingPlan make_plan(std::string label, int batch_size,
                             const std::vector<std::string>& devices,
                             const std::map<std::string, std::vector<std::string>>& per_device_ids) {
  RoutingPlan plan;
  plan.strategy_label = std::move(label);
  plan.batch_size = batch_size;
  for (const std::string& device : devices) {
    const auto it = per_device_ids.find(device);
    const std::vector<std::string> empty;
    const std::vector<std::string>& ids = it != per_device_ids.end() ? it->second : empty;
    for (const std::string& id : ids) plan.assignment[id] = device;
    plan.device_batches[device] = chunk_batches(ids, batch_size);
  }
  return plan;
}

}  // namespace detail

inline RoutingPlan route_all_on(const WorkloadTrace& trace, const ProfileTable& table,
                                const std::string& device, int batch_size) {
  if (!table.has_device(device)) throw ValidationError("route_all_on: unknown device \"" + device + "\"");
  if (batch_size < 1) throw std::invalid_argument("route_all_on: batch_size must be >= 1");
  std::map<std::string, std::vector<std::string>> per_device;
  std::vector<std::string>& ids = per_device[device];
  ids.reserve(trace.prompts.size());
  for (const Prompt& p : trace.prompts) ids.push_back(p.id);
  return detail::make_plan("all-on-" + device, batch_size, table.device_names(), per_device);
}

/// Per-prompt argmin over estimated carbon; ties go to the lexicographically
/// smallest device name. Batches chunk arrival order.
inline RoutingPlan route_carbon_aware(const WorkloadTrace& trace, const CostMatrix& matrix,
                                      int batch_size) {
  if (trace.prompts.size() != matrix.prompt_count()) {
    throw ValidationError("route_carbon_aware: matrix does not cover the trace");
  }
  std::map<std::string, std::vector<std::string>> per_device;
  for (std::size_t i = 0; i < trace.prompts.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t d = 1; d < matrix.device_count(); ++d) {
      if (matrix.at(i, d).carbon_kgco2e < matrix.at(i, best).carbon_kgco2e) best = d;
    }
    per_device[matrix.devices()[best]].push_back(matrix.prompt_ids()[i]);
  }
  return detail::make_plan("carbon-aware", batch_size, matrix.devices(), per_device);
}

/// Greedy list scheduling with a longest-processing-time-style priority:
/// prompts sorted by decreasing mean-over-devices latency (ties by id), each
/// assigned to the device with the smallest projected completion time under
/// per-prompt latency loads. Batching is applied after assignment.
inline RoutingPlan route_latency_aware(const WorkloadTrace& trace, const CostMatrix& matrix,
                                       int batch_size) {
  if (trace.prompts.size() != matrix.prompt_count()) {
    throw ValidationError("route_latency_aware: matrix does not cover the trace");
  }
  std::vector<std::size_t> order(matrix.prompt_count());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = matrix.mean_latency(a);
    const double lb = matrix.mean_latency(b);
    if (la != lb) return la > lb;
    return matrix.prompt_ids()[a] < matrix.prompt_ids()[b];
  });

  std::vector<double> loads(matrix.device_count(), 0.0);
  std::map<std::string, std::vector<std::string>> per_device;
  for (std::size_t idx : order) {
    std::size_t best = 0;
    double best_completion = loads[0] + matrix.at(idx, 0).latency_s;
    for (std::size_t d = 1; d < matrix.device_count(); ++d) {
      const double completion = loads[d] + matrix.at(idx, d).latency_s;
      if (completion < best_completion) {  // strict: ties keep the smaller name
        best = d;
        best_completion = completion;
      }
    }
    loads[best] = best_completion;
    per_device[matrix.devices()[best]].push_back(matrix.prompt_ids()[idx]);
  }
  return detail::make_plan("latency-aware", batch_size, matrix.devices(), per_device);
}

// ---------------------------------------------------------------------------
// Plan inspection
// ---------------------------------------------------------------------------

/// Checks that the plan partitions the trace and that assignment agrees with
/// device_batches (sizes, final-partial rule included).
inline void validate_plan(const RoutingPlan& plan, const WorkloadTrace& trace) {
  if (plan.batch_size < 1) throw ValidationError("plan: batch_size must be >= 1");
  std::map<std::string, std::string> seen;  // id -> device, rebuilt from batches
  for (const auto& [device, batches] : plan.device_batches) {
    for (std::size_t k = 0; k < batches.size(); ++k) {
      const std::vector<std::string>& batch = batches[k];
      if (batch.empty()) {
        throw ValidationError("plan: empty batch on device \"" + device + "\"");
      }
      if (static_cast<int>(batch.size()) > plan.batch_size) {
        throw ValidationError("plan: batch of " + std::to_string(batch.size()) +
                              " exceeds batch size " + std::to_string(plan.batch_size) +
                              " on device \"" + device + "\"");
      }
      if (k + 1 < batches.size() && static_cast<int>(batch.size()) != plan.batch_size) {
        throw ValidationError("plan: non-final partial batch on device \"" + device + "\"");
      }
      for (const std::string& id : batch) {
        if (!seen.emplace(id, device).second) {
          throw ValidationError("plan: prompt \"" + id + "\" appears in more than one batch");
        }
      }
    }
  }
  if (seen.size() != trace.prompts.size() || plan.assignment.size() != trace.prompts.size()) {
    throw ValidationError("plan: does not cover the trace exactly (" +
                          std::to_string(seen.size()) + " batched, " +
                          std::to_string(plan.assignment.size()) + " assigned, " +
                          std::to_string(trace.prompts.size()) + " prompts)");
  }
  for (const Prompt& p : trace.prompts) {
    const auto it = seen.find(p.id);
    if (it == seen.end()) throw ValidationError("plan: prompt \"" + p.id + "\" is not batched");
    const auto assigned = plan.assignment.find(p.id);
    if (assigned == plan.assignment.end() || assigned->second != it->second) {
      throw ValidationError("plan: assignment and batches disagree for prompt \"" + p.id + "\"");
    }
  }
}

struct PlanSummary {
  std::map<std::string, std::size_t> prompt_counts;
  std::map<std::string, double> fractions;
};

inline PlanSummary plan_summary(const RoutingPlan& plan, const CostMatrix& matrix) {
  for (const std::string& id : matrix.prompt_ids()) {
    if (!plan.assignment.contains(id)) {
      throw ValidationError("plan_summary: plan does not cover prompt \"" + id + "\"");
    }
  }
  if (plan.assignment.size() != matrix.prompt_count()) {
    throw ValidationError("plan_summary: plan and matrix cover different prompt sets");
  }
  PlanSummary summary;
  if (matrix.prompt_count() == 0) return summary;
  for (const std::string& device : matrix.devices()) summary.prompt_counts[device] = 0;
  for (const auto& [id, device] : plan.assignment) summary.prompt_counts[device] += 1;
  for (const auto& [device, count] : summary.prompt_counts) {
    summary.fractions[device] =
        static_cast<double>(count) / static_cast<double>(matrix.prompt_count());
  }
  return summary;
}

/// Total plan carbon under per-prompt accounting, summed in trace order so it
/// is bit-comparable with the exhaustive oracle's objective.
inline double plan_total_carbon(const RoutingPlan& plan, const CostMatrix& matrix) {
  double total = 0.0;
  for (std::size_t i = 0; i < matrix.prompt_count(); ++i) {
    const std::string& id = matrix.prompt_ids()[i];
    const auto it = plan.assignment.find(id);
    if (it == plan.assignment.end()) {
      throw ValidationError("plan_total_carbon: prompt \"" + id + "\" is unassigned");
    }
    total += matrix.at(i, matrix.device_index(it->second)).carbon_kgco2e;
  }
  return total;
}

/// Per-device accumulated per-prompt latency loads (list-scheduling view, no
/// batching).
inline std::map<std::string, double> plan_latency_loads(const RoutingPlan& plan,
                                                        const CostMatrix& matrix) {
  std::map<std::string, double> loads;
  for (const std::string& device : matrix.devices()) loads[device] = 0.0;
  for (std::size_t i = 0; i < matrix.prompt_count(); ++i) {
    const std::string& id = matrix.prompt_ids()[i];
    const auto it = plan.assignment.find(id);
    if (it == plan.assignment.end()) {
      throw ValidationError("plan_latency_loads: prompt \"" + id + "\" is unassigned");
    }
    loads[it->second] += matrix.at(i, matrix.device_index(it->second)).latency_s;
  }
  return loads;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json plan_to_json(const RoutingPlan& plan) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, device] : plan.assignment) assignment[id] = device;
  nlohmann::json batches = nlohmann::json::object();
  for (const auto& [device, device_batches] : plan.device_batches) {
    batches[device] = device_batches;
  }
  return {{"assignment", assignment},
          {"batch_size", plan.batch_size},
          {"device_batches", batches},
          {"strategy_label", plan.strategy_label}};
}

inline RoutingPlan plan_from_json(const nlohmann::json& doc) {
  RoutingPlan plan;
  plan.strategy_label = doc.at("strategy_label").get<std::string>();
  plan.batch_size = doc.at("batch_size").get<int>();
  for (const auto& [id, device] : doc.at("assignment").items()) {
    plan.assignment[id] = device.get<std::string>();
  }
  for (const auto& [device, batches] : doc.at("device_batches").items()) {
    plan.device_batches[device] = batches.get<std::vector<std::vector<std::string>>>();
  }
  return plan;
}

inline void save_plan(const RoutingPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << plan_to_json(plan).dump(2) << "\n";
}

inline RoutingPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plan file: " + path.string());
  try {
    return plan_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": JSON parse error: " + e.what());
  }
}

}  // namespace greenroute
