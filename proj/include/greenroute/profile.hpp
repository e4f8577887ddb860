/**
 * @file profile.hpp
 * @brief Device specs, measured benchmark records, and batch cost estimation.
 *
 * A BenchmarkRecord is one measured row: per-prompt averages for a (device,
 * batch size) pair. Estimation decomposes latency as TTFT + TPOT * tokens plus
 * a non-negative residual calibrated so the estimate reproduces the record
 * exactly at its own centroid; energy scales linearly in output tokens.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "greenroute/errors.hpp"
#include "greenroute/workload.hpp"

namespace greenroute {

inline constexpr double kThroughputIdentityTolerance = 0.02;

struct DeviceSpec {
  std::string name;
  double gpu_memory_gb = 0.0;
  std::string hosted_model;
  double model_memory_gb = 0.0;
  double per_prompt_kv_memory_gb = 0.0;

  bool operator==(const DeviceSpec&) const = default;
};

struct BenchmarkRecord {
  std::string device;
  int batch_size = 1;
  double e2e_latency_s = 0.0;   // per-prompt average
  double ttft_s = 0.0;
  double tpot_s = 0.0;          // seconds per output token
  double token_count = 0.0;     // average output tokens (calibration centroid)
  double throughput_tps = 0.0;
  double energy_kwh = 0.0;      // per-prompt average
  double carbon_kgco2e = 0.0;   // per-prompt average

  bool operator==(const BenchmarkRecord&) const = default;
};

struct EstimatedMetrics {
  double latency_s = 0.0;
  double energy_kwh = 0.0;
  double output_tokens = 0.0;
};

enum class Feasibility { feasible, unstable };

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline double implied_intensity(const BenchmarkRecord& r) {
  return r.carbon_kgco2e / r.energy_kwh;
}

/// Relative error of the recorded throughput against token_count / e2e.
inline double throughput_identity_error(const BenchmarkRecord& r) {
  return std::abs(r.throughput_tps - r.token_count / r.e2e_latency_s) / r.throughput_tps;
}

inline void validate_device_spec(const DeviceSpec& spec) {
  if (spec.name.empty()) throw ValidationError("device spec: empty name");
  if (!(spec.gpu_memory_gb > 0.0)) {
    throw ValidationError("device \"" + spec.name + "\": gpu_memory_gb must be positive");
  }
  if (!(spec.model_memory_gb > 0.0)) {
    throw ValidationError("device \"" + spec.name + "\": model_memory_gb must be positive");
  }
  if (spec.per_prompt_kv_memory_gb < 0.0) {
    throw ValidationError("device \"" + spec.name + "\": per_prompt_kv_memory_gb must be >= 0");
  }
  if (!(spec.model_memory_gb < spec.gpu_memory_gb)) {
    throw ValidationError("device \"" + spec.name +
                          "\": model does not fit in GPU memory (model_memory_gb >= gpu_memory_gb)");
  }
}

inline void validate_record(const BenchmarkRecord& r) {
  const std::string where = "record (" + r.device + ", batch " + std::to_string(r.batch_size) + ")";
  if (r.device.empty()) throw ValidationError("record: empty device name");
  if (r.batch_size < 1) throw ValidationError(where + ": batch_size must be >= 1");
  const std::pair<const char*, double> positives[] = {
      {"e2e_latency_s", r.e2e_latency_s}, {"ttft_s", r.ttft_s},
      {"tpot_s", r.tpot_s},               {"token_count", r.token_count},
      {"throughput_tps", r.throughput_tps}, {"energy_kwh", r.energy_kwh},
      {"carbon_kgco2e", r.carbon_kgco2e},
  };
  for (const auto& [name, value] : positives) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ValidationError(where + ": " + name + " must be positive and finite");
    }
  }
  if (!(r.ttft_s < r.e2e_latency_s)) {
    throw ValidationError(where + ": ttft_s must be < e2e_latency_s");
  }
  const double identity_err = throughput_identity_error(r);
  if (identity_err > kThroughputIdentityTolerance) {
    std::ostringstream oss;
    oss << where << ": throughput identity violated, |" << r.throughput_tps << " - "
        << r.token_count << "/" << r.e2e_latency_s << "| / " << r.throughput_tps << " = "
        << identity_err << " > " << kThroughputIdentityTolerance;
    throw ValidationError(oss.str());
  }
  if (!std::isfinite(implied_intensity(r))) {
    throw ValidationError(where + ": carbon/energy ratio is not finite");
  }
}

// ---------------------------------------------------------------------------
// ProfileTable
// ---------------------------------------------------------------------------

/// Immutable after construction; estimators are pure functions over it.
class ProfileTable {
 public:
  ProfileTable() = default;

  static ProfileTable build(std::vector<DeviceSpec> specs, std::vector<BenchmarkRecord> records) {
    ProfileTable table;
    for (DeviceSpec& spec : specs) {
      validate_device_spec(spec);
      const std::string name = spec.name;
      if (!table.devices_.emplace(name, std::move(spec)).second) {
        throw ValidationError("duplicate device spec: \"" + name + "\"");
      }
    }
    for (BenchmarkRecord& record : records) {
      validate_record(record);
      if (!table.devices_.contains(record.device)) {
        throw ValidationError("record references unknown device \"" + record.device + "\"");
      }
      const auto key = std::make_pair(record.device, record.batch_size);
      if (!table.records_.emplace(key, std::move(record)).second) {
        throw ValidationError("duplicate record for (" + key.first + ", batch " +
                              std::to_string(key.second) + ")");
      }
    }
    for (const auto& [name, spec] : table.devices_) {
      bool any = false;
      for (const auto& [key, record] : table.records_) {
        if (key.first == name) { any = true; break; }
      }
      if (!any) {
        throw ValidationError("device \"" + name + "\" has no benchmark records");
      }
    }
    return table;
  }

  const DeviceSpec& device(const std::string& name) const {
    const auto it = devices_.find(name);
    if (it == devices_.end()) throw ValidationError("unknown device: \"" + name + "\"");
    return it->second;
  }

  bool has_device(const std::string& name) const { return devices_.contains(name); }

  bool has_record(const std::string& device, int batch_size) const {
    return records_.contains({device, batch_size});
  }

  const BenchmarkRecord& record(const std::string& device, int batch_size) const {
    const auto it = records_.find({device, batch_size});
    if (it == records_.end()) {
      throw ValidationError("no benchmark record for (" + device + ", batch " +
                            std::to_string(batch_size) + ")");
    }
    return it->second;
  }

  std::vector<std::string> device_names() const {  // sorted
    std::vector<std::string> names;
    names.reserve(devices_.size());
    for (const auto& [name, spec] : devices_) names.push_back(name);
    return names;
  }

  std::vector<int> batch_sizes(const std::string& device) const {
    std::vector<int> sizes;
    for (const auto& [key, record] : records_) {
      if (key.first == device) sizes.push_back(key.second);
    }
    return sizes;
  }

  const std::map<std::string, DeviceSpec>& devices() const { return devices_; }
  const std::map<std::pair<std::string, int>, BenchmarkRecord>& records() const {
    return records_;
  }

 private:
  std::map<std::string, DeviceSpec> devices_;
  std::map<std::pair<std::string, int>, BenchmarkRecord> records_;
};

// ---------------------------------------------------------------------------
// File ingestion
// ---------------------------------------------------------------------------

inline constexpr std::string_view kProfileCsvHeader =
    "device,batch_size,e2e_latency_s,ttft_s,tpot_s,token_count,throughput_tps,"
    "energy_kwh,carbon_kgco2e";

/// Parses the benchmark CSV. Structural problems (header, field count, bad
/// numbers) throw with 1-based line locations; semantic checks live in
/// validate_record so callers can report per-row verdicts.
inline std::vector<BenchmarkRecord> parse_profile_csv(std::istream& in,
                                                      const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": no records (empty file)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kProfileCsvHeader) {
    throw ValidationError(source + ": line 1: expected header \"" +
                          std::string(kProfileCsvHeader) + "\", got \"" + line + "\"");
  }

  std::vector<BenchmarkRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ": line " + std::to_string(line_no);

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 9) {
      throw ValidationError(where + ": expected 9 fields, got " + std::to_string(fields.size()));
    }

    const auto number = [&](int idx, const char* name) {
      try {
        std::size_t used = 0;
        const double value = std::stod(fields[static_cast<std::size_t>(idx)], &used);
        if (used != fields[static_cast<std::size_t>(idx)].size()) {
          throw std::invalid_argument("trailing characters");
        }
        return value;
      } catch (const std::exception&) {
        throw ValidationError(where + ": field '" + name + "' is not a number: \"" +
                              fields[static_cast<std::size_t>(idx)] + "\"");
      }
    };

    BenchmarkRecord r;
    r.device = fields[0];
    const double batch = number(1, "batch_size");
    if (batch < 1.0 || batch != std::floor(batch)) {
      throw ValidationError(where + ": batch_size must be a positive integer");
    }
    r.batch_size = static_cast<int>(batch);
    r.e2e_latency_s = number(2, "e2e_latency_s");
    r.ttft_s = number(3, "ttft_s");
    r.tpot_s = number(4, "tpot_s");
    r.token_count = number(5, "token_count");
    r.throughput_tps = number(6, "throughput_tps");
    r.energy_kwh = number(7, "energy_kwh");
    r.carbon_kgco2e = number(8, "carbon_kgco2e");
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ValidationError(source + ": no records");
  return records;
}

inline std::vector<BenchmarkRecord> load_profile_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profile file: " + path.string());
  return parse_profile_csv(in, path.string());
}

inline std::vector<DeviceSpec> load_device_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open device spec file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": JSON parse error: " + e.what());
  }
  if (!doc.is_array()) {
    throw ValidationError(path.string() + ": device spec file must be a JSON array");
  }
  std::vector<DeviceSpec> specs;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const nlohmann::json& row = doc[i];
    const std::string where = path.string() + ": device[" + std::to_string(i) + "]";
    for (const char* field : {"name", "gpu_memory_gb", "hosted_model", "model_memory_gb",
                              "per_prompt_kv_memory_gb"}) {
      if (!row.contains(field)) throw ValidationError(where + ": missing field '" + field + "'");
    }
    DeviceSpec spec;
    spec.name = row["name"].get<std::string>();
    spec.gpu_memory_gb = row["gpu_memory_gb"].get<double>();
    spec.hosted_model = row["hosted_model"].get<std::string>();
    spec.model_memory_gb = row["model_memory_gb"].get<double>();
    spec.per_prompt_kv_memory_gb = row["per_prompt_kv_memory_gb"].get<double>();
    specs.push_back(std::move(spec));
  }
  return specs;
}

/// Loads and cross-validates the benchmark CSV and device spec JSON.
/// Everything is checked here; downstream code can assume a valid table.
inline ProfileTable ingest_profiles(const std::filesystem::path& profile_csv,
                                    const std::filesystem::path& device_json) {
  return ProfileTable::build(load_device_specs(device_json), load_profile_records(profile_csv));
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

/// Unmodeled dispatch/prefill overhead: what remains of the measured E2E after
/// the TTFT + TPOT * tokens decomposition, clamped at zero.
inline double latency_residual(const BenchmarkRecord& r) {
  return std::max(0.0, r.e2e_latency_s - (r.ttft_s + r.tpot_s * r.token_count));
}

namespace detail {

// Token counts are doubles here: record centroids are fractional averages.
inline EstimatedMetrics estimate_from_record(const BenchmarkRecord& r, double output_tokens) {
  if (!(output_tokens > 0.0)) {
    throw std::invalid_argument("estimate: output token count must be positive");
  }
  EstimatedMetrics m;
  m.latency_s = r.ttft_s + r.tpot_s * output_tokens + latency_residual(r);
  m.energy_kwh = r.energy_kwh * (output_tokens / r.token_count);
  m.output_tokens = output_tokens;
  return m;
}

inline EstimatedMetrics batch_estimate_from_record(const BenchmarkRecord& r, double max_tokens,
                                                   double total_tokens) {
  if (!(max_tokens > 0.0) || !(total_tokens > 0.0)) {
    throw std::invalid_argument("estimate: batch token counts must be positive");
  }
  EstimatedMetrics m;
  m.latency_s = r.ttft_s + r.tpot_s * max_tokens + latency_residual(r);  // gated by longest member
  m.energy_kwh = r.energy_kwh * (total_tokens / r.token_count);
  m.output_tokens = total_tokens;
  return m;
}

}  // namespace detail

inline EstimatedMetrics estimate_prompt_metrics(const Prompt& prompt, const std::string& device,
                                                int batch_size, const ProfileTable& table) {
  return detail::estimate_from_record(table.record(device, batch_size),
                                      prompt.expected_output_tokens);
}

/// Batch latency is gated by the longest member; batch energy scales with the
/// batch's total output tokens.
inline EstimatedMetrics estimate_batch_metrics(std::span<const Prompt> prompts,
                                               const std::string& device, int batch_size,
                                               const ProfileTable& table) {
  if (prompts.empty()) throw std::invalid_argument("estimate_batch_metrics: empty batch");
  if (static_cast<int>(prompts.size()) > batch_size) {
    throw std::invalid_argument("estimate_batch_metrics: batch of " +
                                std::to_string(prompts.size()) + " exceeds batch size " +
                                std::to_string(batch_size));
  }
  double max_tokens = 0.0;
  double total_tokens = 0.0;
  for (const Prompt& p : prompts) {
    max_tokens = std::max(max_tokens, static_cast<double>(p.expected_output_tokens));
    total_tokens += p.expected_output_tokens;
  }
  return detail::batch_estimate_from_record(table.record(device, batch_size), max_tokens,
                                            total_tokens);
}

/// Unstable iff the model plus per-prompt KV state overflows GPU memory.
inline Feasibility check_memory_feasibility(const DeviceSpec& spec, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("check_memory_feasibility: batch_size >= 1");
  const double demand = spec.model_memory_gb + batch_size * spec.per_prompt_kv_memory_gb;
  return demand > spec.gpu_memory_gb ? Feasibility::unstable : Feasibility::feasible;
}

}  // namespace greenroute
