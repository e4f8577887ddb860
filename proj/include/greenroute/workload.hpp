/**
 * @file workload.hpp
 * @brief Prompts, task classes, complexity scoring, and seeded synthetic traces.
 *
 * A trace is an ordered list of prompts (arrival order is significant). Traces
 * are either loaded from JSON or generated from a TraceSpec; generation is a
 * pure function of (spec, seed), so identical inputs produce byte-identical
 * trace files. All samplers are hand-rolled on top of mt19937_64 because the
 * standard <random> distributions are not bit-stable across library versions.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "greenroute/errors.hpp"

namespace greenroute {

// ---------------------------------------------------------------------------
// Task classes
// ---------------------------------------------------------------------------

enum class TaskClass {
  math_reasoning,
  extractive_qa,
  dialogue_summarization,
  code_generation,
  science_mcq,
  arxiv_summarization,
  dialogue_continuation,
  newswire_summarization,
  factual_lookup,
  creative_writing,
  logical_deduction,
};

inline constexpr std::array<TaskClass, 11> kAllTaskClasses = {
    TaskClass::math_reasoning,         TaskClass::extractive_qa,
    TaskClass::dialogue_summarization, TaskClass::code_generation,
    TaskClass::science_mcq,            TaskClass::arxiv_summarization,
    TaskClass::dialogue_continuation,  TaskClass::newswire_summarization,
    TaskClass::factual_lookup,         TaskClass::creative_writing,
    TaskClass::logical_deduction,
};

inline constexpr std::string_view to_string(TaskClass c) {
  switch (c) {
    case TaskClass::math_reasoning: return "math_reasoning";
    case TaskClass::extractive_qa: return "extractive_qa";
    case TaskClass::dialogue_summarization: return "dialogue_summarization";
    case TaskClass::code_generation: return "code_generation";
    case TaskClass::science_mcq: return "science_mcq";
    case TaskClass::arxiv_summarization: return "arxiv_summarization";
    case TaskClass::dialogue_continuation: return "dialogue_continuation";
    case TaskClass::newswire_summarization: return "newswire_summarization";
    case TaskClass::factual_lookup: return "factual_lookup";
    case TaskClass::creative_writing: return "creative_writing";
    case TaskClass::logical_deduction: return "logical_deduction";
  }
  return "unknown";
}

/// Closed enumeration: an unknown label is a ValidationError.
inline TaskClass parse_task_class(std::string_view label) {
  for (TaskClass c : kAllTaskClasses) {
    if (to_string(c) == label) return c;
  }
  throw ValidationError("unknown task class: \"" + std::string(label) + "\"");
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Prompt {
  std::string id;
  TaskClass task_class = TaskClass::factual_lookup;
  int input_tokens = 1;
  int expected_output_tokens = 1;
  double complexity_score = 0.0;

  bool operator==(const Prompt&) const = default;
};

struct WorkloadTrace {
  std::vector<Prompt> prompts;                 // arrival order, significant
  std::optional<std::uint64_t> seed;           // generation provenance only

  bool operator==(const WorkloadTrace&) const = default;
};

/// Per-class sampling parameters. Means/spreads are in tokens; marker_mean is
/// the Poisson rate of constraint cues used to derive the complexity score.
struct TokenStats {
  double input_mean = 50.0;
  double input_spread = 10.0;
  double output_mean = 50.0;
  double output_spread = 10.0;
  double marker_mean = 0.5;
};

struct TraceSpec {
  int total_prompts = 0;
  std::map<TaskClass, double> class_mix;       // weights, normalized internally
  std::map<TaskClass, TokenStats> token_stats; // overrides; defaults otherwise
  std::uint64_t seed = 0;
};

inline TokenStats default_token_stats(TaskClass c) {
  switch (c) {
    case TaskClass::math_reasoning:         return {85, 25, 220, 70, 2.5};
    case TaskClass::extractive_qa:          return {180, 60, 25, 10, 0.5};
    case TaskClass::dialogue_summarization: return {420, 120, 90, 30, 0.8};
    case TaskClass::code_generation:        return {70, 25, 320, 110, 3.0};
    case TaskClass::science_mcq:            return {95, 30, 60, 25, 1.0};
    case TaskClass::arxiv_summarization:    return {900, 250, 260, 80, 1.0};
    case TaskClass::dialogue_continuation:  return {160, 50, 70, 25, 0.3};
    case TaskClass::newswire_summarization: return {700, 200, 120, 40, 0.8};
    case TaskClass::factual_lookup:         return {14, 5, 18, 8, 0.1};
    case TaskClass::creative_writing:       return {90, 30, 520, 160, 2.0};
    case TaskClass::logical_deduction:      return {130, 40, 240, 80, 5.0};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Complexity scoring
// ---------------------------------------------------------------------------

/// Constraint cues counted when raw prompt text is available. The count feeds
/// score_complexity as constraint_marker_count.
inline constexpr std::array<std::string_view, 8> kConstraintCues = {
    "must", "only if", "exactly one", "step by step",
    "at least", "at most", "each", "no more than",
};

inline int count_constraint_markers(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  int total = 0;
  for (std::string_view cue : kConstraintCues) {
    std::size_t pos = 0;
    while ((pos = lower.find(cue, pos)) != std::string::npos) {
      ++total;
      pos += cue.size();
    }
  }
  return total;
}

inline double class_difficulty_prior(TaskClass c) {
  switch (c) {
    case TaskClass::math_reasoning:         return 0.90;
    case TaskClass::logical_deduction:      return 0.85;
    case TaskClass::code_generation:        return 0.80;
    case TaskClass::science_mcq:            return 0.60;
    case TaskClass::arxiv_summarization:    return 0.55;
    case TaskClass::dialogue_summarization: return 0.50;
    case TaskClass::creative_writing:       return 0.50;
    case TaskClass::newswire_summarization: return 0.45;
    case TaskClass::dialogue_continuation:  return 0.35;
    case TaskClass::extractive_qa:          return 0.30;
    case TaskClass::factual_lookup:         return 0.05;
  }
  return 0.5;
}

/// Deterministic complexity proxy in [0,1]: a convex blend of a class prior
/// and saturating terms in prompt length and constraint density. Monotone
/// non-decreasing in input_tokens and in constraint_marker_count.
inline double score_complexity(int input_tokens, int constraint_marker_count,
                               TaskClass task_class) {
  if (input_tokens < 1) throw std::invalid_argument("score_complexity: input_tokens must be >= 1");
  if (constraint_marker_count < 0) {
    throw std::invalid_argument("score_complexity: constraint_marker_count must be >= 0");
  }
  const double token_term = 1.0 - std::exp(-static_cast<double>(input_tokens) / 400.0);
  const double marker_term = 1.0 - std::exp(-static_cast<double>(constraint_marker_count) / 4.0);
  const double score = 0.25 * class_difficulty_prior(task_class) + 0.45 * token_term +
                       0.30 * marker_term;
  return std::clamp(score, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Deterministic sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Bit-stable RNG: mt19937_64 output mapped through hand-rolled distributions.
class TraceRng {
 public:
  explicit TraceRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() {  // [0,1), 53-bit resolution
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  double normal(double mean, double spread) {
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + spread * z;
  }

  /// Rounded truncated normal, clamped to >= 1 (token counts).
  int positive_count(double mean, double spread) {
    return static_cast<int>(std::max<long long>(1, std::llround(normal(mean, spread))));
  }

  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {  // Fisher-Yates
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[bounded(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Trace generation
// ---------------------------------------------------------------------------

inline void validate_trace_spec(const TraceSpec& spec) {
  if (spec.total_prompts < 1) {
    throw ValidationError("trace spec: total_prompts must be positive, got " +
                          std::to_string(spec.total_prompts));
  }
  if (spec.class_mix.empty()) throw ValidationError("trace spec: class_mix is empty");
  double weight_sum = 0.0;
  for (const auto& [cls, weight] : spec.class_mix) {
    if (weight < 0.0 || !std::isfinite(weight)) {
      throw ValidationError("trace spec: negative or non-finite weight for class " +
                            std::string(to_string(cls)));
    }
    weight_sum += weight;
  }
  if (weight_sum <= 0.0) {
    throw ValidationError("trace spec: at least one class weight must be positive");
  }
  for (const auto& [cls, stats] : spec.token_stats) {
    if (stats.input_mean < 1.0 || stats.output_mean < 1.0) {
      throw ValidationError("trace spec: token means must be >= 1 for class " +
                            std::string(to_string(cls)));
    }
    if (stats.input_spread < 0.0 || stats.output_spread < 0.0 || stats.marker_mean < 0.0) {
      throw ValidationError("trace spec: spreads and marker_mean must be >= 0 for class " +
                            std::string(to_string(cls)));
    }
  }
}

/// Generates exactly spec.total_prompts prompts. Class counts come from a
/// stratified largest-remainder allocation of the normalized weights, so
/// frequencies track the mix exactly (well inside multinomial error); arrival
/// order is a full shuffle under the seed, never grouped by class.
inline WorkloadTrace generate_trace(const TraceSpec& spec) {
  validate_trace_spec(spec);

  double weight_sum = 0.0;
  for (const auto& [cls, weight] : spec.class_mix) weight_sum += weight;

  struct Allocation {
    TaskClass cls;
    int count;
    double remainder;
  };
  std::vector<Allocation> allocations;
  int allocated = 0;
  for (const auto& [cls, weight] : spec.class_mix) {  // map order == enum order
    if (weight <= 0.0) continue;
    const double target = spec.total_prompts * (weight / weight_sum);
    const int base = static_cast<int>(std::floor(target));
    allocations.push_back({cls, base, target - base});
    allocated += base;
  }
  std::stable_sort(allocations.begin(), allocations.end(),
                   [](const Allocation& a, const Allocation& b) {
                     return a.remainder > b.remainder;
                   });
  for (int i = 0; i < spec.total_prompts - allocated; ++i) {
    allocations[static_cast<std::size_t>(i) % allocations.size()].count += 1;
  }
  std::stable_sort(allocations.begin(), allocations.end(),
                   [](const Allocation& a, const Allocation& b) { return a.cls < b.cls; });

  std::vector<TaskClass> slots;
  slots.reserve(static_cast<std::size_t>(spec.total_prompts));
  for (const Allocation& alloc : allocations) {
    slots.insert(slots.end(), static_cast<std::size_t>(alloc.count), alloc.cls);
  }

  detail::TraceRng rng(spec.seed);
  rng.shuffle(slots);

  const int id_width =
      std::max<int>(4, static_cast<int>(std::to_string(spec.total_prompts - 1).size()));

  WorkloadTrace trace;
  trace.seed = spec.seed;
  trace.prompts.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const TaskClass cls = slots[i];
    const auto it = spec.token_stats.find(cls);
    const TokenStats stats = it != spec.token_stats.end() ? it->second : default_token_stats(cls);

    Prompt p;
    std::string digits = std::to_string(i);
    p.id = "p" + std::string(static_cast<std::size_t>(id_width) - digits.size(), '0') + digits;
    p.task_class = cls;
    p.input_tokens = rng.positive_count(stats.input_mean, stats.input_spread);
    p.expected_output_tokens = rng.positive_count(stats.output_mean, stats.output_spread);
    const int markers = rng.poisson(stats.marker_mean);
    p.complexity_score = score_complexity(p.input_tokens, markers, cls);
    trace.prompts.push_back(std::move(p));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void validate_trace(const WorkloadTrace& trace) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < trace.prompts.size(); ++i) {
    const Prompt& p = trace.prompts[i];
    const std::string where = "trace[" + std::to_string(i) + "] (id \"" + p.id + "\")";
    if (p.id.empty()) throw ValidationError("trace[" + std::to_string(i) + "]: empty id");
    if (!seen.insert(p.id).second) {
      throw ValidationError("trace[" + std::to_string(i) + "]: duplicate id \"" + p.id + "\"");
    }
    if (p.input_tokens < 1) {
      throw ValidationError(where + ": input_tokens must be >= 1, got " +
                            std::to_string(p.input_tokens));
    }
    if (p.expected_output_tokens < 1) {
      throw ValidationError(where + ": expected_output_tokens must be >= 1, got " +
                            std::to_string(p.expected_output_tokens));
    }
    if (!(p.complexity_score >= 0.0 && p.complexity_score <= 1.0)) {
      std::ostringstream oss;
      oss << where << ": complexity_score " << p.complexity_score << " outside [0, 1]";
      throw ValidationError(oss.str());
    }
  }
}

/// Canonical trace serialization: a JSON array, keys sorted, two-space indent,
/// trailing newline. Stable bytes for identical traces.
inline std::string trace_to_json_string(const WorkloadTrace& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Prompt& p : trace.prompts) {
    arr.push_back({
        {"complexity_score", p.complexity_score},
        {"expected_output_tokens", p.expected_output_tokens},
        {"id", p.id},
        {"input_tokens", p.input_tokens},
        {"task_class", std::string(to_string(p.task_class))},
    });
  }
  return arr.dump(2) + "\n";
}

inline void save_trace(const WorkloadTrace& trace, const std::filesystem::path& path) {
  validate_trace(trace);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << trace_to_json_string(trace);
}

inline WorkloadTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": JSON parse error: " + e.what());
  }
  if (!doc.is_array()) throw ValidationError(path.string() + ": trace file must be a JSON array");

  WorkloadTrace trace;
  trace.prompts.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const nlohmann::json& row = doc[i];
    const std::string where = "trace[" + std::to_string(i) + "]";
    if (!row.is_object()) throw ValidationError(where + ": expected an object");
    for (const char* field : {"id", "task_class", "input_tokens", "expected_output_tokens",
                              "complexity_score"}) {
      if (!row.contains(field)) throw ValidationError(where + ": missing field '" + field + "'");
    }
    if (!row["id"].is_string()) throw ValidationError(where + ": 'id' must be a string");
    if (!row["task_class"].is_string()) {
      throw ValidationError(where + ": 'task_class' must be a string");
    }
    if (!row["input_tokens"].is_number_integer() ||
        !row["expected_output_tokens"].is_number_integer()) {
      throw ValidationError(where + ": token counts must be integers");
    }
    if (!row["complexity_score"].is_number()) {
      throw ValidationError(where + ": 'complexity_score' must be a number");
    }
    Prompt p;
    p.id = row["id"].get<std::string>();
    try {
      p.task_class = parse_task_class(row["task_class"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(where + " (id \"" + p.id + "\"): " + e.what());
    }
    p.input_tokens = row["input_tokens"].get<int>();
    p.expected_output_tokens = row["expected_output_tokens"].get<int>();
    p.complexity_score = row["complexity_score"].get<double>();
    trace.prompts.push_back(std::move(p));
  }
  validate_trace(trace);
  return trace;
}

inline TraceSpec trace_spec_from_json(const nlohmann::json& doc, const std::string& source) {
  if (!doc.is_object()) throw ValidationError(source + ": trace spec must be a JSON object");
  for (const char* field : {"total_prompts", "seed", "class_mix"}) {
    if (!doc.contains(field)) throw ValidationError(source + ": missing field '" + field + "'");
  }
  TraceSpec spec;
  if (!doc["total_prompts"].is_number_integer()) {
    throw ValidationError(source + ": 'total_prompts' must be an integer");
  }
  spec.total_prompts = doc["total_prompts"].get<int>();
  spec.seed = doc["seed"].get<std::uint64_t>();
  if (!doc["class_mix"].is_object()) {
    throw ValidationError(source + ": 'class_mix' must be an object");
  }
  for (const auto& [label, weight] : doc["class_mix"].items()) {
    spec.class_mix[parse_task_class(label)] = weight.get<double>();
  }
  if (doc.contains("token_stats")) {
    for (const auto& [label, entry] : doc["token_stats"].items()) {
      const TaskClass cls = parse_task_class(label);
      TokenStats stats = default_token_stats(cls);
      for (const char* field : {"input_mean", "input_spread", "output_mean", "output_spread"}) {
        if (!entry.contains(field)) {
          throw ValidationError(source + ": token_stats." + label + " missing '" + field + "'");
        }
      }
      stats.input_mean = entry["input_mean"].get<double>();
      stats.input_spread = entry["input_spread"].get<double>();
      stats.output_mean = entry["output_mean"].get<double>();
      stats.output_spread = entry["output_spread"].get<double>();
      if (entry.contains("marker_mean")) stats.marker_mean = entry["marker_mean"].get<double>();
      spec.token_stats[cls] = stats;
    }
  }
  validate_trace_spec(spec);
  return spec;
}

inline TraceSpec load_trace_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace spec: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": JSON parse error: " + e.what());
  }
  return trace_spec_from_json(doc, path.string());
}

}  // namespace greenroute
