/// Exhaustive assignment enumeration for small instances. Test-side reference
/// for the routing strategies: exact minimum-carbon and minimum-makespan
/// assignments by brute force.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "greenroute/errors.hpp"
#include "greenroute/strategies.hpp"
#include "greenroute/workload.hpp"

namespace greenroute {

inline constexpr int kMaxExhaustivePrompts = 15;

struct ExhaustiveResult {
  std::map<std::string, std::string> best_assignment;
  double best_objective = 0.0;
  std::uint64_t enumerated_count = 0;
};

namespace detail {

/// Walks all |devices|^n assignments in lexicographic order; strict-improvement
/// updates keep the lexicographically smallest optimum.
template <typename ObjectiveFn>
ExhaustiveResult enumerate_assignments(const CostMatrix& matrix, ObjectiveFn objective) {
  const std::size_t n = matrix.prompt_count();
  const std::size_t d = matrix.device_count();
  if (n > kMaxExhaustivePrompts) {
    throw std::invalid_argument("exhaustive oracle: instance too large (" + std::to_string(n) +
                                " prompts > " + std::to_string(kMaxExhaustivePrompts) + ")");
  }

  std::vector<std::size_t> digits(n, 0);
  ExhaustiveResult result;
  bool first = true;
  std::vector<std::size_t> best_digits;
  while (true) {
    const double value = objective(digits);
    if (first || value < result.best_objective) {
      first = false;
      result.best_objective = value;
      best_digits = digits;
    }
    ++result.enumerated_count;

    bool wrapped = false;  // odometer increment, most-significant digit first in ids
    std::size_t pos = n;
    while (true) {
      if (pos == 0) {
        wrapped = true;
        break;
      }
      --pos;
      if (++digits[pos] < d) break;
      digits[pos] = 0;
    }
    if (n == 0 || wrapped) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    result.best_assignment[matrix.prompt_ids()[i]] = matrix.devices()[best_digits[i]];
  }
  return result;
}

}  // namespace detail

/// Objective: sum of per-prompt carbon entries (trace order, so totals are
/// bit-comparable with plan_total_carbon).
inline ExhaustiveResult brute_force_min_carbon(const WorkloadTrace& trace,
                                               const CostMatrix& matrix) {
  if (trace.prompts.size() != matrix.prompt_count()) {
    throw ValidationError("brute_force_min_carbon: matrix does not cover the trace");
  }
  return detail::enumerate_assignments(matrix, [&](const std::vector<std::size_t>& digits) {
    double total = 0.0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      total += matrix.at(i, digits[i]).carbon_kgco2e;
    }
    return total;
  });
}

/// Objective: max over devices of summed per-prompt latencies.
inline ExhaustiveResult brute_force_min_makespan(const WorkloadTrace& trace,
                                                 const CostMatrix& matrix) {
  if (trace.prompts.size() != matrix.prompt_count()) {
    throw ValidationError("brute_force_min_makespan: matrix does not cover the trace");
  }
  std::vector<double> loads(matrix.device_count(), 0.0);
  return detail::enumerate_assignments(matrix, [&](const std::vector<std::size_t>& digits) {
    std::fill(loads.begin(), loads.end(), 0.0);
    for (std::size_t i = 0; i < digits.size(); ++i) {
      loads[digits[i]] += matrix.at(i, digits[i]).latency_s;
    }
    double makespan = 0.0;
    for (double load : loads) makespan = std::max(makespan, load);
    return makespan;
  });
}

}  // namespace greenroute
