/// Energy-to-carbon conversion and derivation of the grid intensity factor
/// implied by benchmark records.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "greenroute/errors.hpp"
#include "greenroute/profile.hpp"

namespace greenroute {

struct CarbonModel {
  double intensity_kgco2e_per_kwh = 0.0;
  std::string source_label;

  bool operator==(const CarbonModel&) const = default;
};

struct IntensityDerivation {
  CarbonModel model;
  double max_rel_deviation = 0.0;  // spread of per-record ratios around the mean
};

/// Mean of per-record carbon/energy ratios. Ratios are sorted before summing
/// so the result is exactly permutation-invariant.
inline IntensityDerivation derive_intensity(std::span<const BenchmarkRecord> records,
                                            std::string source_label = "mean-of-record-ratios") {
  if (records.empty()) throw ValidationError("derive_intensity: no records");
  std::vector<double> ratios;
  ratios.reserve(records.size());
  for (const BenchmarkRecord& r : records) {
    if (!(r.energy_kwh > 0.0)) {
      throw ValidationError("derive_intensity: record (" + r.device + ", batch " +
                            std::to_string(r.batch_size) + ") has non-positive energy");
    }
    ratios.push_back(r.carbon_kgco2e / r.energy_kwh);
  }
  std::sort(ratios.begin(), ratios.end());
  double sum = 0.0;
  for (double ratio : ratios) sum += ratio;

  IntensityDerivation out;
  out.model.intensity_kgco2e_per_kwh = sum / static_cast<double>(ratios.size());
  out.model.source_label = std::move(source_label);
  for (double ratio : ratios) {
    out.max_rel_deviation =
        std::max(out.max_rel_deviation, std::abs(ratio - out.model.intensity_kgco2e_per_kwh) /
                                            out.model.intensity_kgco2e_per_kwh);
  }
  return out;
}

inline double energy_to_carbon(double energy_kwh, const CarbonModel& model) {
  if (energy_kwh < 0.0) throw std::invalid_argument("energy_to_carbon: negative energy");
  return energy_kwh * model.intensity_kgco2e_per_kwh;
}

inline nlohmann::json carbon_model_to_json(const CarbonModel& model) {
  return {{"intensity_kgco2e_per_kwh", model.intensity_kgco2e_per_kwh},
          {"source_label", model.source_label}};
}

inline CarbonModel carbon_model_from_json(const nlohmann::json& doc) {
  CarbonModel model;
  model.intensity_kgco2e_per_kwh = doc.at("intensity_kgco2e_per_kwh").get<double>();
  model.source_label = doc.at("source_label").get<std::string>();
  if (!(model.intensity_kgco2e_per_kwh > 0.0) ||
      !std::isfinite(model.intensity_kgco2e_per_kwh)) {
    throw ValidationError("carbon model: intensity must be positive and finite");
  }
  return model;
}

}  // namespace greenroute
