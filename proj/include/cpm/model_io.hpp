#pragma once

// Versioned, self-describing model files (JSON). Doubles are written in
// shortest round-trip form, so load(save(m)) reproduces m bit for bit.

#include <string>

#include <json.hpp>

#include "cpm/lstm.hpp"

namespace cpm {

inline constexpr const char* kModelFormat = "cpm-forecast-model";
inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const ForecastModel& model);
ForecastModel model_from_json(const nlohmann::json& doc);

void save_model(const ForecastModel& model, const std::string& path);
ForecastModel load_model(const std::string& path);

}  // namespace cpm
