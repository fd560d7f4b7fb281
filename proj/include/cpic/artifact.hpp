#pragma once

// JSON model artifacts and training reports. Doubles are written in shortest
// round-trip form, so serialize -> parse -> serialize is byte-identical.

#include "cpic/objective.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace cpic {

inline constexpr int kArtifactFormatVersion = 1;

struct ModelArtifact {
  int format_version = kArtifactFormatVersion;
  CpicModel model;
  std::string traces_digest;  // FNV-1a over the loss, compression and pi traces
};

nlohmann::json config_to_json(const CpicConfig& config);
/// Throws ConfigError for missing or invalid fields.
CpicConfig config_from_json(const nlohmann::json& j);

std::string traces_digest(const TrainReport& report);
ModelArtifact make_artifact(const TrainReport& report);

std::string serialize_model(const ModelArtifact& artifact);
/// Rebuilds the model from its config and loads every parameter.
/// Throws std::runtime_error naming the offending field.
ModelArtifact parse_model(const std::string& text);

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

/// Config, per-step traces, wall time, clamp events and the traces digest.
std::string serialize_report(const TrainReport& report);

}  // namespace cpic
