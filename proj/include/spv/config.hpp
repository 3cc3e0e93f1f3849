#pragma once

// JSON documents for layouts, bundle parameters and full pipeline configs.
//
// Missing keys take their defaults; unknown keys and wrong types are rejected
// with a ValidationError on stage "config".

#include <string_view>

#include <json.hpp>

#include "spv/geometry.hpp"
#include "spv/pipeline.hpp"

namespace spv {

inline constexpr int kConfigSchemaVersion = 1;

nlohmann::json layout_to_json(const GridLayout& layout);
GridLayout layout_from_json(const nlohmann::json& j);

nlohmann::json bundle_to_json(const BundleConfig& bundle);
BundleConfig bundle_from_json(const nlohmann::json& j);

/// The mask itself is not serialized, only `mask_path`.
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& j);

std::string_view model_kind_name(ModelKind kind);
std::string_view preprocess_kind_name(PreprocessKind kind);

/// Applies "dotted.path=value". The value is parsed as JSON when possible and
/// taken as a string otherwise. Intermediate objects are created as needed.
void apply_override(nlohmann::json& doc, std::string_view assignment);

}  // namespace spv
